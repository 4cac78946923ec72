#include <cmath>

#include "advlog/tensor.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace advlog;
using namespace advlog::tc;
using advtest::grad_check;

TEST_CASE("elementwise forward values") {
    auto a = make({2, 2}, {1.0, 2.0, 3.0, 4.0});
    auto b = make({2, 2}, {0.5, 0.5, -1.0, 2.0});
    CHECK(add(a, b)->val == std::vector<double>{1.5, 2.5, 2.0, 6.0});
    CHECK(mul(a, b)->val == std::vector<double>{0.5, 1.0, -3.0, 8.0});
    CHECK(scale(a, 2.0)->val == std::vector<double>{2.0, 4.0, 6.0, 8.0});
    CHECK_THROWS_AS(add(a, make({3}, 0.0)), std::invalid_argument);
}

TEST_CASE("matmul forward and shape errors") {
    auto a = make({2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = make({3, 2}, {7, 8, 9, 10, 11, 12});
    auto c = matmul(a, b);
    CHECK(c->val == std::vector<double>{58, 64, 139, 154});
    CHECK_THROWS_AS(matmul(a, a), std::invalid_argument);
}

TEST_CASE("row_softmax of zeros is uniform and rows sum to 1") {
    auto x = make({1, 5}, 0.0);
    auto y = row_softmax(x);
    for (double v : y->val) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));

    Rng rng(3);
    auto z = make({4, 7});
    for (auto& v : z->val) v = rng.uniform_range(-5, 5);
    auto s = row_softmax(z);
    for (size_t i = 0; i < 4; ++i) {
        double total = 0;
        for (size_t j = 0; j < 7; ++j) total += s->val[i * 7 + j];
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("dropout identity cases and expectation") {
    Rng rng(11);
    auto x = make({10}, 1.0);
    x->requires_grad = true;
    auto y = dropout(x, 0.0, true, rng);
    CHECK(y->val == x->val);
    auto z = dropout(x, 0.7, false, rng);
    CHECK(z->val == x->val);

    // Inverted dropout preserves expectation within 1% over 1e5 trials.
    double total = 0.0;
    size_t trials = 100000;
    for (size_t i = 0; i < trials; ++i) {
        auto one = make({1}, 1.0);
        total += dropout(one, 0.5, true, rng)->val[0];
    }
    CHECK(total / double(trials) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("lstm_cell with zero weights and inputs gives zero hidden state") {
    auto x = make({1, 3}, 0.0);
    auto h = make({1, 2}, 0.0);
    auto c = make({1, 2}, 0.0);
    auto wx = make({3, 8}, 0.0);
    auto wh = make({2, 8}, 0.0);
    auto b = make({1, 8}, 0.0);
    auto out = lstm_cell(x, h, c, wx, wh, b);
    // h' = sigmoid(0) * tanh(sigmoid(0)*0 + sigmoid(0)*tanh(0)) = 0
    for (double v : out.h->val) CHECK(v == 0.0);
    for (double v : out.c->val) CHECK(v == 0.0);
}

TEST_CASE("softmax_cross_entropy closed-form values") {
    auto uniform = make({1, 2}, 0.0);
    CHECK(softmax_cross_entropy(uniform, 0)->val[0] == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    auto sharp = make({1, 2}, {10.0, -10.0});
    // -log sigma(20)
    CHECK(softmax_cross_entropy(sharp, 0)->val[0] ==
          doctest::Approx(-std::log(1.0 / (1.0 + std::exp(-20.0)))).epsilon(1e-6));
    CHECK(softmax_cross_entropy(sharp, 0)->val[0] == doctest::Approx(2.06e-9).epsilon(0.01));

    // Shift invariance.
    auto shifted = make({1, 2}, {10.0 + 100.0, -10.0 + 100.0});
    CHECK(softmax_cross_entropy(shifted, 0)->val[0] ==
          doctest::Approx(softmax_cross_entropy(sharp, 0)->val[0]).epsilon(1e-6));

    CHECK_THROWS_AS(softmax_cross_entropy(sharp, 5), std::out_of_range);
}

TEST_CASE("backward on simple graphs") {
    auto x = make({4}, {1.0, -2.0, 3.0, 0.5});
    x->requires_grad = true;

    auto s = sum(x);
    zero_grads({x});
    backward(s);
    for (double g : x->grad) CHECK(g == 1.0);

    // loss = sum(x*x)/2 -> grad = x
    auto loss = scale(sum(mul(x, x)), 0.5);
    zero_grads({x});
    backward(loss);
    for (size_t i = 0; i < 4; ++i) CHECK(x->grad[i] == doctest::Approx(x->val[i]).epsilon(1e-12));

    CHECK_THROWS_AS(backward(x), std::invalid_argument);
}

TEST_CASE("gradient check: every primitive") {
    Rng rng(42);
    auto rnd = [&](std::vector<size_t> shape) {
        auto t = make(shape);
        for (auto& v : t->val) v = rng.uniform_range(-1.0, 1.0);
        t->requires_grad = true;
        return t;
    };

    SUBCASE("matmul + add + add_rowvec") {
        auto a = rnd({3, 4}), b = rnd({4, 5}), v = rnd({5});
        auto fn = [&] { return sum(tanh_(add_rowvec(matmul(a, b), v))); };
        CHECK(grad_check(fn, {a, b, v}) < 1e-4);
    }
    SUBCASE("mul, sub, scale, sigmoid, relu") {
        auto a = rnd({6}), b = rnd({6});
        auto fn = [&] { return sum(mul(sigmoid(a), relu(sub(scale(b, 2.0), a)))); };
        CHECK(grad_check(fn, {a, b}) < 1e-4);
    }
    SUBCASE("row_softmax") {
        auto a = rnd({3, 5});
        auto w = rnd({3, 5});
        auto fn = [&] { return sum(mul(row_softmax(a), w)); };
        CHECK(grad_check(fn, {a, w}) < 1e-4);
    }
    SUBCASE("layer_norm") {
        auto a = rnd({3, 6}), g = rnd({6}), b = rnd({6});
        auto fn = [&] { return sum(sigmoid(layer_norm(a, g, b))); };
        CHECK(grad_check(fn, {a, g, b}) < 1e-4);
    }
    SUBCASE("embedding_lookup + slicing + concat") {
        auto table = rnd({5, 4});
        std::vector<int> ids = {0, 3, 3, 1};
        auto fn = [&] {
            auto e = embedding_lookup(table, ids);
            auto left = slice_cols(e, 0, 2);
            auto right = slice_cols(e, 2, 4);
            auto stacked = concat_rows(left, right);
            return sum(mul(slice_rows(stacked, 1, 7), slice_rows(stacked, 0, 6)));
        };
        CHECK(grad_check(fn, {table}) < 1e-4);
    }
    SUBCASE("causal attention") {
        auto q = rnd({6, 4}), k = rnd({6, 4}), v = rnd({6, 4}), w = rnd({6, 4});
        auto fn = [&] { return sum(mul(causal_attention(q, k, v, 2, 2, 3), w)); };
        CHECK(grad_check(fn, {q, k, v, w}) < 1e-4);
    }
    SUBCASE("lstm_cell") {
        auto x = rnd({1, 3}), h = rnd({1, 2}), c = rnd({1, 2});
        auto wx = rnd({3, 8}), wh = rnd({2, 8}), b = rnd({1, 8});
        auto fn = [&] {
            auto out = lstm_cell(x, h, c, wx, wh, b);
            return sum(add(mul(out.h, out.h), out.c));
        };
        CHECK(grad_check(fn, {x, h, c, wx, wh, b}) < 1e-4);
    }
    SUBCASE("softmax_cross_entropy_rows") {
        auto logits = rnd({4, 6});
        std::vector<int> targets = {1, 0, 5, 2};
        auto fn = [&] { return softmax_cross_entropy_rows(logits, targets, true); };
        CHECK(grad_check(fn, {logits}) < 1e-4);
    }
    SUBCASE("log_prob_entry") {
        auto logits = rnd({1, 6});
        auto fn = [&] { return log_prob_entry(logits, 2, 1e-7); };
        CHECK(grad_check(fn, {logits}) < 1e-4);
    }
    SUBCASE("dropout mask is differentiated through") {
        auto a = rnd({8});
        Rng drop_rng(7);
        // Same mask on every call: reseed inside the closure.
        auto fn = [&] {
            Rng local(123);
            return sum(mul(dropout(a, 0.5, true, local), a));
        };
        CHECK(grad_check(fn, {a}) < 1e-4);
    }
}

TEST_CASE("causal attention ignores future positions bit-exactly") {
    Rng rng(5);
    size_t t_len = 4, d = 6;
    auto mk = [&] {
        auto t = make({t_len, d});
        for (auto& v : t->val) v = rng.uniform_range(-1, 1);
        return t;
    };
    auto q = mk(), k = mk(), v = mk();
    auto out1 = causal_attention(q, k, v, 3, 1, t_len);
    // Alter the last position of all inputs; rows 0..T-2 must be bit-identical.
    for (size_t j = 0; j < d; ++j) {
        q->val[(t_len - 1) * d + j] += 10.0;
        k->val[(t_len - 1) * d + j] -= 3.0;
        v->val[(t_len - 1) * d + j] *= -2.0;
    }
    auto out2 = causal_attention(q, k, v, 3, 1, t_len);
    for (size_t i = 0; i < (t_len - 1) * d; ++i) CHECK(out1->val[i] == out2->val[i]);
}

TEST_CASE("adam optimizer") {
    SUBCASE("zero gradient leaves parameter unchanged") {
        auto p = make({3}, {1.0, 2.0, 3.0});
        p->requires_grad = true;
        p->ensure_grad();
        Adam adam;
        adam.step({p}, 0.1);
        CHECK(p->val == std::vector<double>{1.0, 2.0, 3.0});
    }
    SUBCASE("first step has magnitude ~lr in the gradient direction") {
        auto p = scalar(5.0);
        p->requires_grad = true;
        p->ensure_grad();
        p->grad[0] = 0.3;
        Adam adam;
        adam.step({p}, 1e-2);
        // bias-corrected m/sqrt(v) = sign(g) on step one (up to eps)
        CHECK(p->val[0] == doctest::Approx(5.0 - 1e-2).epsilon(1e-4));
    }
    SUBCASE("deterministic given same start") {
        for (int rep = 0; rep < 2; ++rep) {
            auto p = make({2}, {1.0, -1.0});
            p->requires_grad = true;
            Adam adam;
            for (int i = 0; i < 5; ++i) {
                auto loss = scale(sum(mul(p, p)), 0.5);
                zero_grads({p});
                backward(loss);
                adam.step({p}, 0.05);
            }
            static std::vector<double> first;
            if (rep == 0)
                first = p->val;
            else
                CHECK(p->val == first);
        }
    }
}
