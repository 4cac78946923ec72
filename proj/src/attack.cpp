#include "advlog/attack.hpp"

#include <chrono>
#include <cmath>

namespace advlog {

BaselineWindow::BaselineWindow(size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("BaselineWindow: capacity must be >= 1");
    buf_.reserve(capacity);
}

void BaselineWindow::recompute() {
    sum_ = 0.0;
    for (size_t i = 0; i < count_; ++i) sum_ += buf_[i];
    pushes_since_recompute_ = 0;
}

double BaselineWindow::push(double score) {
    if (count_ < capacity_) {
        buf_.push_back(score);
        sum_ += score;
        ++count_;
    } else {
        sum_ -= buf_[head_];
        buf_[head_] = score;
        sum_ += score;
        head_ = (head_ + 1) % capacity_;
    }
    if (++pushes_since_recompute_ >= 4096) recompute();
    return mean();
}

double BaselineWindow::mean() const {
    if (count_ == 0) throw std::logic_error("BaselineWindow::mean on empty window");
    return sum_ / static_cast<double>(count_);
}

BaselineWindow init_baseline(Generator& generator, ScoreOracle& oracle, size_t count, Rng& rng) {
    if (count == 0) throw std::invalid_argument("init_baseline: count must be >= 1");
    BaselineWindow window(count);
    std::vector<std::string> lines;
    lines.reserve(count);
    for (size_t i = 0; i < count; ++i)
        lines.push_back(generator.render(generator.sample_complete(TokenSeq{}, rng)));
    for (double s : oracle.score_batch(lines)) window.push(s);
    return window;
}

QValues q_values(Generator& generator, ScoreOracle& oracle, const TokenSeq& x, size_t r, Rng& rng) {
    x.check();
    if (!x.complete) throw std::invalid_argument("q_values: sequence not complete");
    if (r == 0) throw std::invalid_argument("q_values: r must be >= 1");
    size_t t_len = x.length();
    QValues out;
    out.q.resize(t_len);
    // Prefixes X_{1:t} for t = 1..T-1 get r rollouts each; Q_T is the score
    // of X itself.
    for (size_t t = 1; t < t_len; ++t) {
        TokenSeq prefix;
        prefix.ids.assign(x.ids.begin(), x.ids.begin() + static_cast<long>(t) + 1);
        std::vector<std::string> lines;
        lines.reserve(r);
        for (auto& seq : generator.rollouts(prefix, r, rng))
            lines.push_back(generator.render(seq));
        double total = 0.0;
        for (double s : oracle.score_batch(lines)) total += s;
        out.q[t - 1] = total / static_cast<double>(r);
    }
    out.q[t_len - 1] = oracle.score_batch({generator.render(x)})[0];
    return out;
}

void policy_step(Generator& generator, const TokenSeq& x, const QValues& q, double qbar,
                 double alpha, double eps, Rng& drop_rng, tc::Adam* optimizer) {
    if (q.q.size() != x.length())
        throw std::invalid_argument("policy_step: Q length != sequence length");
    bool all_zero = true;
    for (double qt : q.q)
        if (qt != qbar) all_zero = false;
    if (all_zero) return;  // exact no-op when every advantage vanishes

    auto terms = generator.seq_log_prob(x, eps, /*training=*/true, &drop_rng);
    tc::Tensor loss;
    for (size_t t = 0; t < terms.size(); ++t) {
        auto weighted = tc::scale(terms[t], q.q[t] - qbar);
        loss = loss ? tc::add(loss, weighted) : weighted;
    }
    tc::zero_grads(generator.params());
    tc::backward(loss);
    if (optimizer) {
        optimizer->step(generator.params(), alpha);
    } else {
        for (auto& p : generator.params()) {
            if (p->grad.empty()) continue;
            for (size_t i = 0; i < p->size(); ++i) p->val[i] -= alpha * p->grad[i];
        }
    }
}

double update_baseline(BaselineWindow& window, double new_score) {
    return window.push(new_score);
}

AttackReport run_attack(Generator& generator, ScoreOracle& oracle, const AttackConfig& config,
                        const AttackHooks& hooks) {
    config.check();
    Rng rng(config.seed);
    Rng drop_rng(config.seed ^ 0xA77ACDULL);
    Rng eval_rng(config.seed ^ 0xE7A1ULL);
    tc::Adam adam;
    AttackReport report;
    auto start = std::chrono::steady_clock::now();

    auto wall = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    auto evaluate = [&](size_t step) {
        auto ma = mean_anomaly(generator, oracle, config.eval_count, eval_rng);
        EvalPoint pt;
        pt.step = step;
        pt.mean_anomaly = ma.mean;
        pt.duplicate_pct = duplicate_pct(ma.lines);
        pt.wall_time_s = wall();
        report.points.push_back(pt);
        if (hooks.on_eval) hooks.on_eval(pt);
    };

    size_t step = 0;
    try {
        if (config.steps == 0) return report;
        evaluate(0);
        BaselineWindow window(config.baseline_window);
        {
            std::vector<std::string> lines;
            lines.reserve(config.baseline_init);
            for (size_t i = 0; i < config.baseline_init; ++i)
                lines.push_back(generator.render(generator.sample_complete(TokenSeq{}, rng)));
            for (double s : oracle.score_batch(lines)) window.push(s);
        }
        for (step = 1; step <= config.steps; ++step) {
            auto x = generator.sample_complete(TokenSeq{}, rng);
            auto q = q_values(generator, oracle, x, config.rollouts, rng);
            double qbar = window.mean();  // baseline from before this step
            policy_step(generator, x, q, qbar, config.lr, config.eps, drop_rng,
                        config.use_adam ? &adam : nullptr);
            update_baseline(window, q.q.back());  // fresh-sequence score, already computed
            report.steps_completed = step;
            if (step % config.eval_every == 0) evaluate(step);
        }
    } catch (const OracleError&) {
        report.aborted = true;
        if (hooks.on_abort) hooks.on_abort(step);
        throw;
    }
    return report;
}

}  // namespace advlog
