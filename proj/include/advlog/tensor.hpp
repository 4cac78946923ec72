#pragma once

// Minimal reverse-mode autodiff engine. Tensors are shared nodes in a
// dynamically built graph; backward() runs the recorded closures in
// reverse topological order. Only the primitives needed by the two
// model architectures are provided.

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "advlog/rng.hpp"

namespace advlog::tc {

struct Node;
using Tensor = std::shared_ptr<Node>;

struct Node {
    std::vector<size_t> shape;
    std::vector<double> val;
    std::vector<double> grad;             // sized lazily during backward
    std::vector<Tensor> parents;
    std::function<void()> backprop;       // reads this->grad, accumulates into parents
    bool requires_grad = false;

    size_t size() const { return val.size(); }
    size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 1 : shape[0]) : shape[1]; }
    bool is_scalar() const { return val.size() == 1; }

    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    }
};

// Graph recording can be switched off for pure inference; values are
// still computed but no parents/closures are kept.
bool& grad_enabled();

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_enabled()) { grad_enabled() = false; }
    ~NoGradGuard() { grad_enabled() = prev; }
};

[[noreturn]] void shape_error(const std::string& op, const Node& a);
[[noreturn]] void shape_error(const std::string& op, const Node& a, const Node& b);

// --- construction ---------------------------------------------------------
Tensor make(std::vector<size_t> shape, double fill = 0.0);
Tensor make(std::vector<size_t> shape, std::vector<double> values);
Tensor scalar(double v);
// Trainable parameter, seeded uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor param(std::vector<size_t> shape, size_t fan_in, Rng& rng);

// --- elementwise / linear algebra -----------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);          // hadamard
Tensor scale(const Tensor& a, double c);
Tensor add_rowvec(const Tensor& a, const Tensor& v);   // broadcast [n] over rows of [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, size_t c0, size_t c1);
Tensor slice_rows(const Tensor& a, size_t r0, size_t r1);
Tensor sum(const Tensor& a);                           // -> scalar

// --- nonlinearities --------------------------------------------------------
Tensor sigmoid(const Tensor& a);
Tensor tanh_(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor row_softmax(const Tensor& a);
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// --- structured ops ---------------------------------------------------------
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
// Inverted dropout: training mode zeroes elements with probability p and
// scales survivors by 1/(1-p); eval mode is the identity.
Tensor dropout(const Tensor& a, double p, bool training, Rng& rng);
// Multi-head self-attention over B stacked sequences of length T; position i
// attends to positions <= i only. q, k, v are [(B*T) x D].
Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        size_t heads, size_t batch, size_t seq_len);

// One LSTM step. x: [1 x in], h/c: [1 x H]; wx: [in x 4H], wh: [H x 4H],
// b: [1 x 4H] with gate order (input, forget, cell, output).
struct LstmOut {
    Tensor h;
    Tensor c;
};
LstmOut lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c,
                  const Tensor& wx, const Tensor& wh, const Tensor& b);

// --- losses ----------------------------------------------------------------
// -log softmax(logits)[target], max-stabilized. logits: [V] or [1 x V].
Tensor softmax_cross_entropy(const Tensor& logits, int target);
// Mean (or sum) of per-row cross entropies. logits: [n x V], targets: n ids.
Tensor softmax_cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets,
                                  bool mean_reduce = true);
// log(softmax(logits)[id] + eps) for one row of logits; differentiable.
Tensor log_prob_entry(const Tensor& logits, int id, double eps);

// --- backward & optimizer ---------------------------------------------------
void backward(const Tensor& loss);
void zero_grads(const std::vector<Tensor>& params);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
};

class Adam {
public:
    Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Tensor>& params, double lr);
    void reset() { states_.clear(); t_ = 0; }

    uint64_t step_count() const { return t_; }
    // Checkpoint access: moment arrays in the order of the given params.
    std::vector<std::pair<std::vector<double>, std::vector<double>>>
    export_state(const std::vector<Tensor>& params) const;
    void import_state(const std::vector<Tensor>& params, uint64_t t,
                      const std::vector<std::pair<std::vector<double>, std::vector<double>>>& mv);

private:
    double beta1_, beta2_, eps_;
    uint64_t t_ = 0;
    std::unordered_map<Node*, AdamState> states_;
};

}  // namespace advlog::tc
