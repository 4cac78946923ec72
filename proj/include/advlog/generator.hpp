#pragma once

// LSTM sequence generator: next-token distributions, complete-line sampling,
// rollout completions, differentiable sequence log probabilities, and
// pretraining on the noisy column-shuffled corpus.

#include <cstdint>
#include <string>
#include <vector>

#include "advlog/corpus.hpp"
#include "advlog/tensor.hpp"

namespace advlog {

struct GeneratorConfig {
    size_t embed_dim = 256;
    size_t hidden_dim = 256;
    double dropout_p = 0.5;
    size_t max_len = 32;  // cap on generated tokens per line, EOL included
    double lr = 1e-4;
    size_t max_epochs = 20;
    double train_split = 0.8;

    void check() const {
        if (max_len < 2) throw std::invalid_argument("GeneratorConfig: max_len must be >= 2");
        if (dropout_p < 0.0 || dropout_p >= 1.0)
            throw std::invalid_argument("GeneratorConfig: dropout_p must be in [0,1)");
        if (embed_dim == 0 || hidden_dim == 0)
            throw std::invalid_argument("GeneratorConfig: zero dimension");
    }

    static GeneratorConfig desk() {
        GeneratorConfig c;
        c.embed_dim = 64;
        c.hidden_dim = 64;
        return c;
    }
};

struct PretrainReport {
    std::vector<double> train_loss;
    std::vector<double> test_loss;
    size_t stopped_after_epoch = 0;  // number of epochs actually run
};

class Generator {
public:
    Generator(GeneratorConfig config, Vocab vocab, uint64_t seed);

    // Softmax over the next token given an incomplete prefix. Eval mode.
    std::vector<double> next_token_dist(const TokenSeq& prefix) const;

    // Samples until EOL; at the length cap an EOL is forced.
    TokenSeq sample_complete(const TokenSeq& prefix, Rng& rng) const;

    // r independent completions of the prefix. A complete prefix yields
    // r copies of itself.
    std::vector<TokenSeq> rollouts(const TokenSeq& prefix, size_t r, Rng& rng) const;

    // Differentiable per-position terms log(G(x_t | X_{1:t-1}) + eps),
    // t = 1..T. Dropout follows `training`.
    std::vector<tc::Tensor> seq_log_prob(const TokenSeq& seq, double eps, bool training,
                                         Rng* drop_rng) const;

    PretrainReport pretrain(const Corpus& corpus, uint64_t seed);

    // Decoded text of a generated sequence in corpus file format (time 0).
    std::string render(const TokenSeq& seq) const;

    const GeneratorConfig& config() const { return config_; }
    const Vocab& vocab() const { return vocab_; }
    std::vector<tc::Tensor>& params() { return params_; }
    const std::vector<tc::Tensor>& params() const { return params_; }
    std::vector<std::string> param_names() const;
    tc::Adam& optimizer() { return adam_; }

private:
    // Numeric (graph-free) forward used for sampling.
    struct State {
        std::vector<double> h, c;
    };
    void step_numeric(int token, State& st) const;
    std::vector<double> output_dist(const State& st) const;

    // Graph forward over an encoded sequence; returns per-position logits
    // rows [T x V] for predicting ids[1..T].
    tc::Tensor forward_logits(const std::vector<int>& inputs, bool training, Rng* drop_rng) const;

    GeneratorConfig config_;
    Vocab vocab_;
    tc::Tensor embedding_, wx_, wh_, b_, w_out_, b_out_, sol_mask_;
    std::vector<tc::Tensor> params_;
    tc::Adam adam_;
};

}  // namespace advlog
