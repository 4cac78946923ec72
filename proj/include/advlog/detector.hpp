#pragma once

// Transformer-encoder next-word model over log lines. The summed per-token
// cross entropy of a line under the model is its anomaly score.

#include <cstdint>
#include <vector>

#include "advlog/corpus.hpp"
#include "advlog/tensor.hpp"

namespace advlog {

struct DetectorConfig {
    size_t heads = 8;
    size_t layers = 1;
    size_t model_dim = 512;
    size_t ff_dim = 0;  // 0 means 4 * model_dim
    double dropout_p = 0.0;
    double lr = 1e-4;
    size_t epochs = 4;
    size_t batch_size = 32;

    size_t ff() const { return ff_dim ? ff_dim : 4 * model_dim; }
    void check() const {
        if (heads == 0 || model_dim % heads != 0)
            throw std::invalid_argument("DetectorConfig: model_dim must be divisible by heads");
        if (dropout_p < 0.0 || dropout_p >= 1.0)
            throw std::invalid_argument("DetectorConfig: dropout_p must be in [0,1)");
        if (layers == 0 || batch_size == 0)
            throw std::invalid_argument("DetectorConfig: layers and batch_size must be >= 1");
    }

    static DetectorConfig desk() {
        DetectorConfig c;
        c.heads = 2;
        c.model_dim = 64;
        return c;
    }
};

struct TrainReport {
    std::vector<double> epoch_mean_loss;
};

class Detector {
public:
    Detector(DetectorConfig config, Vocab vocab, uint64_t seed);

    // Row t holds the logits for token t+1 of the sequence; row 0 conditions
    // on SOL alone. Evaluation mode, no dropout.
    tc::Tensor next_word_logits(const TokenSeq& seq) const;

    // Summed cross entropy of every generated token (EOL included).
    double anomaly_score(const TokenSeq& seq) const;

    TrainReport train(const Corpus& corpus, uint64_t seed);

    // Mean per-line training loss over a corpus without updating parameters.
    double mean_loss(const Corpus& corpus) const;

    const DetectorConfig& config() const { return config_; }
    const Vocab& vocab() const { return vocab_; }
    std::vector<tc::Tensor>& params() { return params_; }
    const std::vector<tc::Tensor>& params() const { return params_; }
    std::vector<std::string> param_names() const;
    tc::Adam& optimizer() { return adam_; }

private:
    struct Layer {
        tc::Tensor wq, wk, wv, wo;
        tc::Tensor g1, b1, g2, b2;       // layer norms
        tc::Tensor w_ff1, b_ff1, w_ff2, b_ff2;
    };

    // Forward over a batch of equal-length sequences; returns the mean
    // next-word cross entropy. ids/targets are flattened [batch * T].
    tc::Tensor batch_loss(const std::vector<int>& inputs, const std::vector<int>& targets,
                          size_t batch, size_t seq_len, bool training, Rng* drop_rng) const;
    tc::Tensor forward_logits(const std::vector<int>& inputs, size_t batch, size_t seq_len,
                              bool training, Rng* drop_rng) const;

    DetectorConfig config_;
    Vocab vocab_;
    tc::Tensor embedding_;
    std::vector<Layer> layers_;
    tc::Tensor w_out_, b_out_;
    std::vector<double> positional_;  // sinusoidal, sized on demand
    std::vector<tc::Tensor> params_;
    tc::Adam adam_;
};

// AUC of anomaly_score against the corpus labels (labeled lines positive).
double red_team_auc(const Detector& model, const Corpus& corpus);

}  // namespace advlog
