#include "advlog/detector.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "advlog/metrics.hpp"

namespace advlog {

namespace {
constexpr size_t kMaxPositions = 64;
}

Detector::Detector(DetectorConfig config, Vocab vocab, uint64_t seed)
    : config_(config), vocab_(std::move(vocab)) {
    config_.check();
    Rng rng(seed);
    size_t d = config_.model_dim, v = vocab_.size(), ff = config_.ff();
    embedding_ = tc::param({v, d}, d, rng);
    for (size_t l = 0; l < config_.layers; ++l) {
        Layer layer;
        layer.wq = tc::param({d, d}, d, rng);
        layer.wk = tc::param({d, d}, d, rng);
        layer.wv = tc::param({d, d}, d, rng);
        layer.wo = tc::param({d, d}, d, rng);
        layer.g1 = tc::make({d}, 1.0);
        layer.b1 = tc::make({d}, 0.0);
        layer.g2 = tc::make({d}, 1.0);
        layer.b2 = tc::make({d}, 0.0);
        layer.g1->requires_grad = layer.b1->requires_grad = true;
        layer.g2->requires_grad = layer.b2->requires_grad = true;
        layer.w_ff1 = tc::param({d, ff}, d, rng);
        layer.b_ff1 = tc::make({ff}, 0.0);
        layer.w_ff2 = tc::param({ff, d}, ff, rng);
        layer.b_ff2 = tc::make({d}, 0.0);
        layer.b_ff1->requires_grad = layer.b_ff2->requires_grad = true;
        layers_.push_back(std::move(layer));
    }
    w_out_ = tc::param({d, v}, d, rng);
    b_out_ = tc::make({v}, 0.0);
    b_out_->requires_grad = true;

    positional_.resize(kMaxPositions * d);
    for (size_t pos = 0; pos < kMaxPositions; ++pos) {
        for (size_t i = 0; i < d; i += 2) {
            double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
            positional_[pos * d + i] = std::sin(angle);
            if (i + 1 < d) positional_[pos * d + i + 1] = std::cos(angle);
        }
    }

    params_ = {embedding_};
    for (auto& l : layers_) {
        for (auto& p : {l.wq, l.wk, l.wv, l.wo, l.g1, l.b1, l.g2, l.b2,
                        l.w_ff1, l.b_ff1, l.w_ff2, l.b_ff2})
            params_.push_back(p);
    }
    params_.push_back(w_out_);
    params_.push_back(b_out_);
}

std::vector<std::string> Detector::param_names() const {
    std::vector<std::string> names = {"embedding"};
    for (size_t l = 0; l < layers_.size(); ++l) {
        std::string p = "layer" + std::to_string(l) + ".";
        for (const char* n : {"wq", "wk", "wv", "wo", "ln1.gain", "ln1.bias", "ln2.gain",
                              "ln2.bias", "ff1.w", "ff1.b", "ff2.w", "ff2.b"})
            names.push_back(p + n);
    }
    names.push_back("out.w");
    names.push_back("out.b");
    return names;
}

tc::Tensor Detector::forward_logits(const std::vector<int>& inputs, size_t batch, size_t seq_len,
                                    bool training, Rng* drop_rng) const {
    if (seq_len > kMaxPositions)
        throw std::invalid_argument("Detector: sequence longer than positional table");
    size_t d = config_.model_dim;
    for (int id : inputs)
        if (id < 0 || static_cast<size_t>(id) >= vocab_.size())
            throw std::out_of_range("Detector: token id out of range");

    auto x = tc::embedding_lookup(embedding_, inputs);
    auto pos = tc::make({batch * seq_len, d});
    for (size_t b = 0; b < batch; ++b)
        std::copy_n(positional_.data(), seq_len * d, pos->val.data() + b * seq_len * d);
    x = tc::add(x, pos);
    double p = config_.dropout_p;
    if (training) x = tc::dropout(x, p, true, *drop_rng);

    for (const auto& l : layers_) {
        auto q = tc::matmul(x, l.wq);
        auto k = tc::matmul(x, l.wk);
        auto v = tc::matmul(x, l.wv);
        auto attn = tc::causal_attention(q, k, v, config_.heads, batch, seq_len);
        auto o = tc::matmul(attn, l.wo);
        if (training) o = tc::dropout(o, p, true, *drop_rng);
        x = tc::layer_norm(tc::add(x, o), l.g1, l.b1);
        auto f = tc::relu(tc::add_rowvec(tc::matmul(x, l.w_ff1), l.b_ff1));
        f = tc::add_rowvec(tc::matmul(f, l.w_ff2), l.b_ff2);
        if (training) f = tc::dropout(f, p, true, *drop_rng);
        x = tc::layer_norm(tc::add(x, f), l.g2, l.b2);
    }
    return tc::add_rowvec(tc::matmul(x, w_out_), b_out_);
}

tc::Tensor Detector::batch_loss(const std::vector<int>& inputs, const std::vector<int>& targets,
                                size_t batch, size_t seq_len, bool training, Rng* drop_rng) const {
    auto logits = forward_logits(inputs, batch, seq_len, training, drop_rng);
    return tc::softmax_cross_entropy_rows(logits, targets, true);
}

tc::Tensor Detector::next_word_logits(const TokenSeq& seq) const {
    seq.check();
    if (!seq.complete) throw std::invalid_argument("next_word_logits: sequence not complete");
    std::vector<int> inputs(seq.ids.begin(), seq.ids.end() - 1);
    return forward_logits(inputs, 1, inputs.size(), false, nullptr);
}

double Detector::anomaly_score(const TokenSeq& seq) const {
    tc::NoGradGuard ng;
    auto logits = next_word_logits(seq);
    size_t t_len = seq.length(), v = vocab_.size();
    double total = 0.0;
    for (size_t t = 0; t < t_len; ++t) {
        const double* row = logits->val.data() + t * v;
        int target = seq.ids[t + 1];
        double mx = row[0];
        for (size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (size_t j = 0; j < v; ++j) z += std::exp(row[j] - mx);
        total += -(row[target] - mx - std::log(z));
    }
    return total;
}

TrainReport Detector::train(const Corpus& corpus, uint64_t seed) {
    if (corpus.lines.empty()) throw std::invalid_argument("Detector::train: empty corpus");
    Rng shuffle_rng(seed);
    Rng drop_rng(seed ^ 0xD20FULL);
    TrainReport report;

    std::vector<TokenSeq> seqs;
    seqs.reserve(corpus.lines.size());
    for (const auto& l : corpus.lines) seqs.push_back(encode(vocab_, l));

    for (size_t epoch = 0; epoch < config_.epochs; ++epoch) {
        std::vector<size_t> order(seqs.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle_rng.shuffle(order);

        // Batches hold equal-length sequences only.
        std::map<size_t, std::vector<size_t>> buckets;
        double epoch_loss = 0.0;
        size_t n_lines = 0;
        auto flush = [&](size_t len, std::vector<size_t>& group) {
            if (group.empty()) return;
            size_t b = group.size();
            std::vector<int> inputs, targets;
            inputs.reserve(b * len);
            targets.reserve(b * len);
            for (size_t gi : group) {
                const auto& ids = seqs[gi].ids;
                inputs.insert(inputs.end(), ids.begin(), ids.end() - 1);
                targets.insert(targets.end(), ids.begin() + 1, ids.end());
            }
            auto loss = batch_loss(inputs, targets, b, len, true, &drop_rng);
            tc::zero_grads(params_);
            tc::backward(loss);
            adam_.step(params_, config_.lr);
            epoch_loss += loss->val[0] * static_cast<double>(b);
            n_lines += b;
            group.clear();
        };
        for (size_t i : order) {
            size_t len = seqs[i].length();
            auto& group = buckets[len];
            group.push_back(i);
            if (group.size() == config_.batch_size) flush(len, group);
        }
        for (auto& [len, group] : buckets) flush(len, group);
        report.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(n_lines ? n_lines : 1));
    }
    return report;
}

double Detector::mean_loss(const Corpus& corpus) const {
    if (corpus.lines.empty()) throw std::invalid_argument("Detector::mean_loss: empty corpus");
    tc::NoGradGuard ng;
    double total = 0.0;
    for (const auto& l : corpus.lines) {
        auto seq = encode(vocab_, l);
        total += anomaly_score(seq) / static_cast<double>(seq.length());
    }
    return total / static_cast<double>(corpus.lines.size());
}

double red_team_auc(const Detector& model, const Corpus& corpus) {
    if (!corpus.labels) throw std::invalid_argument("red_team_auc: corpus has no labels");
    corpus.check();
    std::vector<double> pos, neg;
    for (size_t i = 0; i < corpus.lines.size(); ++i) {
        double s = model.anomaly_score(encode(model.vocab(), corpus.lines[i]));
        ((*corpus.labels)[i] ? pos : neg).push_back(s);
    }
    return auc(pos, neg);
}

}  // namespace advlog
