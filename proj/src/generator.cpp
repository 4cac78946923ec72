#include "advlog/generator.hpp"

#include <algorithm>
#include <cmath>

namespace advlog {

Generator::Generator(GeneratorConfig config, Vocab vocab, uint64_t seed)
    : config_(config), vocab_(std::move(vocab)) {
    config_.check();
    Rng rng(seed);
    size_t de = config_.embed_dim, h = config_.hidden_dim, v = vocab_.size();
    embedding_ = tc::param({v, de}, de, rng);
    wx_ = tc::param({de, 4 * h}, de, rng);
    wh_ = tc::param({h, 4 * h}, h, rng);
    b_ = tc::make({1, 4 * h}, 0.0);
    b_->requires_grad = true;
    w_out_ = tc::param({h, v}, h, rng);
    b_out_ = tc::make({v}, 0.0);
    b_out_->requires_grad = true;
    // SOL is never a legal emission; its logit is pinned to -inf and the
    // model's distribution lives on the remaining tokens.
    sol_mask_ = tc::make({v}, 0.0);
    sol_mask_->val[Vocab::kSol] = -1e9;
    params_ = {embedding_, wx_, wh_, b_, w_out_, b_out_};
}

std::vector<std::string> Generator::param_names() const {
    return {"embedding", "lstm.wx", "lstm.wh", "lstm.b", "out.w", "out.b"};
}

void Generator::step_numeric(int token, State& st) const {
    size_t de = config_.embed_dim, h = config_.hidden_dim;
    if (token < 0 || static_cast<size_t>(token) >= vocab_.size())
        throw std::out_of_range("Generator: token id out of range");
    if (st.h.empty()) {
        st.h.assign(h, 0.0);
        st.c.assign(h, 0.0);
    }
    const double* emb = embedding_->val.data() + static_cast<size_t>(token) * de;
    std::vector<double> z(b_->val);
    // z = x*Wx + h*Wh + b
    for (size_t p = 0; p < de; ++p) {
        double xp = emb[p];
        if (xp == 0.0) continue;
        const double* w = wx_->val.data() + p * 4 * h;
        for (size_t j = 0; j < 4 * h; ++j) z[j] += xp * w[j];
    }
    for (size_t p = 0; p < h; ++p) {
        double hp = st.h[p];
        if (hp == 0.0) continue;
        const double* w = wh_->val.data() + p * 4 * h;
        for (size_t j = 0; j < 4 * h; ++j) z[j] += hp * w[j];
    }
    auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    for (size_t j = 0; j < h; ++j) {
        double gi = sig(z[j]);
        double gf = sig(z[h + j]);
        double gg = std::tanh(z[2 * h + j]);
        double go = sig(z[3 * h + j]);
        st.c[j] = gf * st.c[j] + gi * gg;
        st.h[j] = go * std::tanh(st.c[j]);
    }
}

std::vector<double> Generator::output_dist(const State& st) const {
    size_t h = config_.hidden_dim, v = vocab_.size();
    std::vector<double> logits(b_out_->val);
    logits[Vocab::kSol] = -1e9;
    for (size_t p = 0; p < h; ++p) {
        double hp = st.h[p];
        if (hp == 0.0) continue;
        const double* w = w_out_->val.data() + p * v;
        for (size_t j = 0; j < v; ++j) logits[j] += hp * w[j];
    }
    double mx = logits[0];
    for (size_t j = 1; j < v; ++j) mx = std::max(mx, logits[j]);
    double z = 0.0;
    for (size_t j = 0; j < v; ++j) {
        logits[j] = std::exp(logits[j] - mx);
        z += logits[j];
    }
    for (size_t j = 0; j < v; ++j) logits[j] /= z;
    return logits;
}

std::vector<double> Generator::next_token_dist(const TokenSeq& prefix) const {
    prefix.check();
    if (prefix.complete) throw std::invalid_argument("next_token_dist: prefix is complete");
    State st;
    for (int id : prefix.ids) step_numeric(id, st);
    return output_dist(st);
}

TokenSeq Generator::sample_complete(const TokenSeq& prefix, Rng& rng) const {
    prefix.check();
    if (prefix.complete) throw std::invalid_argument("sample_complete: prefix is complete");
    TokenSeq seq = prefix;
    State st;
    for (int id : seq.ids) step_numeric(id, st);
    while (true) {
        if (seq.length() >= config_.max_len - 1) {
            seq.push(Vocab::kEol);
            break;
        }
        auto dist = output_dist(st);
        double u = rng.uniform();
        double acc = 0.0;
        int picked = static_cast<int>(dist.size()) - 1;
        for (size_t j = 0; j < dist.size(); ++j) {
            acc += dist[j];
            if (u < acc) {
                picked = static_cast<int>(j);
                break;
            }
        }
        seq.push(picked);
        if (seq.complete) break;
        step_numeric(picked, st);
    }
    seq.check();
    return seq;
}

std::vector<TokenSeq> Generator::rollouts(const TokenSeq& prefix, size_t r, Rng& rng) const {
    if (r == 0) throw std::invalid_argument("rollouts: r must be >= 1");
    std::vector<TokenSeq> out;
    out.reserve(r);
    for (size_t i = 0; i < r; ++i)
        out.push_back(prefix.complete ? prefix : sample_complete(prefix, rng));
    return out;
}

tc::Tensor Generator::forward_logits(const std::vector<int>& inputs, bool training,
                                     Rng* drop_rng) const {
    size_t h = config_.hidden_dim;
    auto hidden = tc::make({1, h}, 0.0);
    auto cell = tc::make({1, h}, 0.0);
    std::vector<tc::Tensor> rows;
    rows.reserve(inputs.size());
    for (int id : inputs) {
        auto x = tc::embedding_lookup(embedding_, {id});
        auto out = tc::lstm_cell(x, hidden, cell, wx_, wh_, b_);
        hidden = out.h;
        cell = out.c;
        auto dropped = tc::dropout(hidden, config_.dropout_p, training, *drop_rng);
        rows.push_back(tc::add_rowvec(tc::add_rowvec(tc::matmul(dropped, w_out_), b_out_), sol_mask_));
    }
    auto logits = rows[0];
    for (size_t i = 1; i < rows.size(); ++i) logits = tc::concat_rows(logits, rows[i]);
    return logits;
}

std::vector<tc::Tensor> Generator::seq_log_prob(const TokenSeq& seq, double eps, bool training,
                                                Rng* drop_rng) const {
    seq.check();
    if (!seq.complete) throw std::invalid_argument("seq_log_prob: sequence not complete");
    for (int id : seq.ids)
        if (id < 0 || static_cast<size_t>(id) >= vocab_.size())
            throw std::out_of_range("seq_log_prob: token outside generator vocab");
    Rng fallback(0);
    std::vector<int> inputs(seq.ids.begin(), seq.ids.end() - 1);
    auto logits = forward_logits(inputs, training, drop_rng ? drop_rng : &fallback);
    std::vector<tc::Tensor> terms;
    terms.reserve(inputs.size());
    for (size_t t = 0; t < inputs.size(); ++t)
        terms.push_back(tc::log_prob_entry(tc::slice_rows(logits, t, t + 1), seq.ids[t + 1], eps));
    return terms;
}

PretrainReport Generator::pretrain(const Corpus& corpus, uint64_t seed) {
    size_t n = corpus.lines.size();
    size_t n_train = static_cast<size_t>(std::llround(config_.train_split * static_cast<double>(n)));
    if (n_train == 0 || n_train >= n)
        throw std::invalid_argument("pretrain: corpus too small for a non-empty split");

    Rng split_rng(seed);
    Rng drop_rng(seed ^ 0x6E0ULL);
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    split_rng.shuffle(order);

    std::vector<TokenSeq> train_seqs, test_seqs;
    for (size_t i = 0; i < n; ++i) {
        auto seq = encode(vocab_, corpus.lines[order[i]]);
        (i < n_train ? train_seqs : test_seqs).push_back(std::move(seq));
    }

    auto eval_loss = [&](const std::vector<TokenSeq>& seqs) {
        tc::NoGradGuard ng;
        double total = 0.0;
        for (const auto& s : seqs) {
            std::vector<int> inputs(s.ids.begin(), s.ids.end() - 1);
            std::vector<int> targets(s.ids.begin() + 1, s.ids.end());
            auto logits = forward_logits(inputs, false, nullptr);
            size_t v = vocab_.size();
            double line = 0.0;
            for (size_t t = 0; t < inputs.size(); ++t) {
                const double* row = logits->val.data() + t * v;
                double mx = row[0];
                for (size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
                double z = 0.0;
                for (size_t j = 0; j < v; ++j) z += std::exp(row[j] - mx);
                line += -(row[targets[t]] - mx - std::log(z));
            }
            total += line / static_cast<double>(inputs.size());
        }
        return total / static_cast<double>(seqs.size());
    };

    PretrainReport report;
    for (size_t epoch = 0; epoch < config_.max_epochs; ++epoch) {
        double epoch_loss = 0.0;
        std::vector<size_t> train_order(train_seqs.size());
        for (size_t i = 0; i < train_order.size(); ++i) train_order[i] = i;
        split_rng.shuffle(train_order);
        for (size_t i : train_order) {
            const auto& s = train_seqs[i];
            std::vector<int> inputs(s.ids.begin(), s.ids.end() - 1);
            std::vector<int> targets(s.ids.begin() + 1, s.ids.end());
            auto logits = forward_logits(inputs, true, &drop_rng);
            auto loss = tc::softmax_cross_entropy_rows(logits, targets, true);
            tc::zero_grads(params_);
            tc::backward(loss);
            adam_.step(params_, config_.lr);
            epoch_loss += loss->val[0];
        }
        report.train_loss.push_back(epoch_loss / static_cast<double>(train_seqs.size()));
        report.test_loss.push_back(eval_loss(test_seqs));
        report.stopped_after_epoch = epoch + 1;
        if (epoch > 0 && report.test_loss[epoch] > report.test_loss[epoch - 1]) break;
    }
    return report;
}

std::string Generator::render(const TokenSeq& seq) const {
    auto words = seq.decode(vocab_);
    std::string out = "0";
    for (const auto& w : words) {
        out += ',';
        out += w;
    }
    return out;
}

}  // namespace advlog
