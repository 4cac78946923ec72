#include "advlog/metrics.hpp"

#include <algorithm>
#include <unordered_set>

#include "advlog/generator.hpp"
#include "advlog/oracle.hpp"

namespace advlog {

double auc(const std::vector<double>& positive_scores, const std::vector<double>& negative_scores) {
    if (positive_scores.empty() || negative_scores.empty())
        throw std::invalid_argument("auc: both classes must be non-empty");

    // Mann-Whitney via midranks: AUC = (R_pos - n_pos(n_pos+1)/2) / (n_pos * n_neg).
    struct Entry {
        double score;
        bool positive;
    };
    std::vector<Entry> all;
    all.reserve(positive_scores.size() + negative_scores.size());
    for (double s : positive_scores) all.push_back({s, true});
    for (double s : negative_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < all.size()) {
        size_t j = i;
        while (j < all.size() && all[j].score == all[i].score) ++j;
        double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (size_t k = i; k < j; ++k)
            if (all[k].positive) rank_sum_pos += midrank;
        i = j;
    }
    double np = static_cast<double>(positive_scores.size());
    double nn = static_cast<double>(negative_scores.size());
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double duplicate_pct(const std::vector<std::string>& lines) {
    if (lines.empty()) throw std::invalid_argument("duplicate_pct: empty list");
    std::unordered_set<std::string> distinct(lines.begin(), lines.end());
    double n = static_cast<double>(lines.size());
    return 100.0 * (n - static_cast<double>(distinct.size())) / n;
}

MeanAnomalyResult mean_anomaly(Generator& generator, ScoreOracle& oracle, size_t count, Rng& rng) {
    if (count == 0) throw std::invalid_argument("mean_anomaly: count must be >= 1");
    MeanAnomalyResult result;
    result.lines.reserve(count);
    for (size_t i = 0; i < count; ++i)
        result.lines.push_back(generator.render(generator.sample_complete(TokenSeq{}, rng)));
    result.scores = oracle.score_batch(result.lines);
    double total = 0.0;
    for (double s : result.scores) total += s;
    result.mean = total / static_cast<double>(count);
    return result;
}

UniqueResult generate_unique(Generator& generator, size_t n, size_t attempt_cap, Rng& rng) {
    if (n == 0) throw std::invalid_argument("generate_unique: n must be >= 1");
    if (attempt_cap < n) throw std::invalid_argument("generate_unique: attempt_cap < n");
    UniqueResult result;
    std::unordered_set<std::string> seen;
    while (seen.size() < n) {
        if (result.attempts >= attempt_cap)
            throw CapExceededError("generate_unique: attempt cap " + std::to_string(attempt_cap) +
                                   " reached with " + std::to_string(seen.size()) + " unique lines");
        ++result.attempts;
        auto text = generator.render(generator.sample_complete(TokenSeq{}, rng));
        if (seen.insert(text).second) result.lines.push_back(std::move(text));
    }
    return result;
}

double real_vs_fake_auc(ScoreOracle& oracle, const std::vector<std::string>& real_lines,
                        const std::vector<std::string>& fake_lines) {
    if (real_lines.empty() || fake_lines.empty())
        throw std::invalid_argument("real_vs_fake_auc: both classes must be non-empty");
    auto real_scores = oracle.score_batch(real_lines);
    auto fake_scores = oracle.score_batch(fake_lines);
    return auc(fake_scores, real_scores);
}

}  // namespace advlog
