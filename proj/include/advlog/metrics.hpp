#pragma once

// Evaluation statistics: rank-based AUC, duplicate percentage, mean anomaly
// over fresh samples, and unique-set generation.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "advlog/rng.hpp"

namespace advlog {

class Generator;
class ScoreOracle;

struct CapExceededError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EvalPoint {
    size_t step = 0;
    double mean_anomaly = 0.0;
    double duplicate_pct = 0.0;
    std::optional<double> auc;
    double wall_time_s = 0.0;
};

// P(pos > neg) + 0.5 * P(pos = neg), computed via rank statistics.
double auc(const std::vector<double>& positive_scores, const std::vector<double>& negative_scores);

// 100 * (n - distinct) / n over exact text equality.
double duplicate_pct(const std::vector<std::string>& lines);

struct MeanAnomalyResult {
    double mean = 0.0;
    std::vector<std::string> lines;
    std::vector<double> scores;
};
MeanAnomalyResult mean_anomaly(Generator& generator, ScoreOracle& oracle, size_t count, Rng& rng);

struct UniqueResult {
    std::vector<std::string> lines;
    size_t attempts = 0;
};
UniqueResult generate_unique(Generator& generator, size_t n, size_t attempt_cap, Rng& rng);

double real_vs_fake_auc(ScoreOracle& oracle, const std::vector<std::string>& real_lines,
                        const std::vector<std::string>& fake_lines);

}  // namespace advlog
