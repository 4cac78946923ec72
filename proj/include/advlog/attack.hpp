#pragma once

// REINFORCE-with-rolling-baseline loop that trains the generator to draw
// low anomaly scores from a black-box oracle.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "advlog/generator.hpp"
#include "advlog/metrics.hpp"
#include "advlog/oracle.hpp"

namespace advlog {

struct AttackConfig {
    size_t steps = 3000;
    size_t rollouts = 8;
    double lr = 1e-5;
    double eps = 1e-7;
    size_t baseline_window = 100;
    size_t baseline_init = 100;
    size_t eval_every = 250;
    size_t eval_count = 2000;
    bool use_adam = false;  // plain SGD by default; Adam behind this switch
    uint64_t seed = 1;

    void check() const {
        if (rollouts == 0 || baseline_window == 0 || baseline_init == 0 || eval_every == 0 ||
            eval_count == 0)
            throw std::invalid_argument("AttackConfig: counts must be >= 1");
        if (lr <= 0.0 || eps <= 0.0)
            throw std::invalid_argument("AttackConfig: lr and eps must be > 0");
    }

    static AttackConfig full_scale() {
        AttackConfig c;
        c.steps = 100000;
        c.rollouts = 50;
        c.baseline_window = 500;
        c.baseline_init = 500;
        c.eval_every = 2500;
        c.eval_count = 20000;
        return c;
    }
};

// Rolling mean over the last `capacity` fresh-sequence scores. The running
// sum is recomputed periodically to bound floating-point drift.
class BaselineWindow {
public:
    explicit BaselineWindow(size_t capacity);

    double push(double score);  // returns the new mean
    double mean() const;
    size_t size() const { return count_; }
    const std::vector<double>& contents() const { return buf_; }

private:
    void recompute();

    size_t capacity_;
    std::vector<double> buf_;  // ring, ordered oldest-first up to count_
    size_t head_ = 0;
    size_t count_ = 0;
    double sum_ = 0.0;
    size_t pushes_since_recompute_ = 0;
};

// Per-position rollout scores for one sampled sequence; q.back() is the
// oracle score of the sequence itself.
struct QValues {
    std::vector<double> q;
};

BaselineWindow init_baseline(Generator& generator, ScoreOracle& oracle, size_t count, Rng& rng);
QValues q_values(Generator& generator, ScoreOracle& oracle, const TokenSeq& x, size_t r, Rng& rng);

// One policy-gradient update: loss = sum_t (Q_t - qbar) * log(G(x_t|prefix) + eps),
// plain gradient step of size alpha (optimizer == nullptr) or Adam.
void policy_step(Generator& generator, const TokenSeq& x, const QValues& q, double qbar,
                 double alpha, double eps, Rng& drop_rng, tc::Adam* optimizer = nullptr);

double update_baseline(BaselineWindow& window, double new_score);

struct AttackReport {
    std::vector<EvalPoint> points;
    size_t steps_completed = 0;
    bool aborted = false;
};

struct AttackHooks {
    // Called at step 0 and every eval_every steps with fresh-sample stats.
    std::function<void(const EvalPoint&)> on_eval;
    // Called when an oracle failure aborts the run, before the error is
    // rethrown; gives the harness a chance to checkpoint for resume.
    std::function<void(size_t step)> on_abort;
};

AttackReport run_attack(Generator& generator, ScoreOracle& oracle, const AttackConfig& config,
                        const AttackHooks& hooks = {});

}  // namespace advlog
