#pragma once

// Experiment driver: the dropout-sweep pipeline and CSV report emission.

#include <string>
#include <vector>

#include "advlog/attack.hpp"
#include "advlog/detector.hpp"
#include "advlog/generator.hpp"
#include "advlog/metrics.hpp"

namespace advlog {

struct ExperimentPlan {
    std::vector<double> dropout_levels = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9};
    std::string out_dir = "sweep_out";
    uint64_t seed = 1;

    // Corpora (synthetic stand-ins for train / held-out / pretrain-source days).
    SynthSpec synth;
    size_t train_lines = 50000;
    size_t heldout_lines = 10000;
    size_t pretrain_source_lines = 40000;
    double pretrain_fraction = 0.005;

    DetectorConfig detector = DetectorConfig::desk();
    GeneratorConfig generator = GeneratorConfig::desk();
    AttackConfig attack;

    size_t final_eval_count = 2000;  // real-vs-fake AUC sample size per side

    static ExperimentPlan from_file(const std::string& path);
    void check() const;
};

struct SweepRow {
    double dropout = 0.0;
    double heldout_loss = 0.0;
    double redteam_auc = 0.0;
    double final_auc = 0.0;
    double final_auc_unique = 0.0;
    double duplicate_pct_final = 0.0;
    bool failed = false;
    std::string error;
};

struct SweepSummary {
    std::vector<SweepRow> rows;
};

SweepSummary run_sweep(const ExperimentPlan& plan);

void write_eval_csv(const std::vector<EvalPoint>& points, const std::string& path);
void write_sweep_csv(const SweepSummary& summary, const std::string& path);

}  // namespace advlog
