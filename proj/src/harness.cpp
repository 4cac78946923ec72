#include "advlog/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "advlog/checkpoint.hpp"
#include "advlog/oracle.hpp"

namespace advlog {

namespace fs = std::filesystem;

namespace {

std::map<std::string, std::string> parse_kv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

template <typename T>
void read_kv(const std::map<std::string, std::string>& kv, const std::string& key, T& out) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    std::istringstream is(it->second);
    is >> out;
    if (is.fail()) throw std::runtime_error("bad value for " + key);
}

}  // namespace

ExperimentPlan ExperimentPlan::from_file(const std::string& path) {
    auto kv = parse_kv(path);
    ExperimentPlan p;
    auto it = kv.find("levels");
    if (it != kv.end()) {
        p.dropout_levels.clear();
        std::istringstream is(it->second);
        std::string tok;
        while (std::getline(is, tok, ',')) p.dropout_levels.push_back(std::stod(tok));
    }
    read_kv(kv, "out_dir", p.out_dir);
    read_kv(kv, "seed", p.seed);
    read_kv(kv, "train_lines", p.train_lines);
    read_kv(kv, "heldout_lines", p.heldout_lines);
    read_kv(kv, "pretrain_source_lines", p.pretrain_source_lines);
    read_kv(kv, "pretrain_fraction", p.pretrain_fraction);
    read_kv(kv, "final_eval_count", p.final_eval_count);
    read_kv(kv, "synth.n_users", p.synth.n_users);
    read_kv(kv, "synth.n_computers", p.synth.n_computers);
    read_kv(kv, "synth.anomaly_fraction", p.synth.anomaly_fraction);
    read_kv(kv, "synth.profile_seed", p.synth.profile_seed);
    read_kv(kv, "detector.heads", p.detector.heads);
    read_kv(kv, "detector.layers", p.detector.layers);
    read_kv(kv, "detector.model_dim", p.detector.model_dim);
    read_kv(kv, "detector.ff_dim", p.detector.ff_dim);
    read_kv(kv, "detector.lr", p.detector.lr);
    read_kv(kv, "detector.epochs", p.detector.epochs);
    read_kv(kv, "detector.batch_size", p.detector.batch_size);
    read_kv(kv, "generator.embed_dim", p.generator.embed_dim);
    read_kv(kv, "generator.hidden_dim", p.generator.hidden_dim);
    read_kv(kv, "generator.dropout_p", p.generator.dropout_p);
    read_kv(kv, "generator.max_len", p.generator.max_len);
    read_kv(kv, "generator.lr", p.generator.lr);
    read_kv(kv, "generator.max_epochs", p.generator.max_epochs);
    read_kv(kv, "attack.steps", p.attack.steps);
    read_kv(kv, "attack.rollouts", p.attack.rollouts);
    read_kv(kv, "attack.lr", p.attack.lr);
    read_kv(kv, "attack.eps", p.attack.eps);
    read_kv(kv, "attack.baseline_window", p.attack.baseline_window);
    read_kv(kv, "attack.baseline_init", p.attack.baseline_init);
    read_kv(kv, "attack.eval_every", p.attack.eval_every);
    read_kv(kv, "attack.eval_count", p.attack.eval_count);
    read_kv(kv, "attack.use_adam", p.attack.use_adam);
    p.check();
    return p;
}

void ExperimentPlan::check() const {
    if (dropout_levels.empty()) throw std::invalid_argument("ExperimentPlan: no dropout levels");
    std::vector<double> sorted = dropout_levels;
    std::sort(sorted.begin(), sorted.end());
    for (size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] < 0.0 || sorted[i] >= 1.0)
            throw std::invalid_argument("ExperimentPlan: dropout level outside [0,1)");
        if (i > 0 && sorted[i] == sorted[i - 1])
            throw std::invalid_argument("ExperimentPlan: duplicate dropout level");
    }
    synth.check();
}

void write_eval_csv(const std::vector<EvalPoint>& points, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "step,mean_anomaly,duplicate_pct,wall_time\n";
    out.precision(9);
    for (const auto& p : points)
        out << p.step << ',' << p.mean_anomaly << ',' << p.duplicate_pct << ',' << p.wall_time_s
            << '\n';
}

void write_sweep_csv(const SweepSummary& summary, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "dropout,heldout_loss,redteam_auc,final_auc,final_auc_unique,duplicate_pct_final\n";
    out.precision(9);
    for (const auto& r : summary.rows) {
        if (r.failed) {
            out << r.dropout << ",error: " << r.error << ",,,,\n";
            continue;
        }
        out << r.dropout << ',' << r.heldout_loss << ',' << r.redteam_auc << ',' << r.final_auc
            << ',' << r.final_auc_unique << ',' << r.duplicate_pct_final << '\n';
    }
}

SweepSummary run_sweep(const ExperimentPlan& plan) {
    plan.check();
    fs::create_directories(plan.out_dir);

    // Shared corpora: train / held-out days for the detector, a distant day
    // subsampled and column-shuffled for the generator pretrain data.
    auto train = synth_corpus(plan.synth, plan.train_lines, plan.seed);
    auto heldout = synth_corpus(plan.synth, plan.heldout_lines, plan.seed + 1);
    SynthSpec benign = plan.synth;
    benign.anomaly_fraction = 0.0;
    auto pretrain_source = synth_corpus(benign, plan.pretrain_source_lines, plan.seed + 2);
    auto pretrain =
        shuffle_columns(sample_fraction(pretrain_source, plan.pretrain_fraction, plan.seed + 3),
                        plan.seed + 4);

    // Detector training data is benign-only (unsupervised baseline of normal
    // behavior); held-out day keeps its injected anomalies for the AUC.
    Corpus train_benign;
    for (size_t i = 0; i < train.lines.size(); ++i)
        if (!(*train.labels)[i]) train_benign.lines.push_back(train.lines[i]);

    // One shared pretrained generator; every level attacks a fresh copy.
    auto pretrain_vocab = build_vocab(pretrain, 1);
    Generator shared_gen(plan.generator, pretrain_vocab, plan.seed + 5);
    shared_gen.pretrain(pretrain, plan.seed + 6);
    std::string gen_ckpt = (fs::path(plan.out_dir) / "generator_pretrained.ckpt").string();
    save_generator(shared_gen, gen_ckpt);

    std::vector<std::string> real_lines;
    {
        Rng pick(plan.seed + 7);
        auto sampled = sample_fraction(
            heldout,
            std::min(1.0, static_cast<double>(plan.final_eval_count) /
                              static_cast<double>(heldout.lines.size())),
            pick.raw());
        for (const auto& l : sampled.lines) real_lines.push_back(l.to_text());
    }

    SweepSummary summary;
    auto det_vocab = build_vocab(train_benign, 40);
    for (double level : plan.dropout_levels) {
        SweepRow row;
        row.dropout = level;
        std::string level_dir =
            (fs::path(plan.out_dir) / ("dropout_" + std::to_string(static_cast<int>(level * 100))))
                .string();
        try {
            fs::create_directories(level_dir);
            DetectorConfig dc = plan.detector;
            dc.dropout_p = level;
            Detector detector(dc, det_vocab, plan.seed + 10);
            detector.train(train_benign, plan.seed + 11);
            save_detector(detector, (fs::path(level_dir) / "detector.ckpt").string());

            row.heldout_loss = detector.mean_loss(heldout);
            row.redteam_auc = red_team_auc(detector, heldout);

            DetectorOracle oracle(detector, plan.generator.max_len);
            auto gen = load_generator(gen_ckpt);

            AttackConfig ac = plan.attack;
            ac.seed = plan.seed + 12;
            AttackHooks hooks;
            std::vector<EvalPoint> points;
            hooks.on_eval = [&](const EvalPoint& p) { points.push_back(p); };
            run_attack(*gen, oracle, ac, hooks);
            write_eval_csv(points, (fs::path(level_dir) / "attack_curve.csv").string());
            save_generator(*gen, (fs::path(level_dir) / "generator_attacked.ckpt").string());

            Rng eval_rng(plan.seed + 13);
            std::vector<std::string> fake_lines;
            for (size_t i = 0; i < plan.final_eval_count; ++i)
                fake_lines.push_back(gen->render(gen->sample_complete(TokenSeq{}, eval_rng)));
            row.duplicate_pct_final = duplicate_pct(fake_lines);
            row.final_auc = real_vs_fake_auc(oracle, real_lines, fake_lines);

            auto unique = generate_unique(*gen, plan.final_eval_count,
                                          50 * plan.final_eval_count, eval_rng);
            row.final_auc_unique = real_vs_fake_auc(oracle, real_lines, unique.lines);
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        summary.rows.push_back(row);
    }
    write_sweep_csv(summary, (fs::path(plan.out_dir) / "summary.csv").string());
    return summary;
}

}  // namespace advlog
