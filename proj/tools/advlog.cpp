// Command-line driver for the log-anomaly adversarial test harness.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "advlog/attack.hpp"
#include "advlog/checkpoint.hpp"
#include "advlog/harness.hpp"
#include "advlog/oracle.hpp"

namespace fs = std::filesystem;
using namespace advlog;

namespace {

struct Endpoint {
    bool inproc = true;
    std::string host;
    uint16_t port = 0;
};

Endpoint parse_oracle(const std::string& spec) {
    Endpoint ep;
    if (spec == "inproc") return ep;
    size_t colon = spec.rfind(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("--oracle", "expected 'inproc' or host:port");
    ep.inproc = false;
    ep.host = spec.substr(0, colon);
    ep.port = static_cast<uint16_t>(std::stoi(spec.substr(colon + 1)));
    return ep;
}

int run(int argc, char** argv) {
    CLI::App app{"Adversarial robustness test harness for log anomaly detectors"};
    app.require_subcommand(1);

    uint64_t seed = 1;
    app.add_option("--seed", seed, "Global seed")->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic auth-log corpus");
    size_t synth_n = 10000;
    std::string synth_out = "corpus.txt", synth_labels, synth_spec_file;
    double synth_anom = 0.0;
    synth->add_option("--n", synth_n, "Line count")->capture_default_str();
    synth->add_option("--out", synth_out, "Output corpus file")->capture_default_str();
    synth->add_option("--labels-out", synth_labels, "Red-team label file (written when set)");
    synth->add_option("--anomaly-fraction", synth_anom, "Injected anomaly fraction")
        ->capture_default_str();
    double synth_noise = 0.0;
    synth->add_option("--benign-noise", synth_noise, "Off-profile destination rate in normal lines")
        ->capture_default_str();
    synth->add_option("--spec", synth_spec_file, "key=value synthetic-spec file");

    // shuffle
    auto* shuffle = app.add_subcommand("shuffle", "Build pretrain data by column shuffling");
    std::string shuf_in, shuf_out = "pretrain.txt";
    double shuf_fraction = 1.0;
    shuffle->add_option("--in", shuf_in, "Input corpus")->required();
    shuffle->add_option("--out", shuf_out, "Output corpus")->capture_default_str();
    shuffle->add_option("--fraction", shuf_fraction, "Subsample fraction before shuffling")
        ->capture_default_str();

    // train-detector
    auto* traind = app.add_subcommand("train-detector", "Train the transformer detector");
    std::string td_corpus, td_out = "detector.ckpt";
    DetectorConfig td_cfg = DetectorConfig::desk();
    size_t td_min_count = 40;
    traind->add_option("--corpus", td_corpus, "Training corpus")->required();
    traind->add_option("--out", td_out, "Checkpoint path")->capture_default_str();
    traind->add_option("--dropout", td_cfg.dropout_p, "Dropout probability")->capture_default_str();
    traind->add_option("--heads", td_cfg.heads)->capture_default_str();
    traind->add_option("--layers", td_cfg.layers)->capture_default_str();
    traind->add_option("--model-dim", td_cfg.model_dim)->capture_default_str();
    traind->add_option("--epochs", td_cfg.epochs)->capture_default_str();
    traind->add_option("--lr", td_cfg.lr)->capture_default_str();
    traind->add_option("--batch-size", td_cfg.batch_size)->capture_default_str();
    traind->add_option("--min-count", td_min_count, "Vocab min count")->capture_default_str();

    // benchmark-detector
    auto* bench = app.add_subcommand("benchmark-detector", "Held-out loss and red-team AUC");
    std::string bd_ckpt, bd_corpus, bd_redteam;
    bench->add_option("--checkpoint", bd_ckpt)->required();
    bench->add_option("--corpus", bd_corpus, "Held-out corpus")->required();
    bench->add_option("--redteam", bd_redteam, "Red-team label file");

    // pretrain-generator
    auto* preg = app.add_subcommand("pretrain-generator", "Pretrain the LSTM generator");
    std::string pg_corpus, pg_out = "generator.ckpt";
    GeneratorConfig pg_cfg = GeneratorConfig::desk();
    size_t pg_min_count = 1;
    preg->add_option("--corpus", pg_corpus, "Pretrain corpus")->required();
    preg->add_option("--out", pg_out)->capture_default_str();
    preg->add_option("--embed-dim", pg_cfg.embed_dim)->capture_default_str();
    preg->add_option("--hidden-dim", pg_cfg.hidden_dim)->capture_default_str();
    preg->add_option("--dropout", pg_cfg.dropout_p)->capture_default_str();
    preg->add_option("--max-epochs", pg_cfg.max_epochs)->capture_default_str();
    preg->add_option("--lr", pg_cfg.lr)->capture_default_str();
    preg->add_option("--min-count", pg_min_count, "Generator vocab min count")
        ->capture_default_str();

    // attack
    auto* attack = app.add_subcommand("attack", "Run the adversarial attack loop");
    std::string at_gen, at_det, at_oracle = "inproc", at_out_dir = "attack_out";
    AttackConfig at_cfg;
    attack->add_option("--generator", at_gen, "Pretrained generator checkpoint")->required();
    attack->add_option("--detector", at_det, "Detector checkpoint (inproc oracle)");
    attack->add_option("--oracle", at_oracle, "inproc | host:port")->capture_default_str();
    attack->add_option("--out-dir", at_out_dir)->capture_default_str();
    attack->add_option("--steps", at_cfg.steps)->capture_default_str();
    attack->add_option("--rollouts", at_cfg.rollouts)->capture_default_str();
    attack->add_option("--lr", at_cfg.lr)->capture_default_str();
    attack->add_option("--eps", at_cfg.eps)->capture_default_str();
    attack->add_option("--baseline-window", at_cfg.baseline_window)->capture_default_str();
    attack->add_option("--baseline-init", at_cfg.baseline_init)->capture_default_str();
    attack->add_option("--eval-every", at_cfg.eval_every)->capture_default_str();
    attack->add_option("--eval-count", at_cfg.eval_count)->capture_default_str();
    attack->add_flag("--adam", at_cfg.use_adam, "Use Adam instead of plain SGD for policy updates");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a generator against a detector");
    std::string ev_gen, ev_det, ev_real;
    size_t ev_count = 2000;
    bool ev_auc = false, ev_dup = false, ev_unique = false;
    eval->add_option("--generator", ev_gen)->required();
    eval->add_option("--detector", ev_det)->required();
    eval->add_option("--real", ev_real, "Real-line corpus for AUC");
    eval->add_option("--count", ev_count)->capture_default_str();
    eval->add_flag("--auc", ev_auc, "Real-vs-fake AUC (needs --real)");
    eval->add_flag("--duplicates", ev_dup, "Duplicate percentage of generated set");
    eval->add_flag("--unique", ev_unique, "Recompute AUC on a unique-forced set");

    // serve
    auto* serve = app.add_subcommand("serve", "Expose a detector as a TCP score oracle");
    std::string sv_det, sv_bind = "127.0.0.1:7777";
    serve->add_option("--detector", sv_det)->required();
    serve->add_option("--bind", sv_bind, "host:port")->capture_default_str();

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run the dropout-sweep experiment");
    std::string sw_plan;
    sweep->add_option("--plan", sw_plan, "key=value plan file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (synth->parsed()) {
        SynthSpec spec;
        if (!synth_spec_file.empty()) spec = SynthSpec::from_file(synth_spec_file);
        if (synth->count("--anomaly-fraction")) spec.anomaly_fraction = synth_anom;
        if (synth->count("--benign-noise")) spec.benign_noise = synth_noise;
        auto corpus = synth_corpus(spec, synth_n, seed);
        save_corpus(corpus, synth_out);
        if (!synth_labels.empty()) save_redteam_labels(corpus, synth_labels);
        std::cout << "wrote " << corpus.size() << " lines to " << synth_out << "\n";
    } else if (shuffle->parsed()) {
        auto corpus = load_corpus(shuf_in);
        if (shuf_fraction < 1.0) corpus = sample_fraction(corpus, shuf_fraction, seed);
        save_corpus(shuffle_columns(corpus, seed ^ 0x5AFEULL), shuf_out);
        std::cout << "wrote " << corpus.size() << " shuffled lines to " << shuf_out << "\n";
    } else if (traind->parsed()) {
        auto corpus = load_corpus(td_corpus);
        auto vocab = build_vocab(corpus, td_min_count);
        Detector model(td_cfg, vocab, seed);
        auto report = model.train(corpus, seed ^ 0x7141ULL);
        for (size_t e = 0; e < report.epoch_mean_loss.size(); ++e)
            std::cout << "epoch " << e + 1 << " mean loss " << report.epoch_mean_loss[e] << "\n";
        save_detector(model, td_out);
        std::cout << "saved " << td_out << "\n";
    } else if (bench->parsed()) {
        auto model = load_detector(bd_ckpt);
        auto corpus = load_corpus(bd_corpus);
        std::cout << "heldout_loss " << model->mean_loss(corpus) << "\n";
        if (!bd_redteam.empty()) {
            apply_redteam_labels(corpus, bd_redteam);
            std::cout << "redteam_auc " << red_team_auc(*model, corpus) << "\n";
        }
    } else if (preg->parsed()) {
        auto corpus = load_corpus(pg_corpus);
        auto vocab = build_vocab(corpus, pg_min_count);
        Generator model(pg_cfg, vocab, seed);
        auto report = model.pretrain(corpus, seed ^ 0x93ULL);
        for (size_t e = 0; e < report.train_loss.size(); ++e)
            std::cout << "epoch " << e + 1 << " train " << report.train_loss[e] << " test "
                      << report.test_loss[e] << "\n";
        std::cout << "stopped after epoch " << report.stopped_after_epoch << "\n";
        save_generator(model, pg_out);
        std::cout << "saved " << pg_out << "\n";
    } else if (attack->parsed()) {
        at_cfg.seed = seed;
        fs::create_directories(at_out_dir);
        auto gen = load_generator(at_gen);
        std::unique_ptr<Detector> det;
        std::unique_ptr<ScoreOracle> oracle;
        Endpoint ep = parse_oracle(at_oracle);
        if (ep.inproc) {
            if (at_det.empty())
                throw std::runtime_error("--detector is required with the inproc oracle");
            det = load_detector(at_det);
            oracle = std::make_unique<DetectorOracle>(*det, gen->config().max_len);
        } else {
            oracle = std::make_unique<RemoteOracle>(ep.host, ep.port);
        }
        std::vector<EvalPoint> points;
        AttackHooks hooks;
        hooks.on_eval = [&](const EvalPoint& p) {
            save_generator(*gen, (fs::path(at_out_dir) / ("generator_step" +
                                                          std::to_string(p.step) + ".ckpt"))
                                     .string());
            std::cout << "step " << p.step << " mean_anomaly " << p.mean_anomaly
                      << " duplicate_pct " << p.duplicate_pct << "\n";
        };
        hooks.on_abort = [&](size_t step) {
            save_generator(*gen, (fs::path(at_out_dir) / "generator_resume.ckpt").string());
            std::cerr << "oracle failure at step " << step
                      << "; wrote generator_resume.ckpt\n";
        };
        auto report = run_attack(*gen, *oracle, at_cfg, hooks);
        write_eval_csv(report.points, (fs::path(at_out_dir) / "attack_report.csv").string());
        save_generator(*gen, (fs::path(at_out_dir) / "generator_final.ckpt").string());
        std::cout << "attack finished after " << report.steps_completed << " steps\n";
    } else if (eval->parsed()) {
        auto gen = load_generator(ev_gen);
        auto det = load_detector(ev_det);
        DetectorOracle oracle(*det, gen->config().max_len);
        Rng rng(seed);
        auto ma = mean_anomaly(*gen, oracle, ev_count, rng);
        std::cout << "mean_anomaly " << ma.mean << "\n";
        if (ev_dup) std::cout << "duplicate_pct " << duplicate_pct(ma.lines) << "\n";
        if (ev_auc || ev_unique) {
            if (ev_real.empty()) throw std::runtime_error("--auc/--unique need --real");
            std::vector<std::string> real_lines;
            for (const auto& l : load_corpus(ev_real).lines) real_lines.push_back(l.to_text());
            if (ev_auc)
                std::cout << "real_vs_fake_auc " << real_vs_fake_auc(oracle, real_lines, ma.lines)
                          << "\n";
            if (ev_unique) {
                auto uq = generate_unique(*gen, ev_count, 50 * ev_count, rng);
                std::cout << "real_vs_fake_auc_unique "
                          << real_vs_fake_auc(oracle, real_lines, uq.lines) << "\n";
            }
        }
    } else if (serve->parsed()) {
        auto det = load_detector(sv_det);
        Endpoint ep = parse_oracle(sv_bind);
        OracleServer server(*det, ep.host, ep.port);
        std::cout << "serving on " << ep.host << ":" << server.port() << "\n" << std::flush;
        // Runs until killed.
        while (true) std::this_thread::sleep_for(std::chrono::seconds(3600));
    } else if (sweep->parsed()) {
        auto plan = ExperimentPlan::from_file(sw_plan);
        plan.seed = seed;
        auto summary = run_sweep(plan);
        for (const auto& r : summary.rows) {
            if (r.failed)
                std::cout << "dropout " << r.dropout << " failed: " << r.error << "\n";
            else
                std::cout << "dropout " << r.dropout << " redteam_auc " << r.redteam_auc
                          << " final_auc " << r.final_auc << " final_auc_unique "
                          << r.final_auc_unique << " duplicates " << r.duplicate_pct_final << "\n";
        }
        std::cout << "summary written to " << plan.out_dir << "/summary.csv\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::ios_base::failure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::cerr << "error: " << msg << "\n";
        return msg.find("cannot open") != std::string::npos ? 2 : 1;
    }
}
