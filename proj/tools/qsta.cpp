// Command-line driver for the voltage-stability toolkit. Subcommands cover
// the full pipeline: synthetic data generation, semi-supervised labeling, GAN
// augmentation, training, attack/defense evaluation, experiment sweeps, the
// ablation ladder, and report consolidation.
//
// Every run resolves one experiment config (file + env + dotted-key
// overrides + --seed) and writes the fully-resolved snapshot to the output
// directory before doing any work. Exit codes: 0 success, 1 usage/config
// error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qsta/attacks.hpp"
#include "qsta/checkpoint.hpp"
#include "qsta/config.hpp"
#include "qsta/report.hpp"
#include "qsta/sweeps.hpp"
#include "qsta/validate.hpp"

namespace fs = std::filesystem;
using namespace qsta;

namespace {

struct CliArgs {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    int verbose = 0;
};

// trajectories.jsonl -> trajectories_labeled.jsonl etc.
std::string with_suffix(const std::string& path, const std::string& suffix) {
    fs::path p(path);
    return (p.parent_path() / (p.stem().string() + suffix + p.extension().string())).string();
}

std::string out_path(const cfg::ExperimentConfig& ec, const std::string& name) {
    return (fs::path(ec.output_dir) / (ec.experiment_id + "_" + name)).string();
}

cfg::ExperimentConfig resolve_config(const CliArgs& cli) {
    std::vector<std::string> sets;
    if (const char* env = std::getenv("QSTA_OUT"))
        sets.push_back(std::string("output_dir=") + env);  // env below explicit --set
    sets.insert(sets.end(), cli.sets.begin(), cli.sets.end());
    cfg::ExperimentConfig ec = cfg::load_experiment(cli.config, sets);
    if (cli.seed) ec.seed = *cli.seed;
    return ec;
}

// The one effective-config snapshot every subcommand writes before working.
void snapshot_config(const cfg::ExperimentConfig& ec, const std::string& stage) {
    fs::create_directories(ec.output_dir);
    const std::string path = out_path(ec, stage + "_config.json");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw report::ReportError("cannot write config snapshot: " + path);
    os << cfg::to_json(ec).dump(2) << "\n";
    std::cout << "[" << stage << "] config hash " << cfg::config_hash(ec) << ", snapshot "
              << path << "\n";
}

void save_dataset(const std::vector<data::Trajectory>& ts, const std::string& path) {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    data::save_trajectories(ts, path);
}

// Labeled trajectories for the model stages: the labeling stage's output when
// present, else the raw datagen file (certified labels only).
std::vector<data::Trajectory> load_labeled(const cfg::ExperimentConfig& ec, bool verbose) {
    const std::string labeled = with_suffix(ec.dataset.path, "_labeled");
    const std::string& path = fs::exists(labeled) ? labeled : ec.dataset.path;
    if (verbose) std::cout << "  reading " << path << "\n";
    return data::load_trajectories(path);
}

// Train/test windows shared by train, defend, and attack: real windows are
// split by the master seed; synthetic windows (if the augment stage ran) join
// the training side only.
struct StageData {
    data::WindowSet train;
    data::WindowSet test;
};

StageData load_stage_data(const cfg::ExperimentConfig& ec, bool verbose) {
    auto ts = load_labeled(ec, verbose);
    auto [tr, te] = harness::windowed_split(ts, ec.datagen.fault_onset, ec.model.seq_len,
                                            ec.dataset.test_frac, ec.seed);
    const std::string synth = with_suffix(ec.dataset.path, "_synthetic");
    if (fs::exists(synth)) {
        auto sts = data::load_trajectories(synth);
        data::WindowSet sw = data::make_windows(sts, 0, ec.model.seq_len);
        for (std::size_t i = 0; i < sw.size(); ++i) tr.push(sw.x[i], sw.y[i], sw.ids[i]);
        if (verbose) std::cout << "  merged " << sw.size() << " synthetic windows into train\n";
    }
    return {std::move(tr), std::move(te)};
}

model::Model load_current_model(const cfg::ExperimentConfig& ec, bool verbose) {
    const std::string defended = out_path(ec, "defended.ckpt");
    const std::string base = out_path(ec, "model.ckpt");
    const std::string& path = fs::exists(defended) ? defended : base;
    if (!fs::exists(path))
        throw std::runtime_error("no checkpoint at " + base + " (run the train stage first)");
    if (verbose) std::cout << "  loading " << path << "\n";
    return model::load_checkpoint(path);
}

report::Table metrics_table(const std::string& name, const metrics::Metrics& m) {
    report::Table t;
    t.name = name;
    t.header = {"metric", "value"};
    t.rows = {{"accuracy", report::cell(m.accuracy)},
              {"f1", report::cell(m.f1)},
              {"auc", m.auc ? report::cell(*m.auc) : ""},
              {"tp", report::cell(m.tp)},
              {"fp", report::cell(m.fp)},
              {"tn", report::cell(m.tn)},
              {"fn", report::cell(m.fn)}};
    return t;
}

void emit(const cfg::ExperimentConfig& ec, const std::string& stage,
          std::vector<report::Table> tables, std::vector<std::string> artifacts = {}) {
    report::Report rep;
    rep.experiment_id = ec.experiment_id + "_" + stage;
    rep.config_hash = cfg::config_hash(ec);
    rep.tables = std::move(tables);
    rep.artifacts = std::move(artifacts);
    for (const auto& p : report::emit_report(rep, ec.output_dir))
        std::cout << "  wrote " << p << "\n";
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_datagen(const cfg::ExperimentConfig& ec, int) {
    auto ts = data::simulate_trajectories(ec.datagen, ec.dataset.n_per_cell, ec.seed);
    data::heuristic_label_all(ts, ec.datagen.tail_window);
    std::size_t labeled = 0;
    for (const auto& t : ts) labeled += t.label != data::kUnlabeled;
    save_dataset(ts, ec.dataset.path);
    std::cout << "[datagen] " << ts.size() << " trajectories (" << labeled
              << " heuristically certified) -> " << ec.dataset.path << "\n";
}

void cmd_label(const cfg::ExperimentConfig& ec, int verbose) {
    auto ts = data::load_trajectories(ec.dataset.path);
    data::heuristic_label_all(ts, ec.datagen.tail_window);
    cluster::SfcmResult r = cluster::sfcm_label_trajectories(ts, ec.datagen.tail_window, ec.sfcm);
    std::size_t stable = 0, unstable = 0;
    for (const auto& t : ts) (t.label == data::kStable ? stable : unstable) += 1;
    const std::string out = with_suffix(ec.dataset.path, "_labeled");
    save_dataset(ts, out);
    if (verbose)
        std::cout << "  clustering: " << r.iterations << " iterations, objective "
                  << (r.objective.empty() ? 0.0 : r.objective.back()) << (r.converged ? " (converged)" : "") << "\n";
    report::Table t;
    t.name = "labeling";
    t.header = {"stable", "unstable", "iterations", "converged", "objective"};
    t.rows = {{std::to_string(stable), std::to_string(unstable), std::to_string(r.iterations),
               r.converged ? "true" : "false", report::cell(r.objective.empty() ? 0.0 : r.objective.back())}};
    emit(ec, "label", {t}, {out});
    std::cout << "[label] " << stable << " stable / " << unstable << " unstable -> " << out
              << "\n";
}

void cmd_augment(const cfg::ExperimentConfig& ec, int verbose) {
    const std::string labeled = with_suffix(ec.dataset.path, "_labeled");
    if (!fs::exists(labeled))
        throw std::runtime_error("no labeled dataset at " + labeled + " (run label first)");
    auto ts = data::load_trajectories(labeled);
    data::WindowSet real = data::make_windows(ts, ec.datagen.fault_onset, ec.model.seq_len);
    if (verbose) std::cout << "  training one generator per class\n";
    gan::AugmentResult aug =
        gan::augment_windows(real, ec.datagen.n_buses, ec.datagen.rate_hz,
                             ec.dataset.augment_total, ec.dataset.class0_share, ec.gan, ec.seed);
    const std::string out = with_suffix(ec.dataset.path, "_synthetic");
    save_dataset(aug.synthetic, out);
    report::Table t;
    t.name = "mmd";
    t.header = {"class", "mmd_initial", "mmd_final", "iterations", "epochs", "degenerate"};
    for (std::size_t c = 0; c < aug.histories.size(); ++c) {
        const auto& h = aug.histories[c];
        t.rows.push_back({std::to_string(c), report::cell(h.mmd_initial),
                          report::cell(h.mmd_final), std::to_string(h.iterations),
                          std::to_string(h.epochs), h.degenerate_input ? "true" : "false"});
    }
    emit(ec, "augment", {t}, {out});
    std::cout << "[augment] " << aug.synthetic.size() << " synthetic windows -> " << out << "\n";
}

void cmd_train(const cfg::ExperimentConfig& ec, int verbose) {
    StageData d = load_stage_data(ec, verbose > 0);
    model::Model m = model::Model::init(ec.model, ec.seed);
    harness::TrainResult res = harness::train(m, d.train, d.test, ec.training, ec.seed);
    const std::string ckpt = out_path(ec, "model.ckpt");
    model::save_checkpoint(m, ckpt);
    emit(ec, "train",
         {metrics_table("metrics", res.final_metrics),
          report::loss_trace_table("loss", res.loss_trace)},
         {ckpt});
    std::cout << "[train] " << res.epochs_run << " epochs"
              << (res.early_stopped ? " (early stop)" : "") << ", test accuracy "
              << res.final_metrics.accuracy << ", auc "
              << (res.final_metrics.auc ? std::to_string(*res.final_metrics.auc) : "n/a")
              << " -> " << ckpt << "\n";
}

void cmd_attack(const cfg::ExperimentConfig& ec, int verbose) {
    StageData d = load_stage_data(ec, verbose > 0);
    model::Model m = load_current_model(ec, verbose > 0);
    Rng sub_rng = Rng::derive(ec.seed, "attack_eval");
    data::WindowSet eval =
        harness::subsample_windows(d.test, ec.robustness.eval_n, sub_rng);

    std::optional<model::Model> surrogate;
    std::vector<attack::ThreatModel> threats;
    for (const auto& th : ec.robustness.threats) {
        if (th == "gray_box") {
            if (!surrogate) {
                Rng q_rng = Rng::derive(ec.seed, "surrogate_queries");
                data::WindowSet queries = harness::subsample_windows(d.train, 512, q_rng);
                if (verbose) std::cout << "  distilling surrogate on " << queries.size()
                                       << " queries\n";
                surrogate = attack::distill_surrogate(m, queries,
                                                      ec.robustness.surrogate_epochs, ec.seed);
            }
            threats.push_back({th, &*surrogate});
        } else {
            threats.push_back({th, nullptr});
        }
    }
    auto rep = attack::robustness_eval(m, eval, ec.robustness.methods, threats,
                                       ec.robustness.epsilons, ec.attack,
                                       attack::ChannelSpec::voltage_only(ec.datagen.n_buses),
                                       ec.seed);
    report::Table t;
    t.name = "robustness";
    t.header = {"method", "threat", "epsilon", "accuracy"};
    for (const auto& c : rep.cells)
        t.rows.push_back({c.method, c.threat, report::cell(c.epsilon), report::cell(c.accuracy)});
    report::Table s;
    s.name = "robustness_summary";
    s.header = {"clean_accuracy", "avg_robust_accuracy", "robustness_drop"};
    s.rows = {{report::cell(rep.clean_accuracy), report::cell(rep.avg_robust),
               report::cell(rep.drop)}};
    emit(ec, "attack", {t, s});
    std::cout << "[attack] clean " << rep.clean_accuracy << ", avg robust " << rep.avg_robust
              << ", drop " << rep.drop << " over " << rep.cells.size() << " cells\n";
}

void cmd_defend(const cfg::ExperimentConfig& ec, int verbose) {
    StageData d = load_stage_data(ec, verbose > 0);
    const std::string base = out_path(ec, "model.ckpt");
    if (!fs::exists(base))
        throw std::runtime_error("no checkpoint at " + base + " (run the train stage first)");
    model::Model m = model::load_checkpoint(base);
    std::vector<attack::AttackConfig> advs;
    for (const auto& meth : ec.robustness.adv_methods) {
        attack::AttackConfig a = ec.attack;
        a.method = meth;
        a.epsilon = ec.robustness.adv_epsilon;
        advs.push_back(a);
    }
    auto res = attack::adversarial_training(m, d.train, d.test, advs, ec.robustness.adv_mix,
                                            attack::ChannelSpec::voltage_only(ec.datagen.n_buses),
                                            ec.training, ec.seed);
    const std::string ckpt = out_path(ec, "defended.ckpt");
    model::save_checkpoint(m, ckpt);
    emit(ec, "defend",
         {metrics_table("metrics", res.final_metrics),
          report::loss_trace_table("loss", res.loss_trace)},
         {ckpt});
    std::cout << "[defend] " << res.epochs_run << " epochs at mix " << ec.robustness.adv_mix
              << ", clean test accuracy " << res.final_metrics.accuracy << " -> " << ckpt
              << "\n";
}

void cmd_sweep(const cfg::ExperimentConfig& ec, int verbose) {
    auto ts = load_labeled(ec, verbose > 0);
    harness::TrainConfig tcfg = ec.training;
    tcfg.epochs = ec.sweep.epochs;

    std::vector<report::Table> tables;
    if (!ec.sweep.variants.empty()) {
        auto [tr, te] = harness::windowed_split(ts, ec.datagen.fault_onset, ec.model.seq_len,
                                                ec.dataset.test_frac, ec.seed);
        auto cmp = harness::compare_models(tr, te, ec.sweep.variants, ec.sweep.seeds, ec.model,
                                           tcfg);
        tables.push_back(cmp.rows_table());
        tables.push_back(cmp.summary_table());
        if (verbose) std::cout << "  variants done\n";
    }
    if (!ec.sweep.qubits.empty() && !ec.sweep.layers.empty()) {
        auto [tr, te] = harness::windowed_split(ts, ec.datagen.fault_onset, ec.model.seq_len,
                                                ec.dataset.test_frac, ec.seed);
        auto q = harness::sweep_quantum(tr, te, ec.sweep.qubits, ec.sweep.layers, ec.sweep.seeds,
                                        ec.model, tcfg);
        tables.push_back(q.to_table());
        if (verbose) std::cout << "  qubit x layer grid done\n";
    }
    if (!ec.sweep.windows_s.empty()) {
        auto w = harness::sweep_sampling_window(ts, ec.sweep.windows_s, ec.datagen.rate_hz,
                                                ec.datagen.fault_onset, ec.model, tcfg,
                                                ec.sweep.seeds, ec.dataset.test_frac);
        tables.push_back(w.to_table());
        if (verbose) std::cout << "  sampling windows done\n";
    }
    emit(ec, "sweep", std::move(tables));
    std::cout << "[sweep] done\n";
}

void cmd_ablate(const cfg::ExperimentConfig& ec, int verbose) {
    auto ts = data::load_trajectories(ec.dataset.path);
    harness::AblationConfig acfg;
    acfg.model = ec.model;
    acfg.training = ec.training;
    acfg.training.epochs = ec.sweep.epochs;  // per-row budget
    acfg.sfcm = ec.sfcm;
    acfg.gan = ec.gan;
    acfg.attack = ec.attack;
    acfg.tail_window = ec.datagen.tail_window;
    acfg.onset = ec.datagen.fault_onset;
    acfg.length = ec.model.seq_len;
    acfg.n_buses = ec.datagen.n_buses;
    acfg.rate_hz = ec.datagen.rate_hz;
    acfg.test_frac = ec.dataset.test_frac;
    acfg.augment_total = ec.dataset.augment_total;
    acfg.class0_share = ec.dataset.class0_share;
    acfg.epsilon = ec.robustness.adv_epsilon;
    acfg.eval_n = ec.robustness.eval_n;
    acfg.adv_mix = ec.robustness.adv_mix;
    acfg.adv_epsilon = ec.robustness.adv_epsilon;
    acfg.adv_methods = ec.robustness.adv_methods;
    if (verbose) std::cout << "  running 4 pipelines x " << ec.sweep.seeds.size() << " seeds\n";
    auto res = harness::ablation_suite(ts, ec.sweep.seeds, acfg);
    emit(ec, "ablate", {res.to_table()});
    for (const auto& r : res.rows)
        std::cout << "[ablate] " << r.stage << ": clean " << r.clean_accuracy << ", robust "
                  << r.avg_robust << ", drop " << r.drop << "\n";
}

void cmd_report(const cfg::ExperimentConfig& ec, int) {
    std::vector<std::string> artifacts;
    if (fs::exists(ec.output_dir))
        for (const auto& entry : fs::directory_iterator(ec.output_dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind(ec.experiment_id + "_", 0) == 0 &&
                name.find("_report_") == std::string::npos)
                artifacts.push_back(name);
        }
    std::sort(artifacts.begin(), artifacts.end());
    const std::size_t n = artifacts.size();
    emit(ec, "report", {}, std::move(artifacts));
    std::cout << "[report] " << n << " artifacts consolidated\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Voltage-stability sequence classifier: data pipeline, hybrid model training, "
                 "adversarial evaluation, and experiment sweeps"};
    app.require_subcommand(1);
    app.fallthrough();

    CliArgs cli;
    app.add_option("-c,--config", cli.config, "experiment config file (JSON)")->required();
    app.add_option("-s,--set", cli.sets,
                   "config override as dotted.key=value (repeatable; JSON values)");
    std::uint64_t seed_val = 0;
    auto* seed_opt = app.add_option("--seed", seed_val, "master seed override");
    app.add_flag("-v,--verbose", cli.verbose, "chattier progress output");

    struct Sub {
        const char* name;
        const char* help;
        void (*run)(const cfg::ExperimentConfig&, int);
    };
    const std::vector<Sub> subs = {
        {"datagen", "generate the synthetic trajectory dataset", cmd_datagen},
        {"label", "heuristic certification + semi-supervised cluster labeling", cmd_label},
        {"augment", "train per-class GANs and synthesize additional windows", cmd_augment},
        {"train", "train the configured classifier", cmd_train},
        {"attack", "robustness grid against the trained model", cmd_attack},
        {"defend", "adversarial training on top of the trained model", cmd_defend},
        {"sweep", "variant comparison, qubit x layer grid, sampling windows", cmd_sweep},
        {"ablate", "four-stage pipeline ablation with robustness scoring", cmd_ablate},
        {"report", "consolidate artifacts into a summary", cmd_report},
    };
    for (const auto& s : subs) app.add_subcommand(s.name, s.help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    if (seed_opt->count()) cli.seed = seed_val;

    try {
        cfg::ExperimentConfig ec = resolve_config(cli);
        const std::string stage = app.get_subcommands().front()->get_name();
        snapshot_config(ec, stage);
        for (const auto& s : subs)
            if (stage == s.name) {
                s.run(ec, cli.verbose);
                return 0;
            }
        std::cerr << "error: unknown subcommand " << stage << "\n";
        return 1;
    } catch (const cfg::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
