#pragma once

// Experiment sweeps: model-variant comparison under identical budgets, the
// qubit x layer grid, the sampling-window study, and the four-stage ablation
// ladder (certified-only training, + semi-supervised labeling, + GAN
// augmentation, + adversarial training) scored clean and under attack.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qsta/attacks.hpp"
#include "qsta/lsgan.hpp"
#include "qsta/report.hpp"
#include "qsta/sfcm.hpp"
#include "qsta/train.hpp"

namespace qsta::harness {

namespace detail {

inline void append_windows(data::WindowSet& into, const data::WindowSet& from) {
    for (std::size_t i = 0; i < from.size(); ++i) into.push(from.x[i], from.y[i], from.ids[i]);
}

inline double mean_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return v.empty() ? 0.0 : m / double(v.size());
}

inline double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / double(v.size() - 1));
}

}  // namespace detail

// Deterministic random subset of a window set; n = 0 (or n >= size) keeps all.
inline data::WindowSet subsample_windows(const data::WindowSet& s, std::size_t n, Rng& rng) {
    if (n == 0 || n >= s.size()) return s;
    std::vector<std::size_t> idx(s.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    data::WindowSet out;
    for (std::size_t i : idx) out.push(s.x[i], s.y[i], s.ids[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Model-variant comparison
// ---------------------------------------------------------------------------

struct VariantRow {
    std::string variant;
    std::uint64_t seed = 0;
    metrics::Metrics metrics;
    std::vector<double> loss_trace;
};

struct VariantSummary {
    std::string variant;
    double acc_mean = 0.0, acc_sd = 0.0;
    double f1_mean = 0.0, f1_sd = 0.0;
    double auc_mean = 0.0, auc_sd = 0.0;
};

struct CompareResult {
    std::vector<VariantRow> rows;         // variants outer, seeds inner
    std::vector<VariantSummary> summary;  // one per variant

    report::Table rows_table() const {
        report::Table t;
        t.name = "model_comparison";
        t.header = {"variant", "seed", "accuracy", "f1", "auc"};
        for (const auto& r : rows)
            t.rows.push_back({r.variant, std::to_string(r.seed), report::cell(r.metrics.accuracy),
                              report::cell(r.metrics.f1),
                              r.metrics.auc ? report::cell(*r.metrics.auc) : ""});
        return t;
    }
    report::Table summary_table() const {
        report::Table t;
        t.name = "model_comparison_summary";
        t.header = {"variant", "acc_mean", "acc_sd", "f1_mean", "f1_sd", "auc_mean", "auc_sd"};
        for (const auto& s : summary)
            t.rows.push_back({s.variant, report::cell(s.acc_mean), report::cell(s.acc_sd),
                              report::cell(s.f1_mean), report::cell(s.f1_sd),
                              report::cell(s.auc_mean), report::cell(s.auc_sd)});
        return t;
    }
};

// Train each requested variant once per seed under an identical budget.
inline CompareResult compare_models(const data::WindowSet& train_set,
                                    const data::WindowSet& test_set,
                                    const std::vector<std::string>& variants,
                                    const std::vector<std::uint64_t>& seeds,
                                    model::ModelConfig base, const TrainConfig& tcfg) {
    if (seeds.empty()) throw TrainError("compare_models: need at least one seed");
    if (variants.empty()) throw TrainError("compare_models: need at least one variant");
    CompareResult out;
    for (const auto& v : variants) {
        std::vector<double> accs, f1s, aucs;
        for (std::uint64_t seed : seeds) {
            model::ModelConfig cfg = base;
            cfg.variant = v;
            model::Model m = model::Model::init(cfg, seed);
            TrainResult res = train(m, train_set, test_set, tcfg, seed);
            VariantRow row;
            row.variant = v;
            row.seed = seed;
            row.metrics = res.final_metrics;
            row.loss_trace = res.loss_trace;
            out.rows.push_back(std::move(row));
            accs.push_back(res.final_metrics.accuracy);
            f1s.push_back(res.final_metrics.f1);
            if (res.final_metrics.auc) aucs.push_back(*res.final_metrics.auc);
        }
        VariantSummary s;
        s.variant = v;
        s.acc_mean = detail::mean_of(accs);
        s.acc_sd = detail::sd_of(accs);
        s.f1_mean = detail::mean_of(f1s);
        s.f1_sd = detail::sd_of(f1s);
        s.auc_mean = detail::mean_of(aucs);
        s.auc_sd = detail::sd_of(aucs);
        out.summary.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Qubit x layer grid
// ---------------------------------------------------------------------------

struct QuantumCell {
    std::size_t n_qubits = 0, n_layers = 0;
    std::uint64_t seed = 0;
    metrics::Metrics metrics;
};

struct QuantumSweepResult {
    std::vector<QuantumCell> cells;  // qubits outer, layers middle, seeds inner

    report::Table to_table() const {
        report::Table t;
        t.name = "quantum_sweep";
        t.header = {"qubits", "layers", "seed", "accuracy", "f1", "auc"};
        for (const auto& c : cells)
            t.rows.push_back({std::to_string(c.n_qubits), std::to_string(c.n_layers),
                              std::to_string(c.seed), report::cell(c.metrics.accuracy),
                              report::cell(c.metrics.f1),
                              c.metrics.auc ? report::cell(*c.metrics.auc) : ""});
        return t;
    }
};

// Train the hybrid variant over every (qubits, layers, seed) combination.
inline QuantumSweepResult sweep_quantum(const data::WindowSet& train_set,
                                        const data::WindowSet& test_set,
                                        const std::vector<std::size_t>& qubits,
                                        const std::vector<std::size_t>& layers,
                                        const std::vector<std::uint64_t>& seeds,
                                        model::ModelConfig base, const TrainConfig& tcfg) {
    if (qubits.empty() || layers.empty() || seeds.empty())
        throw TrainError("sweep_quantum: empty axis");
    QuantumSweepResult out;
    for (std::size_t q : qubits)
        for (std::size_t l : layers)
            for (std::uint64_t seed : seeds) {
                model::ModelConfig cfg = base;
                cfg.variant = "qstaformer";
                cfg.circuit.n_qubits = q;
                cfg.circuit.n_layers = l;
                model::Model m = model::Model::init(cfg, seed);
                TrainResult res = train(m, train_set, test_set, tcfg, seed);
                out.cells.push_back({q, l, seed, res.final_metrics});
            }
    return out;
}

// ---------------------------------------------------------------------------
// Sampling-window study
// ---------------------------------------------------------------------------

struct WindowCell {
    double window_s = 0.0;
    std::size_t length = 0;  // steps = round(window * rate)
    std::uint64_t seed = 0;
    metrics::Metrics metrics;
};

struct WindowSweepResult {
    std::vector<WindowCell> cells;

    report::Table to_table() const {
        report::Table t;
        t.name = "window_sweep";
        t.header = {"window_s", "steps", "seed", "accuracy", "f1", "auc"};
        for (const auto& c : cells)
            t.rows.push_back({report::cell(c.window_s), std::to_string(c.length),
                              std::to_string(c.seed), report::cell(c.metrics.accuracy),
                              report::cell(c.metrics.f1),
                              c.metrics.auc ? report::cell(*c.metrics.auc) : ""});
        return t;
    }
};

// The split used for every sampling-window cell: windows cut at the fault
// onset, stratified 80/20 by default, shuffle stream derived from the seed
// alone so equal-length runs reproduce each other exactly.
inline std::pair<data::WindowSet, data::WindowSet> windowed_split(
    const std::vector<data::Trajectory>& ts, std::size_t onset, std::size_t L, double test_frac,
    std::uint64_t seed) {
    data::WindowSet all = data::make_windows(ts, onset, L);
    Rng rng = Rng::derive(seed, "window_split");
    return data::stratified_split(all, test_frac, rng);
}

// Retrain per window length; a window longer than the trajectories throws.
inline WindowSweepResult sweep_sampling_window(const std::vector<data::Trajectory>& ts,
                                               const std::vector<double>& windows_s,
                                               double rate_hz, std::size_t onset,
                                               model::ModelConfig base, const TrainConfig& tcfg,
                                               const std::vector<std::uint64_t>& seeds,
                                               double test_frac = 0.2) {
    if (windows_s.empty() || seeds.empty())
        throw TrainError("sweep_sampling_window: empty axis");
    WindowSweepResult out;
    for (double w : windows_s) {
        const auto L = static_cast<std::size_t>(std::llround(w * rate_hz));
        if (L < 2) throw TrainError("sampling window shorter than 2 samples");
        for (std::uint64_t seed : seeds) {
            auto [tr, te] = windowed_split(ts, onset, L, test_frac, seed);
            model::ModelConfig cfg = base;
            cfg.seq_len = L;
            model::Model m = model::Model::init(cfg, seed);
            TrainResult res = train(m, tr, te, tcfg, seed);
            out.cells.push_back({w, L, seed, res.final_metrics});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ablation ladder
// ---------------------------------------------------------------------------

struct AblationConfig {
    model::ModelConfig model;
    TrainConfig training;
    cluster::SfcmConfig sfcm;
    gan::LsganConfig gan;
    attack::AttackConfig attack;  // grid base (steps, iters, ...) for scoring

    std::size_t tail_window = 30;  // certification window for labeling
    std::size_t onset = 10;        // window start (fault onset)
    std::size_t length = 0;        // window length; 0 = model.seq_len
    std::size_t n_buses = 3;
    double rate_hz = 100.0;
    double test_frac = 0.2;

    std::size_t augment_total = 0;  // GAN rows grow the train set to this size
    double class0_share = 0.5;

    double epsilon = 0.03;          // scoring-grid budget
    std::size_t eval_n = 0;         // 0 = score on the full test set
    double adv_mix = 0.5;           // defense row: adversarial share per batch
    double adv_epsilon = 0.03;      // defense row: training budget
    std::vector<std::string> adv_methods{"pgd"};
};

struct AblationRow {
    std::string stage;
    double clean_accuracy = 0.0;
    double avg_robust = 0.0;
    double drop = 0.0;  // clean - avg_robust
};

struct AblationResult {
    std::vector<AblationRow> rows;      // 3-seed means, ladder order
    std::vector<AblationRow> per_seed;  // stage repeated per seed

    report::Table to_table() const {
        report::Table t;
        t.name = "ablation";
        t.header = {"stage", "clean_accuracy", "avg_robust_accuracy", "robustness_drop"};
        for (const auto& r : rows)
            t.rows.push_back({r.stage, report::cell(r.clean_accuracy), report::cell(r.avg_robust),
                              report::cell(r.drop)});
        return t;
    }
};

// Run the four pipelines on a raw (unlabeled) trajectory set and score each
// against the same semi-supervised-labeled test split: certified-only
// training, all clustered labels, clustered + GAN augmentation, and the full
// pipeline with adversarial training. Robustness is averaged over the three
// attack families at the configured budget.
inline AblationResult ablation_suite(const std::vector<data::Trajectory>& raw,
                                     const std::vector<std::uint64_t>& seeds,
                                     const AblationConfig& acfg) {
    if (seeds.empty()) throw TrainError("ablation_suite: need at least one seed");
    const std::size_t L = acfg.length ? acfg.length : acfg.model.seq_len;

    // Heuristic certification, then cluster a copy so every trajectory is labeled.
    std::vector<data::Trajectory> certified_ts = raw;
    data::heuristic_label_all(certified_ts, acfg.tail_window);
    std::vector<data::Trajectory> clustered_ts = certified_ts;
    cluster::sfcm_label_trajectories(clustered_ts, acfg.tail_window, acfg.sfcm);

    const data::WindowSet certified_all = data::make_windows(certified_ts, acfg.onset, L);
    const data::WindowSet clustered_all = data::make_windows(clustered_ts, acfg.onset, L);

    const attack::ChannelSpec chan = attack::ChannelSpec::voltage_only(acfg.n_buses);
    const std::vector<std::string> grid_methods = {"mifgsm", "pgd", "cw"};
    const std::vector<attack::ThreatModel> threats = {{"white_box", nullptr}};

    const std::vector<std::string> stages = {"certified_only", "plus_clustering",
                                             "plus_augmentation", "full_pipeline"};
    std::vector<std::vector<double>> clean(4), robust(4);

    for (std::uint64_t seed : seeds) {
        Rng split_rng = Rng::derive(seed, "ablation_split");
        auto [cluster_train, test] = data::stratified_split(clustered_all, acfg.test_frac,
                                                            split_rng);
        // Certified-only training must not see test trajectories.
        std::set<std::string> test_ids(test.ids.begin(), test.ids.end());
        data::WindowSet certified_train;
        for (std::size_t i = 0; i < certified_all.size(); ++i)
            if (!test_ids.count(certified_all.ids[i]))
                certified_train.push(certified_all.x[i], certified_all.y[i],
                                     certified_all.ids[i]);

        Rng eval_rng = Rng::derive(seed, "ablation_eval");
        const data::WindowSet eval_set = subsample_windows(test, acfg.eval_n, eval_rng);

        // shared by the augmentation and full-pipeline rows
        data::WindowSet augmented_train = cluster_train;
        if (acfg.augment_total > cluster_train.size()) {
            auto aug = gan::augment_windows(cluster_train, acfg.n_buses, acfg.rate_hz,
                                            acfg.augment_total, acfg.class0_share, acfg.gan,
                                            seed);
            detail::append_windows(augmented_train, data::make_windows(aug.synthetic, 0, L));
        }

        for (std::size_t row = 0; row < 4; ++row) {
            model::Model m = model::Model::init(acfg.model, seed);
            if (row == 0) {
                train(m, certified_train, test, acfg.training, seed);
            } else if (row == 1) {
                train(m, cluster_train, test, acfg.training, seed);
            } else if (row == 2) {
                train(m, augmented_train, test, acfg.training, seed);
            } else {
                std::vector<attack::AttackConfig> advs;
                for (const auto& meth : acfg.adv_methods) {
                    attack::AttackConfig a = acfg.attack;
                    a.method = meth;
                    a.epsilon = acfg.adv_epsilon;
                    advs.push_back(a);
                }
                attack::adversarial_training(m, augmented_train, test, advs,
                                             acfg.adv_mix, chan, acfg.training, seed);
            }
            const double c = evaluate(m, test).accuracy;
            auto rep = attack::robustness_eval(m, eval_set, grid_methods, threats,
                                               {acfg.epsilon}, acfg.attack, chan, seed);
            clean[row].push_back(c);
            robust[row].push_back(rep.avg_robust);
        }
    }

    AblationResult out;
    for (std::size_t row = 0; row < 4; ++row) {
        for (std::size_t k = 0; k < seeds.size(); ++k)
            out.per_seed.push_back({stages[row], clean[row][k], robust[row][k],
                                    clean[row][k] - robust[row][k]});
        AblationRow r;
        r.stage = stages[row];
        r.clean_accuracy = detail::mean_of(clean[row]);
        r.avg_robust = detail::mean_of(robust[row]);
        r.drop = r.clean_accuracy - r.avg_robust;
        out.rows.push_back(r);
    }
    return out;
}

}  // namespace qsta::harness
