#pragma once

// Functional validity checks for synthetic data: train the classical baseline
// classifier under three regimes — real->real (RR), train-on-real test-on-
// synthetic (TSTR), and train-on-synthetic test-on-real (TRTS) — with an
// identical configuration and seed, and report per-regime metrics plus the
// absolute deltas of each regime against RR. Small deltas mean the synthetic
// set is interchangeable with the real one for this task.

#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>

#include "qsta/train.hpp"

namespace qsta::validate {

struct ValidateError : std::runtime_error {
    explicit ValidateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Absolute metric differences of one regime against the real->real reference.
struct RegimeDeltas {
    double accuracy = 0.0;
    double f1 = 0.0;
    double auc = 0.0;

    double max() const { return std::max(accuracy, std::max(f1, auc)); }
};

struct TstrTrtsReport {
    metrics::Metrics rr;    // train real, test real
    metrics::Metrics tstr;  // train real, test synthetic
    metrics::Metrics trts;  // train synthetic, test real
    RegimeDeltas tstr_delta;
    RegimeDeltas trts_delta;
};

namespace detail {

inline void require_two_classes(const data::WindowSet& s, const char* which) {
    std::set<std::size_t> classes(s.y.begin(), s.y.end());
    if (classes.size() < 2)
        throw ValidateError(std::string("tstr/trts: ") + which +
                            " set must contain at least two classes");
}

inline RegimeDeltas deltas(const metrics::Metrics& regime, const metrics::Metrics& rr) {
    RegimeDeltas d;
    d.accuracy = std::abs(regime.accuracy - rr.accuracy);
    d.f1 = std::abs(regime.f1 - rr.f1);
    if (regime.auc && rr.auc) d.auc = std::abs(*regime.auc - *rr.auc);
    return d;
}

}  // namespace detail

// Train the classical transformer baseline three ways with identical
// config/seed and score each regime. Both sets must be two-class.
inline TstrTrtsReport tstr_trts_eval(const data::WindowSet& real, const data::WindowSet& synth,
                                     model::ModelConfig classifier_cfg,
                                     const harness::TrainConfig& tcfg, std::uint64_t seed) {
    detail::require_two_classes(real, "real");
    detail::require_two_classes(synth, "synthetic");
    classifier_cfg.variant = "transformer";  // data validity is judged on the baseline

    auto run = [&](const data::WindowSet& tr, const data::WindowSet& te) {
        model::Model m = model::Model::init(classifier_cfg, seed);
        return harness::train(m, tr, te, tcfg, seed).final_metrics;
    };
    TstrTrtsReport rep;
    rep.rr = run(real, real);
    rep.tstr = run(real, synth);
    rep.trts = run(synth, real);
    rep.tstr_delta = detail::deltas(rep.tstr, rep.rr);
    rep.trts_delta = detail::deltas(rep.trts, rep.rr);
    return rep;
}

}  // namespace qsta::validate
