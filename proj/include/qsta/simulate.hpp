#pragma once

// Synthetic post-fault voltage trajectory generator.
//
// Stands in for a transient-dynamics simulator: each scenario-grid cell
// (load level x induction-motor ratio x fault location x clearing time) gets
// a stress score; cells are ranked by stress and the rank quantiles fix the
// intended outcome class (fast recovery, stalled recovery, or the ambiguous
// band in between). The per-unit voltage follows a piecewise model -- flat
// pre-fault, depressed during the fault, first-order exponential recovery
// toward a class-dependent level afterward -- and P/Q are smooth functions
// of voltage plus bounded noise. Bounded (uniform) noise keeps the certified
// classes inside their tail bands with guaranteed margin.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "qsta/dataset.hpp"
#include "qsta/rng.hpp"

namespace qsta::data {

struct ScenarioGrid {
    std::vector<double> load_levels{0.8, 0.9, 1.0, 1.1, 1.2};
    std::vector<double> motor_ratios{0.7, 0.8, 0.9};
    std::vector<double> fault_locations{0.0, 0.25, 0.5, 0.75};
    std::vector<double> clearing_times{0.05, 0.1};

    std::size_t n_buses = 3;
    double rate_hz = 100.0;
    std::size_t length = 120;       // samples per trajectory
    std::size_t fault_onset = 10;   // sample index where the fault strikes
    std::size_t tail_window = 30;   // samples used for outcome certification
    double noise_scale = 1.0;       // 0 disables all stochastic terms
    bool fault_enabled = true;      // false: quiescent trajectories (U == 1)

    // Fractions of cells certified stable (lowest stress) and unstable
    // (highest stress); the remainder is the ambiguous band.
    double stable_frac = 192.0 / 2040.0;
    double unstable_frac = 698.0 / 2040.0;

    std::size_t n_cells() const {
        return load_levels.size() * motor_ratios.size() * fault_locations.size() *
               clearing_times.size();
    }
};

namespace detail {

inline double lerp(double a, double b, double t) { return a + (b - a) * t; }

inline double unit_pos(const std::vector<double>& axis, double v) {
    const double lo = *std::min_element(axis.begin(), axis.end());
    const double hi = *std::max_element(axis.begin(), axis.end());
    return hi > lo ? (v - lo) / (hi - lo) : 0.0;
}

// Composite stress score in [0,1]: heavier load, more motor load, closer
// fault, and slower clearing all push toward stalled recovery.
inline double cell_stress(const ScenarioGrid& g, const Scenario& s) {
    const double load = unit_pos(g.load_levels, s.load_level);
    const double motor = unit_pos(g.motor_ratios, s.motor_ratio);
    const double prox = 1.0 - unit_pos(g.fault_locations, s.fault_location);
    const double clear = unit_pos(g.clearing_times, s.clearing_s);
    return 0.40 * load + 0.25 * motor + 0.20 * prox + 0.15 * clear;
}

}  // namespace detail

// Intended outcome of a grid cell, fixed by its stress rank.
enum class CellIntent { Stable, Ambiguous, Unstable };

// Rank-based intent assignment for every cell of the grid, in cell-index
// order (load-major, clearing-minor). Pure function of the grid.
inline std::vector<CellIntent> cell_intents(const ScenarioGrid& g) {
    std::vector<Scenario> cells;
    for (double ll : g.load_levels)
        for (double mr : g.motor_ratios)
            for (double fl : g.fault_locations)
                for (double ct : g.clearing_times)
                    cells.push_back({ll, mr, fl, ct});
    std::vector<std::size_t> order(cells.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return detail::cell_stress(g, cells[a]) < detail::cell_stress(g, cells[b]);
    });
    const auto n = cells.size();
    const auto n_stable = static_cast<std::size_t>(std::round(g.stable_frac * n));
    const auto n_unstable = static_cast<std::size_t>(std::round(g.unstable_frac * n));
    std::vector<CellIntent> intent(n, CellIntent::Ambiguous);
    for (std::size_t r = 0; r < n; ++r) {
        if (r < n_stable)
            intent[order[r]] = CellIntent::Stable;
        else if (r >= n - n_unstable)
            intent[order[r]] = CellIntent::Unstable;
    }
    return intent;
}

namespace detail {

// Recovery level the voltage settles toward, as a function of stress within
// the cell's class band. Certified bands leave margin to the 0.9/0.7
// heuristic thresholds so bounded noise cannot cross them.
inline double recovery_level(CellIntent intent, double stress01, double jitter) {
    switch (intent) {
        case CellIntent::Stable:
            return std::clamp(lerp(1.00, 0.945, stress01) + jitter, 0.94, 1.0);
        case CellIntent::Unstable:
            return std::clamp(lerp(0.64, 0.46, stress01) + jitter, 0.45, 0.648);
        case CellIntent::Ambiguous:
        default:
            return std::clamp(lerp(0.88, 0.72, stress01) + jitter, 0.715, 0.885);
    }
}

// Recovery time constant (seconds); grows with load x motor stress and is
// slowest for stalled recoveries.
inline double recovery_tau(CellIntent intent, double load_motor01) {
    const double base = intent == CellIntent::Stable      ? 0.025
                        : intent == CellIntent::Ambiguous ? 0.045
                                                          : 0.070;
    return base + 0.05 * load_motor01;
}

}  // namespace detail

// Generate every trajectory of the grid: n_per_cell per cell, deterministic
// in (grid, n_per_cell, seed). Intent and certification are recorded in the
// provenance; labels are left unset (labeling is a separate stage).
inline std::vector<Trajectory> simulate_trajectories(const ScenarioGrid& g, std::size_t n_per_cell,
                                                     std::uint64_t seed) {
    if (g.n_cells() == 0) throw DataError("scenario grid is empty");
    if (g.fault_onset + 2 > g.length) throw DataError("trajectory too short for the fault onset");
    const std::vector<CellIntent> intents = cell_intents(g);

    // Stress quantile of each cell *within its class band*, for mapping onto
    // the class's recovery-level range.
    std::vector<Scenario> cells;
    for (double ll : g.load_levels)
        for (double mr : g.motor_ratios)
            for (double fl : g.fault_locations)
                for (double ct : g.clearing_times)
                    cells.push_back({ll, mr, fl, ct});
    std::vector<double> stress(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) stress[i] = detail::cell_stress(g, cells[i]);
    auto band_pos = [&](std::size_t ci) {
        double lo = 1.0, hi = 0.0;
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (intents[k] != intents[ci]) continue;
            lo = std::min(lo, stress[k]);
            hi = std::max(hi, stress[k]);
        }
        return hi > lo ? (stress[ci] - lo) / (hi - lo) : 0.5;
    };

    Rng master = Rng::derive(seed, "trajectory_generator");
    std::vector<Trajectory> out;
    out.reserve(cells.size() * n_per_cell);

    // Bus electrical positions along the faulted corridor.
    std::vector<double> bus_pos(g.n_buses);
    for (std::size_t b = 0; b < g.n_buses; ++b)
        bus_pos[b] = g.n_buses == 1 ? 0.5 : 0.1 + 0.8 * double(b) / double(g.n_buses - 1);

    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        const Scenario& sc = cells[ci];
        const CellIntent intent = intents[ci];
        const double pos01 = band_pos(ci);
        const double lm01 = detail::unit_pos(g.load_levels, sc.load_level) *
                            detail::unit_pos(g.motor_ratios, sc.motor_ratio);
        Rng cell_rng = master.spawn(ci);

        for (std::size_t k = 0; k < n_per_cell; ++k) {
            Rng rng = cell_rng.spawn(k);
            const double ns = g.noise_scale;
            Trajectory t;
            t.id = "traj-" + std::to_string(ci) + "-" + std::to_string(k);
            t.rate_hz = g.rate_hz;
            t.scenario = sc;
            t.provenance.source = "generator";
            t.provenance.seed = seed;
            t.provenance.intent = intent == CellIntent::Stable     ? kStable
                                  : intent == CellIntent::Unstable ? kUnstable
                                                                   : kUnlabeled;
            t.provenance.certified = g.fault_enabled && intent != CellIntent::Ambiguous;

            // Per-trajectory stress realization: the cell's band position
            // plus a visible within-cell spread. The tiny extra jitter on the
            // recovery level is invisible in the early window by design.
            const double s01 = std::clamp(pos01 + ns * rng.uniform(-0.06, 0.06), 0.0, 1.0);
            const double R = detail::recovery_level(intent, s01, ns * rng.uniform(-0.002, 0.002));
            const double tau = detail::recovery_tau(intent, lm01);
            const double dip = detail::lerp(0.35, 0.62, s01);  // fault-on voltage depression

            const std::size_t clear_idx =
                g.fault_onset + static_cast<std::size_t>(std::round(sc.clearing_s * g.rate_hz));
            t.P.assign(g.n_buses, std::vector<double>(g.length, 0.0));
            t.Q.assign(g.n_buses, std::vector<double>(g.length, 0.0));
            t.U.assign(g.n_buses, std::vector<double>(g.length, 0.0));

            for (std::size_t b = 0; b < g.n_buses; ++b) {
                const double u0 = 1.0 + ns * rng.uniform(-0.008, 0.008);
                const double prox = 1.0 - 0.8 * std::abs(bus_pos[b] - sc.fault_location);
                const double depth = dip * std::clamp(prox, 0.2, 1.0);
                const double r_b = R * (1.0 + ns * rng.uniform(-0.004, 0.004));
                const double u_fault = std::max(0.05, u0 - depth);
                const double p0 = 0.9 * sc.load_level * (0.8 + 0.2 * sc.motor_ratio) *
                                  (1.0 - 0.15 * double(b));
                const double q0 = 0.45 * sc.load_level * (0.6 + 0.4 * sc.motor_ratio) *
                                  (1.0 - 0.15 * double(b));
                for (std::size_t i = 0; i < g.length; ++i) {
                    double u;
                    if (!g.fault_enabled || i < g.fault_onset) {
                        u = u0 + ns * rng.uniform(-0.004, 0.004);
                    } else if (i < clear_idx) {
                        u = u_fault + ns * rng.uniform(-0.010, 0.010);
                    } else {
                        const double dt = double(i - clear_idx) / g.rate_hz;
                        u = r_b + (u_fault - r_b) * std::exp(-dt / tau) +
                            ns * rng.uniform(-0.006, 0.006);
                    }
                    u = std::max(u, 0.0);
                    const double rel = u / u0;
                    t.U[b][i] = u;
                    t.P[b][i] = p0 * std::pow(std::max(rel, 0.0), 1.4) +
                                ns * rng.uniform(-0.006, 0.006);
                    t.Q[b][i] = q0 * (1.8 - 0.8 * rel) * std::pow(std::max(rel, 0.0), 0.3) +
                                ns * rng.uniform(-0.006, 0.006);
                }
            }
            out.push_back(std::move(t));
        }
    }
    return out;
}

// Tail-band heuristic: every bus consistently >= 0.9 p.u. over the last
// tail_window samples -> stable; every bus <= 0.7 -> unstable; else unknown.
inline int heuristic_label(const Trajectory& t, std::size_t tail_window) {
    if (tail_window > t.length() || tail_window == 0)
        throw DataError("tail window must be in [1, trajectory length]");
    bool all_high = true, all_low = true;
    for (const auto& bus : t.U) {
        for (std::size_t i = bus.size() - tail_window; i < bus.size(); ++i) {
            if (bus[i] < 0.9) all_high = false;
            if (bus[i] > 0.7) all_low = false;
        }
    }
    if (all_high) return kStable;
    if (all_low) return kUnstable;
    return kUnlabeled;
}

// Apply the heuristic to a whole set, writing labels in place.
inline void heuristic_label_all(std::vector<Trajectory>& ts, std::size_t tail_window) {
    for (auto& t : ts) t.label = heuristic_label(t, tail_window);
}

}  // namespace qsta::data
