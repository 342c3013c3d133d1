#pragma once

// Semi-supervised fuzzy c-means.
//
// Objective (fuzzifier fixed at 2):
//   J = sum_ij u_ij^2 ||x_i - c_j||^2
//     + lambda * sum_ij (u_ij - f_ij b_j)^2 ||x_i - c_j||^2
// where f_ij flags prior knowledge that sample i belongs to cluster j and
// b_j flags clusters anchored by at least one prior-labeled member.
//
// Membership update (the Lagrangian minimizer of J at fixed centroids):
//   u_ij = 1/(1+lambda) * [ (1 + lambda*(1 - S_i)) / sum_k (d_ij/d_ik)^2
//                           + lambda * f_ij * b_j ],   S_i = sum_k f_ik b_k
// Rows sum to 1 analytically; they are renormalized anyway to absorb
// floating-point slack. Centroids use the plain u^2-weighted mean. With
// lambda = 0 both updates reduce to unsupervised FCM with exponent 2.
//
// Singularity rule: a sample coinciding with a centroid (zero distance)
// receives full membership in that cluster.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsta/dataset.hpp"

namespace qsta::cluster {

struct SfcmConfig {
    std::size_t n_clusters = 2;
    double lambda = 5.0;
    std::size_t max_iterations = 1000;
    double tol = 1e-6;  // convergence threshold on max centroid shift
    // "paper": the semi-supervised membership formula above.
    // "standard": plain FCM membership that ignores priors (comparison mode).
    std::string membership_form = "paper";
};

struct SfcmPriors {
    // f[i][j] = 1 if sample i is prior-labeled into cluster j.
    std::vector<std::vector<double>> f;
    // b[j] = 1 if cluster j is anchored by prior knowledge. Computed from f
    // when left empty.
    std::vector<double> b;
};

struct MembershipMatrix {
    std::vector<std::vector<double>> u;  // [n_samples][n_clusters], rows sum to 1
    std::vector<std::vector<double>> f;
    std::vector<double> b;
};

struct SfcmResult {
    MembershipMatrix membership;
    std::vector<std::vector<double>> centroids;  // [n_clusters][dim]
    std::vector<double> objective;               // J per iteration
    std::size_t iterations = 0;
    bool converged = false;

    std::vector<std::size_t> hard_labels() const {
        std::vector<std::size_t> y(membership.u.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            const auto& row = membership.u[i];
            y[i] = static_cast<std::size_t>(
                std::max_element(row.begin(), row.end()) - row.begin());
        }
        return y;
    }
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

inline double sfcm_objective(const std::vector<std::vector<double>>& x,
                             const std::vector<std::vector<double>>& c,
                             const MembershipMatrix& m, double lambda) {
    double J = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < c.size(); ++j) {
            const double d2 = sq_dist(x[i], c[j]);
            const double u = m.u[i][j];
            const double fb = m.f[i][j] * m.b[j];
            J += (u * u + lambda * (u - fb) * (u - fb)) * d2;
        }
    }
    return J;
}

}  // namespace detail

inline SfcmResult sfcm_fit(const std::vector<std::vector<double>>& x, const SfcmPriors& priors,
                           const SfcmConfig& cfg) {
    const std::size_t n = x.size();
    const std::size_t c = cfg.n_clusters;
    if (n < c) throw data::DataError("sfcm: fewer samples than clusters");
    const std::size_t dim = x[0].size();
    for (const auto& row : x) {
        if (row.size() != dim) throw data::DataError("sfcm: ragged feature matrix");
        for (double v : row)
            if (!std::isfinite(v)) throw data::DataError("sfcm: non-finite feature value");
    }
    if (cfg.lambda < 0.0) throw data::DataError("sfcm: lambda must be >= 0");
    if (cfg.tol <= 0.0) throw data::DataError("sfcm: tolerance must be > 0");
    if (cfg.membership_form != "paper" && cfg.membership_form != "standard")
        throw data::DataError("sfcm: unknown membership form '" + cfg.membership_form + "'");

    MembershipMatrix mem;
    mem.f.assign(n, std::vector<double>(c, 0.0));
    if (!priors.f.empty()) {
        if (priors.f.size() != n) throw data::DataError("sfcm: prior flags row count mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            if (priors.f[i].size() != c)
                throw data::DataError("sfcm: prior flags column count mismatch");
            mem.f[i] = priors.f[i];
        }
    }
    mem.b = priors.b;
    if (mem.b.empty()) {
        mem.b.assign(c, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j)
                if (mem.f[i][j] > 0.0) mem.b[j] = 1.0;
    }
    if (mem.b.size() != c) throw data::DataError("sfcm: prior target count mismatch");

    // Initial centroids: mean of prior members where available; clusters
    // without priors start at the sample farthest from the placed centroids
    // (deterministic farthest-point rule).
    std::vector<std::vector<double>> cent(c, std::vector<double>(dim, 0.0));
    std::vector<bool> placed(c, false);
    for (std::size_t j = 0; j < c; ++j) {
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mem.f[i][j] > 0.0) {
                for (std::size_t k = 0; k < dim; ++k) cent[j][k] += x[i][k];
                ++count;
            }
        }
        if (count > 0) {
            for (std::size_t k = 0; k < dim; ++k) cent[j][k] /= double(count);
            placed[j] = true;
        }
    }
    for (std::size_t j = 0; j < c; ++j) {
        if (placed[j]) continue;
        std::size_t best = 0;
        double best_score = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            double score = std::numeric_limits<double>::max();
            bool any = false;
            for (std::size_t j2 = 0; j2 < c; ++j2) {
                if (!placed[j2]) continue;
                any = true;
                score = std::min(score, detail::sq_dist(x[i], cent[j2]));
            }
            if (!any) score = detail::sq_dist(x[i], x[0]);  // first pass: farthest from x[0]
            if (score > best_score) {
                best_score = score;
                best = i;
            }
        }
        cent[j] = x[best];
        placed[j] = true;
    }

    mem.u.assign(n, std::vector<double>(c, 0.0));
    SfcmResult res;

    auto update_membership = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> d2(c);
            std::size_t coincident = c;
            for (std::size_t j = 0; j < c; ++j) {
                d2[j] = detail::sq_dist(x[i], cent[j]);
                if (d2[j] == 0.0) coincident = j;
            }
            if (coincident != c) {
                for (std::size_t j = 0; j < c; ++j) mem.u[i][j] = (j == coincident) ? 1.0 : 0.0;
                continue;
            }
            double S_i = 0.0;
            for (std::size_t j = 0; j < c; ++j) S_i += mem.f[i][j] * mem.b[j];
            double row_sum = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                double ratio_sum = 0.0;
                for (std::size_t k = 0; k < c; ++k) ratio_sum += d2[j] / d2[k];
                double u;
                if (cfg.membership_form == "standard") {
                    u = 1.0 / ratio_sum;
                } else {
                    u = (1.0 / (1.0 + cfg.lambda)) *
                        ((1.0 + cfg.lambda * (1.0 - S_i)) / ratio_sum +
                         cfg.lambda * mem.f[i][j] * mem.b[j]);
                }
                mem.u[i][j] = u;
                row_sum += u;
            }
            for (std::size_t j = 0; j < c; ++j) mem.u[i][j] /= row_sum;
        }
    };

    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        update_membership();
        res.objective.push_back(detail::sfcm_objective(x, cent, mem, cfg.lambda));
        // u^2-weighted centroid update
        double max_shift = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            std::vector<double> num(dim, 0.0);
            double den = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double w = mem.u[i][j] * mem.u[i][j];
                for (std::size_t k = 0; k < dim; ++k) num[k] += w * x[i][k];
                den += w;
            }
            if (den > 0.0) {
                double shift2 = 0.0;
                for (std::size_t k = 0; k < dim; ++k) {
                    const double nv = num[k] / den;
                    const double d = nv - cent[j][k];
                    shift2 += d * d;
                    cent[j][k] = nv;
                }
                max_shift = std::max(max_shift, std::sqrt(shift2));
            }
        }
        res.iterations = it + 1;
        if (max_shift < cfg.tol) {
            res.converged = true;
            break;
        }
    }
    update_membership();  // memberships consistent with the final centroids
    res.membership = mem;
    res.centroids = std::move(cent);
    return res;
}

// ---------------------------------------------------------------------------
// Trajectory feature extraction for clustering
// ---------------------------------------------------------------------------

// Per-trajectory summary vector: tail mean/min/max of U per bus plus the
// bus-averaged late recovery slope (p.u. per second). Matches the voltage-
// band labeling heuristic's view of the data.
inline std::vector<double> sfcm_features(const data::Trajectory& t, std::size_t tail_window) {
    const std::size_t L = t.length();
    if (tail_window == 0 || tail_window > L)
        throw data::DataError("sfcm features: bad tail window");
    std::vector<double> f;
    double slope = 0.0;
    for (const auto& bus : t.U) {
        double mean = 0.0, mn = bus[L - tail_window], mx = mn;
        for (std::size_t i = L - tail_window; i < L; ++i) {
            mean += bus[i];
            mn = std::min(mn, bus[i]);
            mx = std::max(mx, bus[i]);
        }
        mean /= double(tail_window);
        f.push_back(mean);
        f.push_back(mn);
        f.push_back(mx);
        // late slope: tail mean minus the mean over the window one tail-length
        // earlier, per second
        const std::size_t prev_end = L - tail_window;
        const std::size_t prev_start = prev_end >= tail_window ? prev_end - tail_window : 0;
        if (prev_end > prev_start) {
            double prev_mean = 0.0;
            for (std::size_t i = prev_start; i < prev_end; ++i) prev_mean += bus[i];
            prev_mean /= double(prev_end - prev_start);
            slope += (mean - prev_mean) * t.rate_hz / double(tail_window);
        }
    }
    f.push_back(slope / double(t.n_buses()));
    return f;
}

// Z-scored feature matrix over a whole trajectory set.
inline std::vector<std::vector<double>> sfcm_feature_matrix(const std::vector<data::Trajectory>& ts,
                                                            std::size_t tail_window) {
    std::vector<std::vector<double>> x;
    x.reserve(ts.size());
    for (const auto& t : ts) x.push_back(sfcm_features(t, tail_window));
    if (x.empty()) return x;
    const std::size_t dim = x[0].size();
    for (std::size_t k = 0; k < dim; ++k) {
        double mean = 0.0;
        for (const auto& row : x) mean += row[k];
        mean /= double(x.size());
        double var = 0.0;
        for (const auto& row : x) var += (row[k] - mean) * (row[k] - mean);
        var /= double(x.size());
        const double sd = std::sqrt(std::max(var, 1e-12));
        for (auto& row : x) row[k] = (row[k] - mean) / sd;
    }
    return x;
}

// Full labeling stage: heuristic priors in, every trajectory labeled out.
// Cluster identity follows the priors (cluster 0 = stable, 1 = unstable).
inline SfcmResult sfcm_label_trajectories(std::vector<data::Trajectory>& ts,
                                          std::size_t tail_window, const SfcmConfig& cfg) {
    auto x = sfcm_feature_matrix(ts, tail_window);
    SfcmPriors priors;
    priors.f.assign(ts.size(), std::vector<double>(cfg.n_clusters, 0.0));
    for (std::size_t i = 0; i < ts.size(); ++i)
        if (ts[i].label == data::kStable || ts[i].label == data::kUnstable)
            priors.f[i][static_cast<std::size_t>(ts[i].label)] = 1.0;
    SfcmResult res = sfcm_fit(x, priors, cfg);
    const auto hard = res.hard_labels();
    for (std::size_t i = 0; i < ts.size(); ++i) ts[i].label = static_cast<int>(hard[i]);
    return res;
}

}  // namespace qsta::cluster
