#pragma once

// Classification metrics and the kernel two-sample distance.
//
// Conventions: class 1 ("unstable") is the positive class for F1; AUC is the
// Mann-Whitney rank statistic over class-1 scores with midranks for ties,
// reported as absent when the evaluation set is single-class.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace qsta::metrics {

struct Metrics {
    double accuracy = 0.0;
    double f1 = 0.0;
    std::optional<double> auc;  // absent on single-class sets
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::vector<double> loss_trace;  // per-epoch train loss, when applicable

    std::size_t total() const { return tp + fp + tn + fn; }
};

class MetricsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// AUC from scores for the positive class, ties by midrank. Returns nullopt
// when either class is empty.
inline std::optional<double> auc_rank(const std::vector<double>& scores,
                                      const std::vector<std::size_t>& labels) {
    if (scores.size() != labels.size())
        throw MetricsError("auc: size mismatch between scores and labels");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * (double(i) + double(j)) + 1.0;  // 1-based midrank
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (labels[k] == 1) {
            pos_rank_sum += rank[k];
            ++n_pos;
        }
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;
    return (pos_rank_sum - 0.5 * double(n_pos) * double(n_pos + 1)) /
           (double(n_pos) * double(n_neg));
}

// Metrics from hard predictions plus class-1 scores.
inline Metrics evaluate_predictions(const std::vector<std::size_t>& y_true,
                                    const std::vector<std::size_t>& y_pred,
                                    const std::vector<double>& scores) {
    if (y_true.size() != y_pred.size())
        throw MetricsError("evaluate: size mismatch between labels and predictions");
    if (!scores.empty() && scores.size() != y_true.size())
        throw MetricsError("evaluate: size mismatch between labels and scores");
    if (y_true.empty()) throw MetricsError("evaluate: empty evaluation set");
    Metrics m;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const bool pos = y_true[i] == 1, pred_pos = y_pred[i] == 1;
        if (pos && pred_pos)
            ++m.tp;
        else if (!pos && pred_pos)
            ++m.fp;
        else if (pos && !pred_pos)
            ++m.fn;
        else
            ++m.tn;
    }
    m.accuracy = double(m.tp + m.tn) / double(m.total());
    const double denom = 2.0 * double(m.tp) + double(m.fp) + double(m.fn);
    m.f1 = denom > 0.0 ? 2.0 * double(m.tp) / denom : 0.0;
    if (!scores.empty()) m.auc = auc_rank(scores, y_true);
    return m;
}

// ---------------------------------------------------------------------------
// Maximum mean discrepancy
// ---------------------------------------------------------------------------

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

}  // namespace detail

// Median pairwise distance over the pooled set (excluding self-pairs); the
// default RBF bandwidth. Falls back to 1 when all points coincide.
inline double median_heuristic_bandwidth(const std::vector<std::vector<double>>& x,
                                         const std::vector<std::vector<double>>& y) {
    std::vector<const std::vector<double>*> all;
    for (const auto& r : x) all.push_back(&r);
    for (const auto& r : y) all.push_back(&r);
    std::vector<double> d;
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            d.push_back(std::sqrt(detail::sq_dist(*all[i], *all[j])));
    if (d.empty()) return 1.0;
    std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
    const double med = d[d.size() / 2];
    return med > 0.0 ? med : 1.0;
}

// Squared maximum mean discrepancy with an RBF kernel
// k(a,b) = exp(-||a-b||^2 / (2 sigma^2)), unbiased U-statistic form,
// clamped at zero. bandwidth <= 0 selects the median heuristic. For equal
// sample counts the paired form is used, which is exactly zero on identical
// sets; far-separated sets plateau at roughly twice the within-set kernel
// mean.
inline double mmd_rbf(const std::vector<std::vector<double>>& x,
                      const std::vector<std::vector<double>>& y, double bandwidth = 0.0) {
    const std::size_t m = x.size(), n = y.size();
    if (m < 2 || n < 2) throw MetricsError("mmd: need at least 2 samples per set");
    const std::size_t dim = x[0].size();
    for (const auto& r : x)
        if (r.size() != dim) throw MetricsError("mmd: ragged feature dimensions");
    for (const auto& r : y)
        if (r.size() != dim) throw MetricsError("mmd: feature dimension mismatch between sets");
    const double sigma = bandwidth > 0.0 ? bandwidth : median_heuristic_bandwidth(x, y);
    const double gamma = 1.0 / (2.0 * sigma * sigma);
    auto k = [gamma](const std::vector<double>& a, const std::vector<double>& b) {
        return std::exp(-gamma * detail::sq_dist(a, b));
    };
    double est;
    if (m == n) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                if (i == j) continue;
                s += k(x[i], x[j]) + k(y[i], y[j]) - k(x[i], y[j]) - k(x[j], y[i]);
            }
        est = s / (double(m) * double(m - 1));
    } else {
        double sxx = 0.0, syy = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (i != j) sxx += k(x[i], x[j]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) syy += k(y[i], y[j]);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) sxy += k(x[i], y[j]);
        est = sxx / (double(m) * double(m - 1)) + syy / (double(n) * double(n - 1)) -
              2.0 * sxy / (double(m) * double(n));
    }
    return std::max(est, 0.0);
}

}  // namespace qsta::metrics
