// Classification metrics and the RBF maximum-mean-discrepancy statistic.
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "qsta/metrics.hpp"
#include "qsta/rng.hpp"

using namespace qsta;
using metrics::Metrics;

namespace {

// Independent AUC oracle: explicit ROC sweep with trapezoidal integration,
// grouping tied scores so ties contribute diagonal segments.
double trapezoid_auc(const std::vector<double>& scores, const std::vector<std::size_t>& labels) {
    std::vector<std::size_t> idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double P = 0, N = 0;
    for (auto l : labels) (l == 1 ? P : N) += 1.0;
    double tp = 0, fp = 0, area = 0, tp_prev = 0, fp_prev = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            (labels[idx[j]] == 1 ? tp : fp) += 1.0;
            ++j;
        }
        area += (fp - fp_prev) * (tp + tp_prev) / 2.0;
        tp_prev = tp;
        fp_prev = fp;
        i = j;
    }
    return area / (P * N);
}

std::vector<std::vector<double>> gaussian_cloud(Rng& rng, std::size_t n, std::size_t d,
                                                double mean, double sd) {
    std::vector<std::vector<double>> out(n, std::vector<double>(d));
    for (auto& row : out)
        for (auto& v : row) v = mean + sd * rng.normal();
    return out;
}

}  // namespace

TEST_CASE("confusion counts, accuracy and F1 on a hand-checked case") {
    // TP=1 (first), FN=1 (second), TN=1 (third) -> F1 = 2/(2+0+1) = 2/3
    std::vector<std::size_t> y_true = {1, 1, 0};
    std::vector<std::size_t> y_pred = {1, 0, 0};
    Metrics m = metrics::evaluate_predictions(y_true, y_pred, {});
    REQUIRE(m.tp == 1);
    REQUIRE(m.fn == 1);
    REQUIRE(m.tn == 1);
    REQUIRE(m.fp == 0);
    REQUIRE(m.accuracy == Catch::Approx(2.0 / 3.0).margin(1e-15));
    REQUIRE(m.f1 == Catch::Approx(2.0 / 3.0).margin(1e-15));
    REQUIRE_FALSE(m.auc.has_value());
}

TEST_CASE("accuracy and F1 are recomputable from the confusion matrix") {
    Rng rng(20240811);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t n = 50;
        std::vector<std::size_t> yt(n), yp(n);
        for (std::size_t i = 0; i < n; ++i) {
            yt[i] = rng.uniform() < 0.5 ? 1 : 0;
            yp[i] = rng.uniform() < 0.5 ? 1 : 0;
        }
        Metrics m = metrics::evaluate_predictions(yt, yp, {});
        REQUIRE(m.total() == n);
        REQUIRE(m.accuracy ==
                Catch::Approx(double(m.tp + m.tn) / double(n)).margin(1e-15));
        const double denom = double(2 * m.tp + m.fp + m.fn);
        const double f1 = denom > 0 ? 2.0 * double(m.tp) / denom : 0.0;
        REQUIRE(m.f1 == Catch::Approx(f1).margin(1e-15));
    }
}

TEST_CASE("F1 is zero when there are no true or predicted positives") {
    Metrics m = metrics::evaluate_predictions({0, 0, 0}, {0, 0, 0}, {});
    REQUIRE(m.f1 == 0.0);
    REQUIRE(m.accuracy == 1.0);
}

TEST_CASE("rank AUC equals trapezoidal ROC integration within 1e-9") {
    Rng rng(7101);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 20 + static_cast<std::size_t>(rng.uniform() * 180);  // <= 200
        std::vector<double> s(n);
        std::vector<std::size_t> y(n);
        bool seen0 = false, seen1 = false;
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.uniform() < 0.4 ? 1 : 0;
            (y[i] == 1 ? seen1 : seen0) = true;
            // quantized scores so ties actually occur
            s[i] = std::round(rng.uniform() * 10.0) / 10.0 + (y[i] == 1 ? 0.15 : 0.0);
        }
        if (!seen0 || !seen1) continue;
        auto auc = metrics::auc_rank(s, y);
        REQUIRE(auc.has_value());
        REQUIRE(*auc == Catch::Approx(trapezoid_auc(s, y)).margin(1e-9));
    }
}

TEST_CASE("AUC is 1 for perfect ranking, 0 for inverted, 0.5 for constant scores") {
    std::vector<std::size_t> y = {0, 0, 1, 1};
    REQUIRE(*metrics::auc_rank({0.1, 0.2, 0.8, 0.9}, y) == Catch::Approx(1.0).margin(1e-15));
    REQUIRE(*metrics::auc_rank({0.9, 0.8, 0.2, 0.1}, y) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(*metrics::auc_rank({0.5, 0.5, 0.5, 0.5}, y) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("AUC is undefined when only one class is present") {
    REQUIRE_FALSE(metrics::auc_rank({0.1, 0.9}, {1, 1}).has_value());
    REQUIRE_FALSE(metrics::auc_rank({0.1, 0.9}, {0, 0}).has_value());
}

TEST_CASE("metric input validation") {
    REQUIRE_THROWS_AS(metrics::evaluate_predictions({1, 0}, {1}, {}), metrics::MetricsError);
    REQUIRE_THROWS_AS(metrics::evaluate_predictions({}, {}, {}), metrics::MetricsError);
    REQUIRE_THROWS_AS(metrics::auc_rank({0.1}, {0, 1}), metrics::MetricsError);
}

TEST_CASE("MMD of a set against itself is numerically zero") {
    Rng rng(99);
    auto x = gaussian_cloud(rng, 40, 5, 0.0, 1.0);
    const double v = metrics::mmd_rbf(x, x);
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1e-12);
}

TEST_CASE("MMD is symmetric and never negative") {
    Rng rng(100);
    auto x = gaussian_cloud(rng, 25, 4, 0.0, 1.0);
    auto y = gaussian_cloud(rng, 30, 4, 0.4, 1.2);
    const double xy = metrics::mmd_rbf(x, y);
    const double yx = metrics::mmd_rbf(y, x);
    REQUIRE(xy >= 0.0);
    REQUIRE(xy == Catch::Approx(yx).margin(1e-12));

    // same-size sets exercise the paired estimator path
    auto y2 = gaussian_cloud(rng, 25, 4, 0.3, 1.0);
    REQUIRE(metrics::mmd_rbf(x, y2) ==
            Catch::Approx(metrics::mmd_rbf(y2, x)).margin(1e-12));
}

TEST_CASE("MMD separates distant distributions") {
    Rng rng(101);
    auto x = gaussian_cloud(rng, 40, 3, 0.0, 0.5);
    auto y = gaussian_cloud(rng, 40, 3, 50.0, 0.5);  // cross-kernel ~ 0
    REQUIRE(metrics::mmd_rbf(x, y) > 0.5);
}

TEST_CASE("MMD grows with distribution shift") {
    Rng rng(102);
    auto x = gaussian_cloud(rng, 60, 3, 0.0, 1.0);
    auto near = gaussian_cloud(rng, 60, 3, 0.2, 1.0);
    auto far = gaussian_cloud(rng, 60, 3, 3.0, 1.0);
    const double bw = metrics::median_heuristic_bandwidth(x, x);
    REQUIRE(metrics::mmd_rbf(x, near, bw) < metrics::mmd_rbf(x, far, bw));
}

TEST_CASE("MMD requires at least two samples per set and matching dims") {
    std::vector<std::vector<double>> one = {{1.0, 2.0}};
    std::vector<std::vector<double>> two = {{1.0, 2.0}, {3.0, 4.0}};
    std::vector<std::vector<double>> odd = {{1.0}, {2.0}};
    REQUIRE_THROWS_AS(metrics::mmd_rbf(one, two), metrics::MetricsError);
    REQUIRE_THROWS_AS(metrics::mmd_rbf(two, one), metrics::MetricsError);
    REQUIRE_THROWS_AS(metrics::mmd_rbf(two, odd), metrics::MetricsError);
}

TEST_CASE("MMD is deterministic") {
    Rng rng(103);
    auto x = gaussian_cloud(rng, 20, 4, 0.0, 1.0);
    auto y = gaussian_cloud(rng, 22, 4, 1.0, 1.0);
    REQUIRE(metrics::mmd_rbf(x, y) == metrics::mmd_rbf(x, y));
}
