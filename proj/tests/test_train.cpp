// Minibatch training harness: accounting, determinism, early stopping,
// divergence guard, and actual learning on a separable toy problem.
#include <cmath>
#include <limits>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "qsta/train.hpp"

using namespace qsta;
using harness::TrainConfig;
using harness::TrainResult;

namespace {

// Two voltage regimes: recovered (U ~ 1) vs depressed (U ~ 0.4).
data::WindowSet toy_set(std::size_t per_class, std::uint64_t seed) {
    data::WindowSet s;
    Rng rng(seed);
    for (std::size_t cls = 0; cls < 2; ++cls) {
        for (std::size_t i = 0; i < per_class; ++i) {
            Tensor w = Tensor::zeros({4, 3});
            const double u = cls == 0 ? 1.0 : 0.4;
            for (std::size_t t = 0; t < 4; ++t) {
                w.at(t, 0) = 0.9 * u + 0.02 * rng.normal();  // active power tracks voltage
                w.at(t, 1) = 0.45 + 0.02 * rng.normal();
                w.at(t, 2) = u + 0.02 * rng.normal();
            }
            s.push(w, cls, "toy-" + std::to_string(cls) + "-" + std::to_string(i));
        }
    }
    return s;
}

model::ModelConfig toy_model_cfg() {
    model::ModelConfig cfg;
    cfg.variant = "transformer";
    cfg.seq_len = 4;
    cfg.feature_dim = 3;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.d_ff = 8;
    cfg.n_encoder_layers = 2;
    cfg.n_classes = 2;
    return cfg;
}

}  // namespace

TEST_CASE("training requires a non-empty training set") {
    model::Model m = model::Model::init(toy_model_cfg(), 1);
    data::WindowSet empty;
    data::WindowSet test = toy_set(2, 9);
    REQUIRE_THROWS_AS(harness::train(m, empty, test, TrainConfig{}, 0), harness::TrainError);
}

TEST_CASE("zero epochs only evaluates") {
    model::Model m = model::Model::init(toy_model_cfg(), 2);
    data::WindowSet set = toy_set(4, 10);
    TrainConfig cfg;
    cfg.epochs = 0;
    TrainResult r = harness::train(m, set, set, cfg, 0);
    REQUIRE(r.epochs_run == 0);
    REQUIRE(r.loss_trace.empty());
    REQUIRE(r.final_metrics.total() == set.size());
    REQUIRE(r.final_metrics.accuracy >= 0.0);
}

TEST_CASE("per-epoch traces have one entry per epoch") {
    model::Model m = model::Model::init(toy_model_cfg(), 3);
    data::WindowSet tr = toy_set(6, 11);
    data::WindowSet te = toy_set(3, 12);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch = 4;
    cfg.lr_max = 1e-3;
    TrainResult r = harness::train(m, tr, te, cfg, 5);
    REQUIRE(r.epochs_run == 3);
    REQUIRE(r.loss_trace.size() == 3);
    REQUIRE(r.test_trace.size() == 3);
    REQUIRE(r.final_metrics.loss_trace == r.loss_trace);
    for (double v : r.loss_trace) {
        REQUIRE(std::isfinite(v));
        REQUIRE(v > 0.0);
    }
}

TEST_CASE("training is deterministic in the seed") {
    data::WindowSet tr = toy_set(6, 13);
    data::WindowSet te = toy_set(3, 14);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch = 4;
    cfg.lr_max = 1e-3;

    model::Model m1 = model::Model::init(toy_model_cfg(), 7);
    model::Model m2 = model::Model::init(toy_model_cfg(), 7);
    TrainResult r1 = harness::train(m1, tr, te, cfg, 21);
    TrainResult r2 = harness::train(m2, tr, te, cfg, 21);
    REQUIRE(r1.loss_trace == r2.loss_trace);
    REQUIRE(m1.weight_checksum() == m2.weight_checksum());

    model::Model m3 = model::Model::init(toy_model_cfg(), 7);
    TrainResult r3 = harness::train(m3, tr, te, cfg, 22);  // different shuffle
    REQUIRE(r1.loss_trace != r3.loss_trace);
}

TEST_CASE("the loop learns a separable voltage problem") {
    data::WindowSet tr = toy_set(20, 15);
    model::Model m = model::Model::init(toy_model_cfg(), 8);
    TrainConfig cfg;
    cfg.epochs = 12;
    cfg.batch = 8;
    cfg.lr_max = 3e-3;
    cfg.lr_min = 1e-3;
    TrainResult r = harness::train(m, tr, tr, cfg, 31);
    REQUIRE(r.final_metrics.accuracy >= 0.99);
    REQUIRE(r.loss_trace.back() < r.loss_trace.front());
    REQUIRE(r.final_metrics.auc.has_value());
    REQUIRE(*r.final_metrics.auc >= 0.99);
}

TEST_CASE("early stopping fires as soon as the targets are met") {
    data::WindowSet tr = toy_set(6, 16);
    model::Model m = model::Model::init(toy_model_cfg(), 9);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch = 4;
    cfg.stop_accuracy = 0.0;  // met by any evaluation
    TrainResult r = harness::train(m, tr, tr, cfg, 3);
    REQUIRE(r.early_stopped);
    REQUIRE(r.epochs_run == 1);
    REQUIRE(r.test_trace.size() == 1);
}

TEST_CASE("non-finite loss raises a training error") {
    data::WindowSet tr = toy_set(4, 17);
    model::Model m = model::Model::init(toy_model_cfg(), 10);
    m.params()[0].tensor.data()[0] = std::numeric_limits<double>::quiet_NaN();
    TrainConfig cfg;
    cfg.epochs = 1;
    REQUIRE_THROWS_AS(harness::train(m, tr, tr, cfg, 0), harness::TrainError);
}

TEST_CASE("the LSTM variant trains through the same loop") {
    data::WindowSet tr = toy_set(6, 18);
    model::ModelConfig mc = toy_model_cfg();
    mc.variant = "lstm";
    model::Model m = model::Model::init(mc, 11);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch = 4;
    TrainResult r = harness::train(m, tr, tr, cfg, 1);
    REQUIRE(r.loss_trace.size() == 2);
    for (double v : r.loss_trace) REQUIRE(std::isfinite(v));
}
