// Adversarial attacks: closed-form behavior on linear oracles, budget and
// mask soundness on the real model, the FGSM reduction, gray-box transfer,
// adversarial training, and the robustness grid.
#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "qsta/attacks.hpp"

using namespace qsta;
using attack::AdvExample;
using attack::AttackConfig;
using attack::ChannelSpec;
using attack::ThreatModel;

namespace {

// Binary linear oracle on scalar inputs: logits = [0, w*x + b].
auto scalar_oracle(double w, double b) {
    return [w, b](const std::vector<Tensor>& xs) {
        Tensor X = stack_rows(xs);  // [B x 1]
        Tensor Z = matmul(X, Tensor::matrix(1, 2, {0.0, w}));
        return add(Z, broadcast_rows(Tensor::row({0.0, b}), xs.size()));
    };
}

// Binary linear oracle on [1 x 2] inputs: logits = [0, w . x + b].
auto planar_oracle(double w0, double w1, double b) {
    return [w0, w1, b](const std::vector<Tensor>& xs) {
        Tensor X = stack_rows(xs);  // [B x 2]
        Tensor Z = matmul(X, Tensor::matrix(2, 2, {0.0, w0, 0.0, w1}));
        return add(Z, broadcast_rows(Tensor::row({0.0, b}), xs.size()));
    };
}

Tensor scalar_input(double v) {
    Tensor x = Tensor::zeros({1, 1});
    x.at(0, 0) = v;
    return x;
}

model::ModelConfig tiny_qsta_cfg() {
    model::ModelConfig cfg;
    cfg.variant = "qstaformer";
    cfg.seq_len = 3;
    cfg.feature_dim = 3;  // one bus: P, Q, U
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.d_ff = 8;
    cfg.n_encoder_layers = 2;
    cfg.n_classes = 2;
    cfg.circuit.n_qubits = 2;
    cfg.circuit.n_layers = 2;
    return cfg;
}

model::ModelConfig tiny_classical_cfg() {
    model::ModelConfig cfg = tiny_qsta_cfg();
    cfg.variant = "transformer";
    return cfg;
}

// Random plausible windows for the 1-bus layout (U near nominal).
data::WindowSet random_windows(std::size_t n, std::uint64_t seed) {
    data::WindowSet s;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        Tensor w = Tensor::zeros({3, 3});
        for (std::size_t t = 0; t < 3; ++t) {
            w.at(t, 0) = 0.8 + 0.1 * rng.normal();
            w.at(t, 1) = 0.4 + 0.1 * rng.normal();
            w.at(t, 2) = 0.9 + 0.05 * rng.normal();
        }
        s.push(w, i % 2, "w" + std::to_string(i));
    }
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear-oracle closed forms
// ---------------------------------------------------------------------------

TEST_CASE("sign attacks flip the scalar oracle exactly when margin/|w| < eps") {
    const double w = 2.0, b = -0.4, x0 = 0.6;
    const double margin = w * x0 + b;           // 0.8, class 1 side
    const double threshold = margin / std::abs(w);  // 0.4
    auto oracle = scalar_oracle(w, b);
    ChannelSpec chan = ChannelSpec::all_channels(1);

    for (const std::string method : {"mifgsm", "pgd"}) {
        for (double factor : {0.5, 0.9, 0.99, 1.01, 1.1, 2.0}) {
            AttackConfig cfg;
            cfg.method = method;
            cfg.epsilon = factor * threshold;
            Rng rng(7);
            auto ex = attack::run_attack(oracle, {scalar_input(x0)}, {1}, cfg, chan, &rng);
            REQUIRE(ex.size() == 1);
            REQUIRE(ex[0].pred_before == 1);
            const bool should_flip = cfg.epsilon >= threshold - 1e-9;
            INFO(method << " eps=" << cfg.epsilon);
            REQUIRE(ex[0].success == should_flip);
            REQUIRE(ex[0].linf <= cfg.epsilon + 1e-12);
        }
    }
}

TEST_CASE("attack loss is monotone nondecreasing over sign-attack steps") {
    const double w = 2.0, b = -0.4, x0 = 0.6;
    auto oracle = scalar_oracle(w, b);
    ChannelSpec chan = ChannelSpec::all_channels(1);
    double prev_loss = -1.0;
    for (std::size_t steps = 1; steps <= 10; ++steps) {
        AttackConfig cfg;
        cfg.method = "pgd";
        cfg.epsilon = 0.3;
        cfg.steps = steps;
        cfg.alpha = 0.3 / 10.0;  // fixed alpha <= eps across runs
        cfg.random_start = false;
        auto ex = attack::run_attack(oracle, {scalar_input(x0)}, {1}, cfg, chan);
        NoGradScope ng;
        const double loss = cross_entropy_batch(oracle({ex[0].x_adv}), {1}).value();
        REQUIRE(loss >= prev_loss - 1e-12);
        prev_loss = loss;
    }
}

TEST_CASE("optimization attack finds the least-norm boundary crossing") {
    // w = (3,4), |w| = 5, margin at x = 1 -> closed-form distance 0.2
    auto oracle = planar_oracle(3.0, 4.0, -1.4);
    Tensor x = Tensor::zeros({1, 2});
    x.at(0, 0) = 0.4;
    x.at(0, 1) = 0.3;  // margin = 1.2 + 1.2 - 1.4 = 1.0
    ChannelSpec chan = ChannelSpec::all_channels(2);
    AttackConfig cfg;
    cfg.method = "cw";
    cfg.epsilon = 0.0;  // unbounded
    auto ex = attack::cw_attack(oracle, {x}, {1}, cfg, chan);
    REQUIRE(ex[0].success);
    REQUIRE(ex[0].l2 >= 0.2 - 1e-9);
    REQUIRE(ex[0].l2 <= 0.2 + 0.15);
    // perturbation is collinear with w, pointed against the margin
    const double d0 = ex[0].x_adv.at(0, 0) - 0.4;
    const double d1 = ex[0].x_adv.at(0, 1) - 0.3;
    const double dot = 3.0 * d0 + 4.0 * d1;
    const double cosine = dot / (std::sqrt(d0 * d0 + d1 * d1) * 5.0);
    REQUIRE(cosine < -0.98);

    SECTION("an l2 budget below the boundary distance cannot succeed") {
        AttackConfig capped = cfg;
        capped.epsilon = 0.15;
        auto ex2 = attack::cw_attack(oracle, {x}, {1}, capped, chan);
        REQUIRE_FALSE(ex2[0].success);
        REQUIRE(ex2[0].l2 <= 0.15 + 1e-9);
    }
    SECTION("a budget above the distance succeeds") {
        AttackConfig roomy = cfg;
        roomy.epsilon = 0.5;
        auto ex2 = attack::cw_attack(oracle, {x}, {1}, roomy, chan);
        REQUIRE(ex2[0].success);
        REQUIRE(ex2[0].l2 <= 0.5 + 1e-9);
    }
}

TEST_CASE("already-misclassified inputs come back unchanged from the optimizer") {
    auto oracle = scalar_oracle(2.0, -0.4);
    Tensor x = scalar_input(0.1);  // margin -0.2: predicted 0, label 1
    AttackConfig cfg;
    cfg.method = "cw";
    auto ex = attack::cw_attack(oracle, {x}, {1}, cfg, ChannelSpec::all_channels(1));
    REQUIRE(ex[0].success);
    REQUIRE(ex[0].l2 == 0.0);
    REQUIRE(ex[0].x_adv.data() == ex[0].x_clean.data());
}

TEST_CASE("zero iterations leave the input untouched") {
    auto oracle = scalar_oracle(2.0, -0.4);
    Tensor x = scalar_input(0.6);
    AttackConfig cfg;
    cfg.method = "cw";
    cfg.cw_iters = 0;
    auto ex = attack::cw_attack(oracle, {x}, {1}, cfg, ChannelSpec::all_channels(1));
    REQUIRE(ex[0].x_adv.data() == ex[0].x_clean.data());
    REQUIRE_FALSE(ex[0].success);
}

TEST_CASE("zero gradient everywhere leaves the input unchanged") {
    auto oracle = scalar_oracle(0.0, 0.0);  // flat logits
    Tensor x = scalar_input(0.7);
    ChannelSpec chan = ChannelSpec::all_channels(1);
    for (const std::string method : {"mifgsm", "pgd"}) {
        AttackConfig cfg;
        cfg.method = method;
        cfg.epsilon = 0.3;
        cfg.random_start = false;
        auto ex = attack::run_attack(oracle, {x}, {0}, cfg, chan);
        REQUIRE(ex[0].x_adv.data() == ex[0].x_clean.data());
        REQUIRE_FALSE(ex[0].success);
    }
}

TEST_CASE("zero epsilon is the identity for sign attacks") {
    auto oracle = scalar_oracle(2.0, -0.4);
    Tensor x = scalar_input(0.6);
    ChannelSpec chan = ChannelSpec::all_channels(1);
    for (const std::string method : {"mifgsm", "pgd"}) {
        AttackConfig cfg;
        cfg.method = method;
        cfg.epsilon = 0.0;
        Rng rng(3);
        auto ex = attack::run_attack(oracle, {x}, {1}, cfg, chan, &rng);
        REQUIRE(ex[0].x_adv.data() == ex[0].x_clean.data());
        REQUIRE(ex[0].linf == 0.0);
    }
}

// ---------------------------------------------------------------------------
// Real model: reduction, budgets, masks, weight invariance
// ---------------------------------------------------------------------------

TEST_CASE("single-step momentum attack equals the sign-gradient formula bit-exactly") {
    model::Model m = model::Model::init(tiny_qsta_cfg(), 42);
    data::WindowSet ws = random_windows(2, 1);
    ChannelSpec chan = ChannelSpec::voltage_only(1);
    AttackConfig cfg;
    cfg.method = "mifgsm";
    cfg.epsilon = 0.05;
    cfg.steps = 1;
    cfg.mu = 0.0;

    auto ex = attack::attack_model(m, ws.x, ws.y, cfg, chan, 5);

    // manual single-step FGSM with the same loss
    std::vector<Tensor> xs;
    for (const auto& x : ws.x) {
        Tensor c = Tensor::zeros(x.shape(), true);
        c.data() = x.data();
        xs.push_back(c);
    }
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = cross_entropy_batch(m.forward_logits(xs), ws.y);
        tape.backward(loss);
    }
    for (std::size_t s = 0; s < xs.size(); ++s) {
        const std::size_t F = xs[s].cols();
        for (std::size_t i = 0; i < xs[s].size(); ++i) {
            double v = ws.x[s].data()[i];
            if (chan.mask[i % F] > 0.0) {
                const double g = xs[s].grad()[i];
                v += cfg.epsilon * ((g > 0.0) - (g < 0.0));
                v = std::clamp(v, chan.clamp_lo[i % F], chan.clamp_hi[i % F]);
            }
            REQUIRE(ex[s].x_adv.data()[i] == v);
        }
    }
}

TEST_CASE("all attacks respect budget, mask, clamp, and never touch weights") {
    model::Model m = model::Model::init(tiny_qsta_cfg(), 7);
    const std::uint64_t checksum = m.weight_checksum();
    data::WindowSet ws = random_windows(4, 2);
    ChannelSpec chan = ChannelSpec::voltage_only(1);

    for (const std::string method : {"mifgsm", "pgd", "cw"}) {
        AttackConfig cfg;
        cfg.method = method;
        cfg.epsilon = 0.05;
        cfg.steps = 3;
        cfg.cw_iters = 8;
        auto ex = attack::attack_model(m, ws.x, ws.y, cfg, chan, 11);
        REQUIRE(ex.size() == ws.size());
        for (std::size_t s = 0; s < ex.size(); ++s) {
            const auto& e = ex[s];
            // the clean copy is the original input
            REQUIRE(e.x_clean.data() == ws.x[s].data());
            if (method == "cw") {
                REQUIRE(e.l2 <= cfg.epsilon + 1e-9);
            } else {
                REQUIRE(e.linf <= cfg.epsilon + 1e-12);
            }
            for (std::size_t i = 0; i < e.x_adv.size(); ++i) {
                const std::size_t col = i % 3;
                if (col != 2) {  // P and Q are off-mask
                    REQUIRE(e.x_adv.data()[i] == e.x_clean.data()[i]);
                } else {
                    REQUIRE(e.x_adv.data()[i] >= 0.0);
                    REQUIRE(e.x_adv.data()[i] <= 1.5);
                }
            }
            REQUIRE(e.success == (e.pred_after != e.label));
        }
        REQUIRE(m.weight_checksum() == checksum);
    }
}

TEST_CASE("sign attacks actually perturb the voltage channel at nonzero budget") {
    model::Model m = model::Model::init(tiny_qsta_cfg(), 9);
    data::WindowSet ws = random_windows(2, 3);
    AttackConfig cfg;
    cfg.method = "pgd";
    cfg.epsilon = 0.03;
    cfg.steps = 4;
    auto ex = attack::attack_model(m, ws.x, ws.y, cfg, ChannelSpec::voltage_only(1), 13);
    for (const auto& e : ex) REQUIRE(e.linf > 0.0);
}

TEST_CASE("attacks are deterministic given the seed") {
    model::Model m = model::Model::init(tiny_classical_cfg(), 15);
    data::WindowSet ws = random_windows(3, 4);
    AttackConfig cfg;
    cfg.method = "pgd";
    cfg.epsilon = 0.05;
    cfg.steps = 3;
    auto a = attack::attack_model(m, ws.x, ws.y, cfg, ChannelSpec::voltage_only(1), 21);
    auto b = attack::attack_model(m, ws.x, ws.y, cfg, ChannelSpec::voltage_only(1), 21);
    auto c = attack::attack_model(m, ws.x, ws.y, cfg, ChannelSpec::voltage_only(1), 22);
    bool same = true, diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].x_adv.data() != b[i].x_adv.data()) same = false;
        if (a[i].x_adv.data() != c[i].x_adv.data()) diff = true;
    }
    REQUIRE(same);
    REQUIRE(diff);  // random start differs across seeds
}

// ---------------------------------------------------------------------------
// Gray-box transfer
// ---------------------------------------------------------------------------

TEST_CASE("a surrogate identical to the target reproduces white-box results") {
    model::Model target = model::Model::init(tiny_classical_cfg(), 33);
    model::Model twin = model::Model::init(tiny_classical_cfg(), 33);
    REQUIRE(target.weight_checksum() == twin.weight_checksum());
    data::WindowSet ws = random_windows(3, 6);
    AttackConfig cfg;
    cfg.method = "pgd";
    cfg.epsilon = 0.05;
    cfg.steps = 4;
    ChannelSpec chan = ChannelSpec::voltage_only(1);
    auto white = attack::attack_model(target, ws.x, ws.y, cfg, chan, 44);
    auto gray = attack::gray_box_attack(target, twin, ws.x, ws.y, cfg, chan, 44);
    REQUIRE(white.size() == gray.size());
    for (std::size_t i = 0; i < white.size(); ++i) {
        REQUIRE(white[i].x_adv.data() == gray[i].x_adv.data());
        REQUIRE(white[i].pred_after == gray[i].pred_after);
        REQUIRE(white[i].success == gray[i].success);
    }
}

TEST_CASE("surrogate distillation validates its inputs and trains end to end") {
    model::Model target = model::Model::init(tiny_qsta_cfg(), 50);
    data::WindowSet queries = random_windows(12, 7);
    REQUIRE_THROWS_AS(attack::distill_surrogate(target, queries, 0, 1), attack::AttackError);
    REQUIRE_THROWS_AS(attack::distill_surrogate(target, data::WindowSet{}, 2, 1),
                      attack::AttackError);

    model::Model surrogate = attack::distill_surrogate(target, queries, 2, 1);
    REQUIRE(surrogate.config().variant == "transformer");
    REQUIRE(surrogate.weight_checksum() != target.weight_checksum());

    AttackConfig cfg;
    cfg.method = "mifgsm";
    cfg.epsilon = 0.05;
    cfg.steps = 2;
    ChannelSpec chan = ChannelSpec::voltage_only(1);
    auto ex = attack::gray_box_attack(target, surrogate, queries.x, queries.y, cfg, chan, 3);
    REQUIRE(ex.size() == queries.size());
    for (const auto& e : ex) {
        REQUIRE(e.linf <= cfg.epsilon + 1e-12);
        REQUIRE(e.success == (e.pred_after != e.label));
    }
}

// ---------------------------------------------------------------------------
// Adversarial training and the robustness grid
// ---------------------------------------------------------------------------

TEST_CASE("adversarial training validates inputs and updates the model") {
    model::Model m = model::Model::init(tiny_classical_cfg(), 60);
    data::WindowSet tr = random_windows(8, 8);
    ChannelSpec chan = ChannelSpec::voltage_only(1);
    std::vector<AttackConfig> cfgs(1);
    cfgs[0].method = "pgd";
    cfgs[0].epsilon = 0.05;
    cfgs[0].steps = 2;
    harness::TrainConfig tc;
    tc.epochs = 1;
    tc.batch = 4;
    tc.lr_max = 1e-3;

    data::WindowSet empty;
    REQUIRE_THROWS_AS(attack::adversarial_training(m, empty, tr, cfgs, 0.5, chan, tc, 1),
                      attack::AttackError);
    REQUIRE_THROWS_AS(attack::adversarial_training(m, tr, tr, cfgs, 1.5, chan, tc, 1),
                      attack::AttackError);

    const std::uint64_t before = m.weight_checksum();
    auto res = attack::adversarial_training(m, tr, tr, cfgs, 0.5, chan, tc, 1);
    REQUIRE(res.loss_trace.size() == 1);
    REQUIRE(res.epochs_run == 1);
    REQUIRE(m.weight_checksum() != before);
    REQUIRE(std::isfinite(res.loss_trace[0]));
}

TEST_CASE("adversarial training is deterministic in the seed") {
    data::WindowSet tr = random_windows(8, 9);
    ChannelSpec chan = ChannelSpec::voltage_only(1);
    std::vector<AttackConfig> cfgs(2);
    cfgs[0].method = "pgd";
    cfgs[0].epsilon = 0.03;
    cfgs[0].steps = 2;
    cfgs[1].method = "mifgsm";
    cfgs[1].epsilon = 0.03;
    cfgs[1].steps = 2;
    harness::TrainConfig tc;
    tc.epochs = 1;
    tc.batch = 4;

    model::Model m1 = model::Model::init(tiny_classical_cfg(), 61);
    model::Model m2 = model::Model::init(tiny_classical_cfg(), 61);
    attack::adversarial_training(m1, tr, tr, cfgs, 0.5, chan, tc, 77);
    attack::adversarial_training(m2, tr, tr, cfgs, 0.5, chan, tc, 77);
    REQUIRE(m1.weight_checksum() == m2.weight_checksum());
}

TEST_CASE("robustness grid shape, zero-epsilon cell, and drop arithmetic") {
    model::Model m = model::Model::init(tiny_classical_cfg(), 70);
    data::WindowSet ev = random_windows(6, 10);
    AttackConfig base;
    base.steps = 2;
    base.cw_iters = 4;
    ChannelSpec chan = ChannelSpec::voltage_only(1);
    std::vector<ThreatModel> threats = {{"white_box", nullptr}};
    auto rep = attack::robustness_eval(m, ev, {"pgd", "mifgsm"}, threats, {0.0, 0.05}, base,
                                       chan, 5);
    REQUIRE(rep.cells.size() == 4);  // 2 methods x 1 threat x 2 epsilons
    for (const auto& cell : rep.cells) {
        REQUIRE(cell.accuracy >= 0.0);
        REQUIRE(cell.accuracy <= 1.0);
        if (cell.epsilon == 0.0) REQUIRE(cell.accuracy == rep.clean_accuracy);
    }
    double avg = 0.0;
    for (const auto& cell : rep.cells) avg += cell.accuracy / double(rep.cells.size());
    REQUIRE(rep.avg_robust == Catch::Approx(avg).margin(1e-12));
    REQUIRE(rep.drop == Catch::Approx(rep.clean_accuracy - avg).margin(1e-12));

    SECTION("gray-box threat requires a distinct surrogate") {
        std::vector<ThreatModel> bad = {{"gray_box", nullptr}};
        REQUIRE_THROWS_AS(attack::robustness_eval(m, ev, {"pgd"}, bad, {0.01}, base, chan, 5),
                          attack::AttackError);
        std::vector<ThreatModel> self = {{"gray_box", &m}};
        REQUIRE_THROWS_AS(attack::robustness_eval(m, ev, {"pgd"}, self, {0.01}, base, chan, 5),
                          attack::AttackError);
        std::vector<ThreatModel> unknown = {{"black_box", nullptr}};
        REQUIRE_THROWS_AS(attack::robustness_eval(m, ev, {"pgd"}, unknown, {0.01}, base, chan, 5),
                          attack::AttackError);
    }
}
