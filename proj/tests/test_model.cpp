#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "qsta/checkpoint.hpp"
#include "qsta/model.hpp"
#include "qsta/rng.hpp"

using namespace qsta;
using namespace qsta::model;

namespace {

ModelConfig tiny_config(const std::string& variant = "qstaformer") {
    ModelConfig c;
    c.variant = variant;
    c.seq_len = 3;
    c.feature_dim = 3;
    c.d_model = 8;
    c.n_heads = 2;
    c.d_ff = 8;
    c.n_encoder_layers = 2;
    c.n_classes = 2;
    c.circuit.n_qubits = 2;
    c.circuit.n_layers = 2;
    return c;
}

Tensor random_input(Rng& rng, std::size_t L, std::size_t F, double lo = -1.0, double hi = 1.0) {
    Tensor x = Tensor::zeros({L, F});
    for (auto& v : x.data()) v = rng.uniform(lo, hi);
    return x;
}

void zero_param(Model& m, const std::string& name) {
    for (auto& v : m.param(name).data()) v = 0.0;
}

}  // namespace

// ===========================================================================
// positional encoding and embedding
// ===========================================================================

TEST_CASE("positional encoding row 0 alternates sin(0), cos(0)") {
    Tensor pe = positional_encoding(4, 6);
    for (std::size_t i = 0; i < 6; ++i)
        REQUIRE(pe.at(0, i) == Catch::Approx(i % 2 == 0 ? 0.0 : 1.0).margin(1e-15));
    for (double v : pe.data()) {
        REQUIRE(v >= -1.0);
        REQUIRE(v <= 1.0);
    }
}

TEST_CASE("embedding of zero input with zero weights is the positional table") {
    Model m = Model::init(tiny_config(), 1);
    zero_param(m, "embed.W");
    zero_param(m, "embed.b");
    // LayerNorm of a constant row is 0 with identity affine (the init default),
    // so the embedding reduces to the positional table.
    Tensor x = Tensor::zeros({3, 3});
    Tensor h = m.embed({x});
    Tensor pe = positional_encoding(3, 8);
    REQUIRE(h.shape() == std::vector<std::size_t>{3, 8});
    for (std::size_t i = 0; i < h.size(); ++i)
        REQUIRE(h.data()[i] == Catch::Approx(pe.data()[i]).margin(1e-12));
}

TEST_CASE("embedding rejects mismatched input shapes") {
    Model m = Model::init(tiny_config(), 1);
    REQUIRE_THROWS_AS(m.forward_logits({Tensor::zeros({3, 5})}), TensorError);
    REQUIRE_THROWS_AS(m.forward_logits({Tensor::zeros({7, 3})}), TensorError);
}

// ===========================================================================
// attention
// ===========================================================================

TEST_CASE("attention over a single position is the identity mix") {
    Rng rng(2);
    Tensor Q = random_input(rng, 1, 4), K = random_input(rng, 1, 4), V = random_input(rng, 1, 4);
    std::vector<Tensor> attn;
    Tensor ctx = multi_head_attention(Q, K, V, 2, &attn);
    REQUIRE(attn.size() == 2);
    for (const auto& A : attn) {
        REQUIRE(A.shape() == std::vector<std::size_t>{1, 1});
        REQUIRE(A.at(0, 0) == Catch::Approx(1.0).margin(1e-15));
    }
    for (std::size_t i = 0; i < 4; ++i)
        REQUIRE(ctx.data()[i] == Catch::Approx(V.data()[i]).margin(1e-15));
}

TEST_CASE("attention matrices are row-stochastic") {
    Rng rng(3);
    Tensor Q = random_input(rng, 5, 8), K = random_input(rng, 5, 8), V = random_input(rng, 5, 8);
    std::vector<Tensor> attn;
    multi_head_attention(Q, K, V, 4, &attn);
    REQUIRE(attn.size() == 4);
    for (const auto& A : attn) {
        for (std::size_t r = 0; r < A.rows(); ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < A.cols(); ++c) {
                REQUIRE(A.at(r, c) >= 0.0);
                s += A.at(r, c);
            }
            REQUIRE(s == Catch::Approx(1.0).margin(1e-12));
        }
    }
}

TEST_CASE("zero value projection collapses attention output to zero") {
    Rng rng(4);
    Tensor Q = random_input(rng, 4, 4), K = random_input(rng, 4, 4);
    Tensor V = Tensor::zeros({4, 4});
    Tensor ctx = multi_head_attention(Q, K, V, 2);
    for (double v : ctx.data()) REQUIRE(v == 0.0);
}

// ===========================================================================
// classifier head
// ===========================================================================

TEST_CASE("zero classifier weights give uniform probabilities") {
    Model m = Model::init(tiny_config(), 5);
    zero_param(m, "cls.W");
    zero_param(m, "cls.b");
    Rng rng(6);
    auto probs = m.predict_proba({random_input(rng, 3, 3)});
    REQUIRE(probs.size() == 1);
    REQUIRE(probs[0][0] == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(probs[0][1] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("classifier bias dominates when weights are zero") {
    Model m = Model::init(tiny_config(), 5);
    zero_param(m, "cls.W");
    m.param("cls.b").data() = {10.0, -10.0};
    Rng rng(6);
    auto probs = m.predict_proba({random_input(rng, 3, 3)});
    REQUIRE(probs[0][0] == Catch::Approx(1.0).margin(1e-8));
    auto labels = m.predict({random_input(rng, 3, 3)});
    REQUIRE(labels[0] == 0);
}

// ===========================================================================
// batching
// ===========================================================================

TEST_CASE("batched forward equals per-sample forward bit-exactly") {
    for (const char* variant : {"qstaformer", "transformer", "lstm"}) {
        Model m = Model::init(tiny_config(variant), 7);
        Rng rng(8);
        Tensor x1 = random_input(rng, 3, 3);
        Tensor x2 = random_input(rng, 3, 3);
        Tensor x3 = random_input(rng, 3, 3);
        NoGradScope ng;
        Tensor batch = m.forward_logits({x1, x2, x3});
        Tensor single1 = m.forward_logits({x1});
        Tensor single3 = m.forward_logits({x3});
        for (std::size_t c = 0; c < 2; ++c) {
            REQUIRE(batch.at(0, c) == single1.at(0, c));
            REQUIRE(batch.at(2, c) == single3.at(0, c));
        }
        // permuting the batch permutes the outputs identically
        Tensor swapped = m.forward_logits({x3, x2, x1});
        for (std::size_t c = 0; c < 2; ++c) {
            REQUIRE(swapped.at(0, c) == batch.at(2, c));
            REQUIRE(swapped.at(2, c) == batch.at(0, c));
        }
    }
}

TEST_CASE("probability rows sum to one for every variant") {
    Rng rng(9);
    for (const char* variant : {"qstaformer", "transformer", "lstm"}) {
        Model m = Model::init(tiny_config(variant), 10);
        auto probs = m.predict_proba({random_input(rng, 3, 3), random_input(rng, 3, 3)});
        REQUIRE(probs.size() == 2);
        for (const auto& row : probs)
            REQUIRE(row[0] + row[1] == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("unknown variant is rejected") {
    ModelConfig c = tiny_config("qlstm");
    REQUIRE_THROWS_WITH(Model::init(c, 0), Catch::Matchers::ContainsSubstring("variant"));
}

// ===========================================================================
// quantum layer degeneracy
// ===========================================================================

TEST_CASE("zeroed quantum output projection reduces to the classical baseline") {
    Model q = Model::init(tiny_config("qstaformer"), 11);
    Model t = Model::init(tiny_config("transformer"), 12);
    // share every weight the two variants have in common
    for (auto& p : t.params()) p.tensor.data() = q.param(p.name).data();
    zero_param(q, "enc1.q.Wout");
    Rng rng(13);
    NoGradScope ng;
    for (int trial = 0; trial < 3; ++trial) {
        Tensor x = random_input(rng, 3, 3);
        Tensor lq = q.forward_logits({x});
        Tensor lt = t.forward_logits({x});
        for (std::size_t c = 0; c < 2; ++c)
            REQUIRE(lq.at(0, c) == Catch::Approx(lt.at(0, c)).margin(1e-12));
    }
}

TEST_CASE("lstm with zero weights yields a constant (uniform) head input") {
    Model m = Model::init(tiny_config("lstm"), 14);
    zero_param(m, "lstm.Wx");
    zero_param(m, "lstm.Wh");
    zero_param(m, "lstm.b");
    zero_param(m, "cls.W");
    zero_param(m, "cls.b");
    Rng rng(15);
    auto probs = m.predict_proba({random_input(rng, 3, 3), random_input(rng, 3, 3)});
    for (const auto& row : probs) {
        REQUIRE(row[0] == Catch::Approx(0.5).margin(1e-12));
        REQUIRE(row[1] == Catch::Approx(0.5).margin(1e-12));
    }
}

// ===========================================================================
// gradients
// ===========================================================================

TEST_CASE("end-to-end gradients match finite differences for every weight group") {
    Model m = Model::init(tiny_config("qstaformer"), 16);
    Rng rng(17);
    std::vector<Tensor> xs{random_input(rng, 3, 3), random_input(rng, 3, 3)};
    std::vector<std::size_t> ys{0, 1};
    auto loss_fn = [&] { return cross_entropy_batch(m.forward_logits(xs), ys); };
    for (auto& p : m.params()) {
        const double err = finite_diff_check(loss_fn, {p.tensor});
        INFO("weight group " << p.name);
        REQUIRE(err <= 1e-4);
    }
}

TEST_CASE("input gradients flow through the circuit via parameter shift") {
    Model m = Model::init(tiny_config("qstaformer"), 18);
    Rng rng(19);
    Tensor x = random_input(rng, 3, 3);
    x.set_requires_grad(true);
    auto loss_fn = [&] { return cross_entropy_batch(m.forward_logits({x}), {1}); };
    REQUIRE(finite_diff_check(loss_fn, {x}) <= 1e-4);
}

TEST_CASE("frozen circuit parameters receive no gradient") {
    Model m = Model::init(tiny_config("qstaformer"), 20);
    m.param("enc1.q.theta").set_requires_grad(false);
    Rng rng(21);
    Tensor x = random_input(rng, 3, 3);
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = cross_entropy_batch(m.forward_logits({x}), {0});
    tape.backward(loss);
    REQUIRE(!m.param("enc1.q.theta").has_grad());
    REQUIRE(m.param("cls.W").has_grad());
}

// ===========================================================================
// checkpoints
// ===========================================================================

TEST_CASE("checkpoints round-trip bit-exactly") {
    Model m = Model::init(tiny_config("qstaformer"), 22);
    const std::string path = "test_model_ckpt.bin";
    save_checkpoint(m, path);
    Model r = load_checkpoint(path);
    REQUIRE(r.config().variant == "qstaformer");
    REQUIRE(r.params().size() == m.params().size());
    for (const auto& p : m.params()) {
        const auto& restored = r.param(p.name).data();
        REQUIRE(restored.size() == p.tensor.data().size());
        for (std::size_t i = 0; i < restored.size(); ++i)
            REQUIRE(restored[i] == p.tensor.data()[i]);
    }
    REQUIRE(r.weight_checksum() == m.weight_checksum());
    Rng rng(23);
    Tensor x = random_input(rng, 3, 3);
    NoGradScope ng;
    Tensor a = m.forward_logits({x});
    Tensor b = r.forward_logits({x});
    REQUIRE(a.at(0, 0) == b.at(0, 0));
    REQUIRE(a.at(0, 1) == b.at(0, 1));
    std::remove(path.c_str());
}

TEST_CASE("checkpoint load rejects corrupted files") {
    const std::string path = "test_model_bad.bin";
    {
        std::ofstream os(path, std::ios::binary);
        os << "not a checkpoint";
    }
    REQUIRE_THROWS_WITH(load_checkpoint(path), Catch::Matchers::ContainsSubstring("magic"));
    std::remove(path.c_str());
}
