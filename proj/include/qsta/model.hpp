#pragma once

// The hybrid sequence classifier and its two classical baselines.
//
// qstaformer: embedding + sinusoidal positions -> (N-1) classical encoder
// layers (post-LN, ReLU FFN) -> one quantum encoder layer (attention sublayer,
// then per-position circuit readout mixed back residually, GELU FFN) -> the
// last position's features feed a linear classifier.
//
// transformer: the same stack with the circuit removed, i.e. the final layer
// is a classical layer with the GELU FFN. With the quantum output projection
// zeroed and identical remaining weights the two variants coincide exactly.
//
// lstm: a single recurrent cell over the sequence; last hidden state -> head.
//
// Batches are processed as one stacked [B*L x d] matrix wherever the math is
// per-position; attention and the recurrence loop over samples.

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "qsta/optim.hpp"
#include "qsta/quantum.hpp"
#include "qsta/rng.hpp"
#include "qsta/tensor.hpp"

namespace qsta::model {

struct ModelConfig {
    std::string variant = "qstaformer";  // qstaformer | transformer | lstm
    std::size_t seq_len = 10;            // L
    std::size_t feature_dim = 9;         // F
    std::size_t d_model = 32;            // d
    std::size_t n_heads = 4;
    std::size_t d_ff = 64;
    std::size_t n_encoder_layers = 2;  // N: N-1 classical + 1 quantum (or N classical)
    std::size_t n_classes = 2;
    quantum::CircuitSpec circuit;  // defaults: 4 main qubits, 4 layers

    void validate() const {
        if (variant != "qstaformer" && variant != "transformer" && variant != "lstm")
            throw std::invalid_argument("model: unknown variant '" + variant + "'");
        if (d_model % n_heads != 0)
            throw std::invalid_argument("model: d_model " + std::to_string(d_model) +
                                        " not divisible by n_heads " + std::to_string(n_heads));
        if (n_encoder_layers < 1) throw std::invalid_argument("model: need at least one layer");
        if (n_classes < 2) throw std::invalid_argument("model: need at least two classes");
        if (seq_len < 1 || feature_dim < 1)
            throw std::invalid_argument("model: empty sequence or feature dimension");
    }
};

// Standard sinusoidal table: PE[pos][2i] = sin(pos/10000^{2i/d}), odd -> cos.
inline Tensor positional_encoding(std::size_t L, std::size_t d) {
    Tensor pe = Tensor::zeros({L, d});
    for (std::size_t pos = 0; pos < L; ++pos) {
        for (std::size_t i = 0; i < d; i += 2) {
            const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
            pe.at(pos, i) = std::sin(static_cast<double>(pos) * freq);
            if (i + 1 < d) pe.at(pos, i + 1) = std::cos(static_cast<double>(pos) * freq);
        }
    }
    return pe;
}

// Per-position time-step signal added to every angle channel: a bounded,
// zero-centered ramp pi*(i/(L-1)) - pi/2 over the sequence.
inline double time_signal(std::size_t pos, std::size_t L) {
    if (L < 2) return 0.0;
    constexpr double kPi = 3.14159265358979323846;
    return kPi * (static_cast<double>(pos) / static_cast<double>(L - 1)) - kPi / 2;
}

// ---------------------------------------------------------------------------
// circuit readout as a tape op
// ---------------------------------------------------------------------------

// angles: [R x n] rotation inputs, one circuit evaluation per row; theta holds
// the trainable circuit parameters [n_layers x (n_qubits+1)]. The backward
// pass uses parameter-shift jacobians and skips rows whose upstream gradient
// is identically zero -- with a last-position classifier that is every row
// except the final one of each sample.
inline Tensor circuit_layer(const quantum::CircuitSpec& spec, const Tensor& theta,
                            const Tensor& angles) {
    const std::size_t n = spec.n_qubits;
    if (angles.ndim() != 2 || angles.cols() != n)
        throw TensorError("circuit_layer: angles shape " + detail::shape_str(angles.shape()) +
                          " does not provide " + std::to_string(n) + " rotation channels");
    if (theta.size() != spec.n_params())
        throw TensorError("circuit_layer: theta size " + std::to_string(theta.size()) +
                          " does not match circuit (" + std::to_string(spec.n_params()) +
                          " parameters)");
    const std::size_t rows = angles.rows();
    const bool want_theta = theta.requires_grad();
    const bool want_angles = angles.requires_grad();
    bool rec = active_tape() && (want_theta || want_angles);

    quantum::CircuitParams cp(spec.n_layers, n + 1);
    cp.theta = theta.data();
    Tensor out = Tensor::zeros({rows, n}, want_theta || want_angles);
    std::vector<double> feats(n);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) feats[j] = angles.at(r, j);
        const auto exps = quantum::run_circuit(spec, cp, feats);
        for (std::size_t j = 0; j < n; ++j) out.at(r, j) = exps[j];
    }
    if (rec) {
        auto ti = theta.impl(), ai = angles.impl(), oi = out.impl();
        active_tape()->record(
            [spec, ti, ai, oi, rows, n, want_theta, want_angles] {
                quantum::CircuitParams params(spec.n_layers, n + 1);
                params.theta = ti->data;
                std::vector<double> f(n);
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* g = oi->scratch.data() + r * n;
                    bool live = false;
                    for (std::size_t j = 0; j < n; ++j)
                        if (g[j] != 0.0) {
                            live = true;
                            break;
                        }
                    if (!live) continue;
                    for (std::size_t j = 0; j < n; ++j) f[j] = ai->data[r * n + j];
                    const auto jac =
                        quantum::circuit_jacobian(spec, params, f, want_theta, want_angles);
                    if (want_theta)
                        for (std::size_t p = 0; p < jac.n_theta; ++p)
                            for (std::size_t j = 0; j < n; ++j)
                                ti->scratch[p] += jac.d_theta[p * n + j] * g[j];
                    if (want_angles)
                        for (std::size_t p = 0; p < n; ++p)
                            for (std::size_t j = 0; j < n; ++j)
                                ai->scratch[r * n + p] += jac.d_features[p * n + j] * g[j];
                }
            },
            {theta, angles, out});
    }
    return out;
}

// Scaled dot-product attention over one sample's pre-projected Q/K/V rows
// [L x d], split into n_heads column blocks. Head attention matrices (row-
// stochastic, queries in rows) are appended to attn_out when it is non-null.
inline Tensor multi_head_attention(const Tensor& Qs, const Tensor& Ks, const Tensor& Vs,
                                   std::size_t n_heads, std::vector<Tensor>* attn_out = nullptr) {
    const std::size_t d = Qs.cols();
    if (d % n_heads != 0)
        throw TensorError("attention: width " + std::to_string(d) + " not divisible by " +
                          std::to_string(n_heads) + " heads");
    const std::size_t dk = d / n_heads;
    const double scl = 1.0 / std::sqrt(static_cast<double>(dk));
    Tensor ctx;
    for (std::size_t h = 0; h < n_heads; ++h) {
        Tensor Qh = slice(Qs, 1, h * dk, dk);
        Tensor Kh = slice(Ks, 1, h * dk, dk);
        Tensor Vh = slice(Vs, 1, h * dk, dk);
        Tensor A = softmax(scale(matmul(Qh, transpose(Kh)), scl), 1);
        if (attn_out) attn_out->push_back(A);
        Tensor Ch = matmul(A, Vh);
        ctx = (h == 0) ? Ch : concat(ctx, Ch, 1);
    }
    return ctx;
}

// ---------------------------------------------------------------------------
// model
// ---------------------------------------------------------------------------

class Model {
public:
    Model() = default;

    static Model init(const ModelConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        Model m;
        m.cfg_ = cfg;
        Rng rng = Rng::derive(seed, "model_init");
        if (cfg.variant == "lstm") {
            m.add_xavier(rng, "lstm.Wx", cfg.feature_dim, 4 * cfg.d_model);
            m.add_xavier(rng, "lstm.Wh", cfg.d_model, 4 * cfg.d_model);
            m.add_zeros("lstm.b", {4 * cfg.d_model});
        } else {
            m.add_xavier(rng, "embed.W", cfg.feature_dim, cfg.d_model);
            m.add_zeros("embed.b", {cfg.d_model});
            m.add_ones("embed.ln.g", cfg.d_model);
            m.add_zeros("embed.ln.b", {cfg.d_model});
            for (std::size_t l = 0; l < cfg.n_encoder_layers; ++l) {
                const std::string p = "enc" + std::to_string(l) + ".";
                m.add_xavier(rng, p + "attn.Wq", cfg.d_model, cfg.d_model);
                m.add_xavier(rng, p + "attn.Wk", cfg.d_model, cfg.d_model);
                m.add_xavier(rng, p + "attn.Wv", cfg.d_model, cfg.d_model);
                m.add_xavier(rng, p + "attn.Wo", cfg.d_model, cfg.d_model);
                m.add_ones(p + "ln1.g", cfg.d_model);
                m.add_zeros(p + "ln1.b", {cfg.d_model});
                m.add_xavier(rng, p + "ffn.W1", cfg.d_model, cfg.d_ff);
                m.add_zeros(p + "ffn.b1", {cfg.d_ff});
                m.add_xavier(rng, p + "ffn.W2", cfg.d_ff, cfg.d_model);
                m.add_zeros(p + "ffn.b2", {cfg.d_model});
                m.add_ones(p + "ln2.g", cfg.d_model);
                m.add_zeros(p + "ln2.b", {cfg.d_model});
                const bool is_quantum =
                    cfg.variant == "qstaformer" && l + 1 == cfg.n_encoder_layers;
                if (is_quantum) {
                    const std::size_t n = cfg.circuit.n_qubits;
                    m.add_xavier(rng, p + "q.Wproj", cfg.d_model, n);
                    Tensor theta =
                        Tensor::zeros({cfg.circuit.n_layers, n + 1}, true);
                    for (auto& v : theta.data()) v = rng.uniform(-0.1, 0.1);
                    m.add_param(p + "q.theta", theta);
                    m.add_xavier(rng, p + "q.Wout", n, cfg.d_model);
                }
            }
        }
        m.add_xavier(rng, "cls.W", cfg.d_model, cfg.n_classes);
        m.add_zeros("cls.b", {cfg.n_classes});
        m.pe_ = positional_encoding(cfg.seq_len, cfg.d_model);
        return m;
    }

    const ModelConfig& config() const { return cfg_; }
    std::vector<NamedParam>& params() { return params_; }
    const std::vector<NamedParam>& params() const { return params_; }

    Tensor& param(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::invalid_argument("model: no parameter '" + name + "'");
        return params_[it->second].tensor;
    }
    const Tensor& param(const std::string& name) const {
        return const_cast<Model*>(this)->param(name);
    }
    bool has_param(const std::string& name) const { return index_.count(name) > 0; }

    // Deep copy: fresh tensors, same values.
    Model clone() const {
        Model m;
        m.cfg_ = cfg_;
        m.pe_ = pe_;
        for (const auto& p : params_) {
            Tensor t = Tensor::zeros(p.tensor.shape(), p.tensor.requires_grad());
            t.data() = p.tensor.data();
            m.add_param(p.name, t);
        }
        return m;
    }

    // Forward over a batch of [L x F] inputs; returns [B x n_classes] logits,
    // recorded on the active tape.
    Tensor forward_logits(const std::vector<Tensor>& xs) const {
        if (xs.empty()) throw TensorError("forward: empty batch");
        for (const auto& x : xs)
            if (x.ndim() != 2 || x.rows() != cfg_.seq_len || x.cols() != cfg_.feature_dim)
                throw TensorError("forward: input shape " + detail::shape_str(x.shape()) +
                                  " does not match [" + std::to_string(cfg_.seq_len) + "x" +
                                  std::to_string(cfg_.feature_dim) + "]");
        if (cfg_.variant == "lstm") return lstm_forward(xs);
        return encoder_forward(xs);
    }

    // No-grad class probabilities, one row per sample.
    std::vector<std::vector<double>> predict_proba(const std::vector<Tensor>& xs,
                                                   std::size_t batch = 64) const {
        NoGradScope ng;
        std::vector<std::vector<double>> out;
        out.reserve(xs.size());
        for (std::size_t start = 0; start < xs.size(); start += batch) {
            const std::size_t stop = std::min(xs.size(), start + batch);
            std::vector<Tensor> chunk(xs.begin() + start, xs.begin() + stop);
            Tensor probs = softmax(forward_logits(chunk), 1);
            for (std::size_t r = 0; r < probs.rows(); ++r) {
                std::vector<double> row(cfg_.n_classes);
                for (std::size_t c = 0; c < cfg_.n_classes; ++c) row[c] = probs.at(r, c);
                out.push_back(std::move(row));
            }
        }
        return out;
    }

    std::vector<std::size_t> predict(const std::vector<Tensor>& xs) const {
        auto probs = predict_proba(xs);
        std::vector<std::size_t> labels(probs.size());
        for (std::size_t i = 0; i < probs.size(); ++i) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < probs[i].size(); ++c)
                if (probs[i][c] > probs[i][best]) best = c;
            labels[i] = best;
        }
        return labels;
    }

    // FNV-1a over all parameter bytes; attacks must leave this unchanged.
    std::uint64_t weight_checksum() const {
        std::uint64_t h = kFnvOffset;
        for (const auto& p : params_)
            h = fnv1a_bytes(p.tensor.data().data(), p.tensor.data().size() * sizeof(double), h);
        return h;
    }

    void add_param(const std::string& name, Tensor t) {
        index_[name] = params_.size();
        params_.push_back({name, std::move(t)});
    }

    // Embedding stage over the stacked batch: project, normalize, add the
    // positional table. Returns [B*L x d].
    Tensor embed(const std::vector<Tensor>& xs) const {
        const std::size_t B = xs.size(), L = cfg_.seq_len, d = cfg_.d_model;
        Tensor X = stack_rows(xs);
        Tensor H = layer_norm(add(matmul(X, param("embed.W")), param("embed.b")),
                              param("embed.ln.g"), param("embed.ln.b"));
        Tensor peB = Tensor::zeros({B * L, d});
        for (std::size_t s = 0; s < B; ++s)
            std::copy(pe_.data().begin(), pe_.data().end(), peB.data().begin() + s * L * d);
        return add(H, peB);
    }

    // One encoder layer over the stacked batch. The final layer uses the GELU
    // feed-forward; for the qstaformer variant it also carries the circuit.
    Tensor encoder_layer(const Tensor& H, std::size_t l, std::size_t B) const {
        const std::string p = "enc" + std::to_string(l) + ".";
        const bool last = l + 1 == cfg_.n_encoder_layers;
        const bool is_quantum = cfg_.variant == "qstaformer" && last;
        Tensor A = attention_block(H, p, B);
        Tensor Z = layer_norm(add(H, A), param(p + "ln1.g"), param(p + "ln1.b"));
        if (is_quantum) {
            // per-position rotation angles: bounded projection plus time ramp
            const std::size_t L = cfg_.seq_len, n = cfg_.circuit.n_qubits;
            Tensor ang = tanh_t(matmul(Z, param(p + "q.Wproj")));
            Tensor tsig = Tensor::zeros({B * L, n});
            for (std::size_t r = 0; r < B * L; ++r) {
                const double t = time_signal(r % L, L);
                for (std::size_t j = 0; j < n; ++j) tsig.at(r, j) = t;
            }
            Tensor q = circuit_layer(cfg_.circuit, param(p + "q.theta"), add(ang, tsig));
            Z = add(Z, matmul(q, param(p + "q.Wout")));
        }
        Tensor F = ffn_block(Z, p, /*use_gelu=*/last);
        return layer_norm(add(Z, F), param(p + "ln2.g"), param(p + "ln2.b"));
    }

    // Classifier head: last position of each sample -> [B x n_classes] logits.
    Tensor classify_logits(const Tensor& H, std::size_t B) const {
        const std::size_t L = cfg_.seq_len;
        std::vector<Tensor> lasts;
        lasts.reserve(B);
        for (std::size_t s = 0; s < B; ++s) lasts.push_back(slice(H, 0, s * L + L - 1, 1));
        return add(matmul(stack_rows(lasts), param("cls.W")), param("cls.b"));
    }

private:
    void add_xavier(Rng& rng, const std::string& name, std::size_t fan_in, std::size_t fan_out) {
        Tensor t = Tensor::zeros({fan_in, fan_out}, true);
        const double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (auto& v : t.data()) v = rng.uniform(-lim, lim);
        add_param(name, t);
    }
    void add_zeros(const std::string& name, std::vector<std::size_t> shape) {
        add_param(name, Tensor::zeros(std::move(shape), true));
    }
    void add_ones(const std::string& name, std::size_t n) {
        add_param(name, Tensor::full({n}, 1.0, true));
    }

    // Attention sublayer over the stacked batch: out rows align with H rows.
    Tensor attention_block(const Tensor& H, const std::string& p, std::size_t B) const {
        const std::size_t L = cfg_.seq_len;
        Tensor Qf = matmul(H, param(p + "attn.Wq"));
        Tensor Kf = matmul(H, param(p + "attn.Wk"));
        Tensor Vf = matmul(H, param(p + "attn.Wv"));
        std::vector<Tensor> ctxs;
        ctxs.reserve(B);
        for (std::size_t s = 0; s < B; ++s)
            ctxs.push_back(multi_head_attention(slice(Qf, 0, s * L, L), slice(Kf, 0, s * L, L),
                                                slice(Vf, 0, s * L, L), cfg_.n_heads));
        return matmul(stack_rows(ctxs), param(p + "attn.Wo"));
    }

    Tensor ffn_block(const Tensor& Z, const std::string& p, bool use_gelu) const {
        Tensor a = add(matmul(Z, param(p + "ffn.W1")), param(p + "ffn.b1"));
        Tensor act = use_gelu ? gelu(a) : relu(a);
        return add(matmul(act, param(p + "ffn.W2")), param(p + "ffn.b2"));
    }

    Tensor encoder_forward(const std::vector<Tensor>& xs) const {
        const std::size_t B = xs.size();
        Tensor H = embed(xs);
        for (std::size_t l = 0; l < cfg_.n_encoder_layers; ++l) H = encoder_layer(H, l, B);
        return classify_logits(H, B);
    }

    Tensor lstm_forward(const std::vector<Tensor>& xs) const {
        const std::size_t d = cfg_.d_model, L = cfg_.seq_len;
        const Tensor& Wx = param("lstm.Wx");
        const Tensor& Wh = param("lstm.Wh");
        const Tensor& b = param("lstm.b");
        std::vector<Tensor> lasts;
        lasts.reserve(xs.size());
        for (const auto& x : xs) {
            Tensor h = Tensor::zeros({1, d});
            Tensor c = Tensor::zeros({1, d});
            for (std::size_t t = 0; t < L; ++t) {
                Tensor xt = slice(x, 0, t, 1);
                Tensor gates = add(add(matmul(xt, Wx), matmul(h, Wh)), b);
                Tensor ig = sigmoid(slice(gates, 1, 0, d));
                Tensor fg = sigmoid(slice(gates, 1, d, d));
                Tensor gg = tanh_t(slice(gates, 1, 2 * d, d));
                Tensor og = sigmoid(slice(gates, 1, 3 * d, d));
                c = add(mul(fg, c), mul(ig, gg));
                h = mul(og, tanh_t(c));
            }
            lasts.push_back(h);
        }
        return add(matmul(stack_rows(lasts), param("cls.W")), param("cls.b"));
    }

    ModelConfig cfg_;
    std::vector<NamedParam> params_;
    std::unordered_map<std::string, std::size_t> index_;
    Tensor pe_;
};

}  // namespace qsta::model
