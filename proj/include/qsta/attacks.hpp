#pragma once

// Adversarial attacks on sequence classifiers: momentum iterative FGSM and
// projected gradient descent under an l-inf budget, the Carlini-Wagner
// optimization attack under l2, gray-box transfer via a distilled surrogate,
// adversarial training, and the robustness evaluation grid.
//
// All attacks perturb only the channels enabled by the mask (default: the
// voltage-magnitude channels), clamp voltages into [0, 1.5] p.u., and never
// touch model weights. Input gradients flow through the quantum layer via
// the parameter-shift rule chained with the classical tape.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "qsta/dataset.hpp"
#include "qsta/model.hpp"
#include "qsta/optim.hpp"
#include "qsta/rng.hpp"
#include "qsta/tensor.hpp"
#include "qsta/train.hpp"

namespace qsta::attack {

struct AttackConfig {
    std::string method = "pgd";  // mifgsm | pgd | cw
    double epsilon = 0.03;       // l-inf budget (mifgsm/pgd); l2 budget for cw, <= 0 unbounded
    std::size_t steps = 10;
    double alpha = -1.0;  // step size; <= 0 selects the method default
    double mu = 1.0;      // momentum decay (mifgsm)
    bool random_start = true;  // pgd
    double cw_confidence = 2.0;
    double cw_lr = 0.05;
    std::size_t cw_iters = 100;
    double cw_lambda = 1.0;

    double step_size(double fallback) const { return alpha > 0.0 ? alpha : fallback; }
};

// Which window columns an attacker may touch, and per-column clamp bounds.
struct ChannelSpec {
    std::vector<double> mask;      // 1.0 = perturbable
    std::vector<double> clamp_lo;  // -inf = unclamped
    std::vector<double> clamp_hi;

    static ChannelSpec voltage_only(std::size_t n_buses) {
        const std::size_t F = 3 * n_buses;
        ChannelSpec c;
        c.mask.assign(F, 0.0);
        c.clamp_lo.assign(F, -std::numeric_limits<double>::infinity());
        c.clamp_hi.assign(F, std::numeric_limits<double>::infinity());
        for (std::size_t b = 0; b < n_buses; ++b) {
            const std::size_t col = data::u_channel_offset(n_buses) + b;
            c.mask[col] = 1.0;
            c.clamp_lo[col] = 0.0;
            c.clamp_hi[col] = 1.5;
        }
        return c;
    }

    static ChannelSpec all_channels(std::size_t F) {
        ChannelSpec c;
        c.mask.assign(F, 1.0);
        c.clamp_lo.assign(F, -std::numeric_limits<double>::infinity());
        c.clamp_hi.assign(F, std::numeric_limits<double>::infinity());
        return c;
    }
};

struct AdvExample {
    Tensor x_clean;
    Tensor x_adv;
    std::size_t label = 0;
    std::size_t pred_before = 0;
    std::size_t pred_after = 0;
    double linf = 0.0;
    double l2 = 0.0;
    bool success = false;  // final prediction differs from the true label
};

// Attacker knowledge: "white_box" crafts on the target itself, "gray_box"
// crafts on a query-distilled surrogate and transfers to the target.
struct ThreatModel {
    std::string kind = "white_box";
    model::Model* surrogate = nullptr;  // required for gray_box, must differ from target
};

class AttackError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline Tensor copy_tensor(const Tensor& t, bool requires_grad) {
    Tensor c = Tensor::zeros(t.shape(), requires_grad);
    c.data() = t.data();
    return c;
}

inline int sgn(double v) { return (v > 0.0) - (v < 0.0); }

inline std::vector<std::size_t> argmax_rows(const Tensor& logits) {
    std::vector<std::size_t> out(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.cols(); ++c)
            if (logits.at(r, c) > logits.at(r, best)) best = c;
        out[r] = best;
    }
    return out;
}

inline void clamp_channels(Tensor& x, const ChannelSpec& chan) {
    const std::size_t F = x.cols();
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < F; ++j)
            x.at(i, j) = std::clamp(x.at(i, j), chan.clamp_lo[j], chan.clamp_hi[j]);
}

inline void fill_norms(AdvExample& ex) {
    double linf = 0.0, l2 = 0.0;
    for (std::size_t i = 0; i < ex.x_clean.size(); ++i) {
        const double d = ex.x_adv.data()[i] - ex.x_clean.data()[i];
        linf = std::max(linf, std::abs(d));
        l2 += d * d;
    }
    ex.linf = linf;
    ex.l2 = std::sqrt(l2);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// White-box attacks over an arbitrary differentiable logits function
// ---------------------------------------------------------------------------

// Iterative sign-gradient attacks: "mifgsm" accumulates an L1-normalized
// momentum; "pgd" follows the raw gradient sign from an optional random
// start. Both project into the l-inf ball around the clean input each step.
template <typename LogitsFn>
std::vector<AdvExample> iterative_linf_attack(LogitsFn&& logits_fn, const std::vector<Tensor>& xs,
                                              const std::vector<std::size_t>& ys,
                                              const AttackConfig& cfg, const ChannelSpec& chan,
                                              Rng* rng = nullptr) {
    const bool momentum = cfg.method == "mifgsm";
    if (!momentum && cfg.method != "pgd")
        throw AttackError("iterative attack: unknown method '" + cfg.method + "'");
    const std::size_t B = xs.size();
    if (ys.size() != B) throw AttackError("attack: labels/input count mismatch");
    const double alpha =
        cfg.step_size(momentum ? cfg.epsilon / double(std::max<std::size_t>(cfg.steps, 1))
                               : cfg.epsilon / 4.0);

    std::vector<AdvExample> out(B);
    std::vector<Tensor> adv(B);
    std::vector<std::vector<double>> g(B);
    for (std::size_t s = 0; s < B; ++s) {
        out[s].x_clean = detail::copy_tensor(xs[s], false);
        out[s].label = ys[s];
        adv[s] = detail::copy_tensor(xs[s], true);
        g[s].assign(xs[s].size(), 0.0);
    }
    {
        NoGradScope ng;
        auto preds = detail::argmax_rows(logits_fn(xs));
        for (std::size_t s = 0; s < B; ++s) out[s].pred_before = preds[s];
    }

    const std::size_t F = xs.empty() ? 0 : xs[0].cols();
    if (!momentum && cfg.random_start && rng != nullptr && cfg.epsilon > 0.0) {
        for (std::size_t s = 0; s < B; ++s) {
            for (std::size_t i = 0; i < adv[s].size(); ++i)
                if (chan.mask[i % F] > 0.0)
                    adv[s].data()[i] += rng->uniform(-cfg.epsilon, cfg.epsilon);
            detail::clamp_channels(adv[s], chan);
        }
    }

    if (cfg.epsilon > 0.0) {
        for (std::size_t step = 0; step < cfg.steps; ++step) {
            Tape tape;
            TapeScope scope(tape);
            for (auto& a : adv) a.zero_grad();
            Tensor loss = cross_entropy_batch(logits_fn(adv), ys);
            tape.backward(loss);
            NoGradScope ng;
            for (std::size_t s = 0; s < B; ++s) {
                const auto& grad = adv[s].grad();
                if (momentum) {
                    double l1 = 0.0;
                    for (std::size_t i = 0; i < grad.size(); ++i)
                        if (chan.mask[i % F] > 0.0) l1 += std::abs(grad[i]);
                    for (std::size_t i = 0; i < grad.size(); ++i) {
                        if (chan.mask[i % F] <= 0.0) continue;
                        g[s][i] = cfg.mu * g[s][i] + (l1 > 0.0 ? grad[i] / l1 : 0.0);
                    }
                } else {
                    for (std::size_t i = 0; i < grad.size(); ++i)
                        if (chan.mask[i % F] > 0.0) g[s][i] = grad[i];
                }
                for (std::size_t i = 0; i < adv[s].size(); ++i) {
                    if (chan.mask[i % F] <= 0.0) continue;
                    double v = adv[s].data()[i] + alpha * detail::sgn(g[s][i]);
                    const double base = out[s].x_clean.data()[i];
                    v = std::clamp(v, base - cfg.epsilon, base + cfg.epsilon);
                    adv[s].data()[i] = v;
                }
                detail::clamp_channels(adv[s], chan);
            }
        }
    }

    NoGradScope ng;
    std::vector<Tensor> finals(B);
    for (std::size_t s = 0; s < B; ++s) finals[s] = detail::copy_tensor(adv[s], false);
    auto preds = detail::argmax_rows(logits_fn(finals));
    for (std::size_t s = 0; s < B; ++s) {
        out[s].x_adv = finals[s];
        out[s].pred_after = preds[s];
        out[s].success = preds[s] != ys[s];
        detail::fill_norms(out[s]);
    }
    return out;
}

// Carlini-Wagner: minimize ||delta||_2^2 + lambda * max(Z_y - max_{j!=y} Z_j,
// -confidence) with Adam over delta on the masked channels. Returns the
// smallest-perturbation successful iterate, else the final one. epsilon > 0
// additionally projects delta onto the l2 ball of that radius each step.
template <typename LogitsFn>
std::vector<AdvExample> cw_attack(LogitsFn&& logits_fn, const std::vector<Tensor>& xs,
                                  const std::vector<std::size_t>& ys, const AttackConfig& cfg,
                                  const ChannelSpec& chan) {
    const std::size_t B = xs.size();
    if (ys.size() != B) throw AttackError("attack: labels/input count mismatch");
    std::vector<AdvExample> out(B);
    if (B == 0) return out;
    const std::size_t L = xs[0].rows(), F = xs[0].cols();

    Tensor mask = Tensor::zeros({L, F});
    for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = 0; j < F; ++j) mask.at(i, j) = chan.mask[j];

    std::vector<Tensor> delta(B), clean(B);
    std::vector<NamedParam> dparams;
    for (std::size_t s = 0; s < B; ++s) {
        out[s].x_clean = detail::copy_tensor(xs[s], false);
        out[s].label = ys[s];
        clean[s] = detail::copy_tensor(xs[s], false);
        delta[s] = Tensor::zeros({L, F}, true);
        dparams.push_back({"delta" + std::to_string(s), delta[s]});
    }
    AdamOptions aopt;
    aopt.lr = cfg.cw_lr;
    AdamW opt(dparams, aopt);

    std::vector<double> best_l2(B, std::numeric_limits<double>::max());
    std::vector<bool> found(B, false);
    std::vector<Tensor> best(B);

    auto evaluate_candidates = [&](bool record_before) {
        NoGradScope ng;
        std::vector<Tensor> cand(B);
        for (std::size_t s = 0; s < B; ++s) {
            Tensor c = detail::copy_tensor(clean[s], false);
            for (std::size_t i = 0; i < c.size(); ++i)
                c.data()[i] += delta[s].data()[i] * mask.data()[i];
            detail::clamp_channels(c, chan);
            cand[s] = c;
        }
        auto preds = detail::argmax_rows(logits_fn(cand));
        for (std::size_t s = 0; s < B; ++s) {
            if (record_before) out[s].pred_before = preds[s];
            if (preds[s] != ys[s]) {
                double l2 = 0.0;
                for (std::size_t i = 0; i < cand[s].size(); ++i) {
                    const double d = cand[s].data()[i] - clean[s].data()[i];
                    l2 += d * d;
                }
                l2 = std::sqrt(l2);
                if (l2 < best_l2[s]) {
                    best_l2[s] = l2;
                    best[s] = cand[s];
                    found[s] = true;
                }
            }
        }
    };
    evaluate_candidates(true);  // delta = 0: already-misclassified inputs are done

    const std::size_t n_classes = [&] {
        NoGradScope ng;
        return logits_fn({xs[0]}).cols();
    }();
    Tensor onehot = Tensor::zeros({B, n_classes});
    for (std::size_t s = 0; s < B; ++s) onehot.at(s, ys[s]) = 1.0;
    Tensor ones_col = Tensor::zeros({n_classes, 1});
    for (auto& v : ones_col.data()) v = 1.0;
    constexpr double kBig = 1e9;

    for (std::size_t it = 0; it < cfg.cw_iters; ++it) {
        Tape tape;
        TapeScope scope(tape);
        std::vector<Tensor> cand(B);
        Tensor l2_total = Tensor::scalar(0.0);
        for (std::size_t s = 0; s < B; ++s) {
            Tensor masked = mul(delta[s], mask);
            cand[s] = add(clean[s], masked);
            l2_total = add(l2_total, sum(mul(masked, masked)));
        }
        Tensor Z = logits_fn(cand);
        Tensor z_y = matmul(mul(Z, onehot), ones_col);               // [B x 1]
        Tensor others = sub(Z, scale(onehot, kBig));                 // y column suppressed
        Tensor row_max = slice(others, 1, 0, 1);
        for (std::size_t c = 1; c < n_classes; ++c) {
            Tensor col = slice(others, 1, c, 1);
            row_max = add(row_max, relu(sub(col, row_max)));
        }
        Tensor margin = sub(z_y, row_max);
        Tensor hinge = add_const(relu(add_const(margin, cfg.cw_confidence)), -cfg.cw_confidence);
        Tensor loss = add(l2_total, scale(sum(hinge), cfg.cw_lambda));
        opt.zero_grad();
        tape.backward(loss);
        opt.step();

        {
            NoGradScope ng;
            for (std::size_t s = 0; s < B; ++s) {
                // keep delta exactly zero off-mask and inside the l2 budget
                double l2 = 0.0;
                for (std::size_t i = 0; i < delta[s].size(); ++i) {
                    if (mask.data()[i] <= 0.0)
                        delta[s].data()[i] = 0.0;
                    else
                        l2 += delta[s].data()[i] * delta[s].data()[i];
                }
                if (cfg.epsilon > 0.0) {
                    l2 = std::sqrt(l2);
                    if (l2 > cfg.epsilon) {
                        const double f = cfg.epsilon / l2;
                        for (auto& v : delta[s].data()) v *= f;
                    }
                }
            }
        }
        evaluate_candidates(false);
    }

    // final candidates for samples never successfully flipped
    NoGradScope ng;
    std::vector<Tensor> finals(B);
    for (std::size_t s = 0; s < B; ++s) {
        if (found[s]) {
            finals[s] = best[s];
            continue;
        }
        Tensor c = detail::copy_tensor(clean[s], false);
        for (std::size_t i = 0; i < c.size(); ++i)
            c.data()[i] += delta[s].data()[i] * mask.data()[i];
        detail::clamp_channels(c, chan);
        finals[s] = c;
    }
    auto preds = detail::argmax_rows(logits_fn(finals));
    for (std::size_t s = 0; s < B; ++s) {
        out[s].x_adv = finals[s];
        out[s].pred_after = preds[s];
        out[s].success = preds[s] != ys[s];
        detail::fill_norms(out[s]);
    }
    return out;
}

// Dispatch on cfg.method.
template <typename LogitsFn>
std::vector<AdvExample> run_attack(LogitsFn&& logits_fn, const std::vector<Tensor>& xs,
                                   const std::vector<std::size_t>& ys, const AttackConfig& cfg,
                                   const ChannelSpec& chan, Rng* rng = nullptr) {
    if (cfg.method == "cw") return cw_attack(logits_fn, xs, ys, cfg, chan);
    return iterative_linf_attack(logits_fn, xs, ys, cfg, chan, rng);
}

// ---------------------------------------------------------------------------
// Model binding
// ---------------------------------------------------------------------------

// Freezes every model parameter for the guard's lifetime so attack backward
// passes skip parameter gradients (and the circuit's theta jacobian).
class ParamFreeze {
public:
    explicit ParamFreeze(model::Model& m) : m_(m) {
        for (auto& p : m_.params()) {
            saved_.push_back(p.tensor.requires_grad());
            p.tensor.set_requires_grad(false);
        }
    }
    ~ParamFreeze() {
        std::size_t i = 0;
        for (auto& p : m_.params()) p.tensor.set_requires_grad(saved_[i++]);
    }
    ParamFreeze(const ParamFreeze&) = delete;
    ParamFreeze& operator=(const ParamFreeze&) = delete;

private:
    model::Model& m_;
    std::vector<bool> saved_;
};

// White-box attack against a model, in minibatches.
inline std::vector<AdvExample> attack_model(model::Model& m, const std::vector<Tensor>& xs,
                                            const std::vector<std::size_t>& ys,
                                            const AttackConfig& cfg, const ChannelSpec& chan,
                                            std::uint64_t seed, std::size_t batch = 32) {
    ParamFreeze freeze(m);
    Rng rng = Rng::derive(seed, "attack_start");
    auto logits_fn = [&m](const std::vector<Tensor>& in) { return m.forward_logits(in); };
    std::vector<AdvExample> out;
    for (std::size_t start = 0; start < xs.size(); start += batch) {
        const std::size_t bs = std::min(batch, xs.size() - start);
        std::vector<Tensor> bx(xs.begin() + start, xs.begin() + start + bs);
        std::vector<std::size_t> by(ys.begin() + start, ys.begin() + start + bs);
        auto ex = run_attack(logits_fn, bx, by, cfg, chan, &rng);
        for (auto& e : ex) out.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gray-box threat model
// ---------------------------------------------------------------------------

// Distill a classical-transformer surrogate from the target's output
// probabilities (the only access a gray-box adversary has).
inline model::Model distill_surrogate(model::Model& target, const data::WindowSet& queries,
                                      std::size_t epochs, std::uint64_t seed) {
    if (queries.size() == 0) throw AttackError("distill: empty query set");
    if (epochs == 0) throw AttackError("distill: surrogate needs at least one training epoch");
    model::ModelConfig scfg = target.config();
    scfg.variant = "transformer";
    model::Model surrogate = model::Model::init(scfg, mix64(seed ^ 0xD15711));

    auto soft = target.predict_proba(queries.x);
    const std::size_t n_classes = scfg.n_classes;
    Tensor targets_all = Tensor::zeros({queries.size(), n_classes});
    for (std::size_t i = 0; i < queries.size(); ++i)
        for (std::size_t c = 0; c < n_classes; ++c) targets_all.at(i, c) = soft[i][c];

    AdamOptions opt;
    opt.lr = 1e-3;
    AdamW optim(surrogate.params(), opt);
    Rng shuffle_rng = Rng::derive(seed, "distill_shuffle");
    const std::size_t batch = 32;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        auto order = shuffle_rng.permutation(queries.size());
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t bs = std::min(batch, order.size() - start);
            std::vector<Tensor> xs;
            Tensor tb = Tensor::zeros({bs, n_classes});
            for (std::size_t i = 0; i < bs; ++i) {
                xs.push_back(queries.x[order[start + i]]);
                for (std::size_t c = 0; c < n_classes; ++c)
                    tb.at(i, c) = targets_all.at(order[start + i], c);
            }
            Tape tape;
            TapeScope scope(tape);
            // soft-label cross-entropy: -mean_i sum_c t_ic log p_ic
            Tensor p = softmax(surrogate.forward_logits(xs), 1);
            Tensor loss = scale(sum(mul(tb, log_t(p))), -1.0 / double(bs));
            optim.zero_grad();
            tape.backward(loss);
            clip_global_norm(optim.params(), 1.0);
            optim.step();
        }
    }
    return surrogate;
}

// Craft the attack on the surrogate, score it on the target.
inline std::vector<AdvExample> gray_box_attack(model::Model& target, model::Model& surrogate,
                                               const std::vector<Tensor>& xs,
                                               const std::vector<std::size_t>& ys,
                                               const AttackConfig& cfg, const ChannelSpec& chan,
                                               std::uint64_t seed, std::size_t batch = 32) {
    auto ex = attack_model(surrogate, xs, ys, cfg, chan, seed, batch);
    NoGradScope ng;
    for (std::size_t start = 0; start < ex.size(); start += batch) {
        const std::size_t bs = std::min(batch, ex.size() - start);
        std::vector<Tensor> cleanb, advb;
        for (std::size_t i = 0; i < bs; ++i) {
            cleanb.push_back(ex[start + i].x_clean);
            advb.push_back(ex[start + i].x_adv);
        }
        auto before = detail::argmax_rows(target.forward_logits(cleanb));
        auto after = detail::argmax_rows(target.forward_logits(advb));
        for (std::size_t i = 0; i < bs; ++i) {
            ex[start + i].pred_before = before[i];
            ex[start + i].pred_after = after[i];
            ex[start + i].success = after[i] != ex[start + i].label;
        }
    }
    return ex;
}

// ---------------------------------------------------------------------------
// Adversarial training and robustness evaluation
// ---------------------------------------------------------------------------

// Continue training with mix_ratio of each batch replaced by adversarial
// versions regenerated against the current weights, rotating through the
// configured attack methods batch by batch.
inline harness::TrainResult adversarial_training(model::Model& m, const data::WindowSet& train_set,
                                                 const data::WindowSet& test_set,
                                                 const std::vector<AttackConfig>& attack_cfgs,
                                                 double mix_ratio, const ChannelSpec& chan,
                                                 const harness::TrainConfig& cfg,
                                                 std::uint64_t seed) {
    if (train_set.size() == 0) throw AttackError("adversarial training: empty dataset");
    if (mix_ratio < 0.0 || mix_ratio > 1.0)
        throw AttackError("adversarial training: mix ratio must lie in [0, 1]");
    harness::TrainResult res;

    AdamOptions opt;
    opt.lr = cfg.lr_max;
    opt.weight_decay = cfg.weight_decay;
    AdamW optim(m.params(), opt);
    Rng shuffle_rng = Rng::derive(seed, "advtrain_shuffle");
    Rng attack_rng = Rng::derive(seed, "advtrain_attack");

    const std::size_t steps_per_epoch = (train_set.size() + cfg.batch - 1) / cfg.batch;
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order = shuffle_rng.permutation(train_set.size());
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t bs = std::min(cfg.batch, order.size() - start);
            std::vector<Tensor> xs;
            std::vector<std::size_t> ys;
            for (std::size_t i = 0; i < bs; ++i) {
                xs.push_back(train_set.x[order[start + i]]);
                ys.push_back(train_set.y[order[start + i]]);
            }
            const std::size_t n_adv =
                static_cast<std::size_t>(std::round(mix_ratio * double(bs)));
            if (n_adv > 0 && !attack_cfgs.empty()) {
                const AttackConfig& acfg = attack_cfgs[step % attack_cfgs.size()];
                std::vector<Tensor> ax(xs.end() - n_adv, xs.end());
                std::vector<std::size_t> ay(ys.end() - n_adv, ys.end());
                ParamFreeze freeze(m);
                auto logits_fn = [&m](const std::vector<Tensor>& in) {
                    return m.forward_logits(in);
                };
                auto ex = run_attack(logits_fn, ax, ay, acfg, chan, &attack_rng);
                for (std::size_t i = 0; i < n_adv; ++i)
                    xs[bs - n_adv + i] = ex[i].x_adv;
            }
            Tape tape;
            TapeScope scope(tape);
            Tensor loss = cross_entropy_batch(m.forward_logits(xs), ys);
            const double lv = loss.value();
            if (!std::isfinite(lv))
                throw harness::TrainError("adversarial training diverged at epoch " +
                                          std::to_string(epoch));
            loss_sum += lv * double(bs);
            optim.zero_grad();
            tape.backward(loss);
            clip_global_norm(optim.params(), cfg.clip_norm);
            optim.step(cosine_lr(step, total_steps, cfg.lr_max, cfg.lr_min));
            ++step;
        }
        res.loss_trace.push_back(loss_sum / double(train_set.size()));
        res.epochs_run = epoch + 1;
        if (test_set.size() > 0) {
            res.test_trace.push_back(harness::evaluate(m, test_set));
            res.final_metrics = res.test_trace.back();
        }
    }
    res.final_metrics.loss_trace = res.loss_trace;
    return res;
}

struct RobustnessCell {
    std::string method;
    std::string threat;  // white | gray
    double epsilon = 0.0;
    double accuracy = 0.0;
};

struct RobustnessReport {
    double clean_accuracy = 0.0;
    std::vector<RobustnessCell> cells;
    double avg_robust = 0.0;
    double drop = 0.0;  // clean - avg robust
};

// Accuracy under every (method, threat, epsilon) combination. Gray-box cells
// require a surrogate on the threat model (distill one with distill_surrogate).
inline RobustnessReport robustness_eval(model::Model& target, const data::WindowSet& eval_set,
                                        const std::vector<std::string>& methods,
                                        const std::vector<ThreatModel>& threats,
                                        const std::vector<double>& epsilons,
                                        const AttackConfig& base_cfg, const ChannelSpec& chan,
                                        std::uint64_t seed) {
    RobustnessReport rep;
    rep.clean_accuracy = harness::evaluate(target, eval_set).accuracy;
    std::size_t cell_idx = 0;
    for (const auto& method : methods) {
        for (const auto& tm : threats) {
            if (tm.kind != "white_box" && tm.kind != "gray_box")
                throw AttackError("robustness eval: unknown threat '" + tm.kind + "'");
            if (tm.kind == "gray_box" && (tm.surrogate == nullptr || tm.surrogate == &target))
                throw AttackError(
                    "robustness eval: gray-box needs a surrogate distinct from the target");
            for (double eps : epsilons) {
                AttackConfig cfg = base_cfg;
                cfg.method = method;
                cfg.epsilon = eps;
                std::vector<AdvExample> ex;
                const std::uint64_t cell_seed = mix64(seed + 1315 * (++cell_idx));
                if (tm.kind == "gray_box") {
                    ex = gray_box_attack(target, *tm.surrogate, eval_set.x, eval_set.y, cfg,
                                         chan, cell_seed);
                } else {
                    ex = attack_model(target, eval_set.x, eval_set.y, cfg, chan, cell_seed);
                }
                std::size_t correct = 0;
                for (const auto& e : ex)
                    if (e.pred_after == e.label) ++correct;
                rep.cells.push_back(
                    {method, tm.kind, eps, double(correct) / double(std::max<std::size_t>(
                                               ex.size(), 1))});
            }
        }
    }
    if (!rep.cells.empty()) {
        double s = 0.0;
        for (const auto& c : rep.cells) s += c.accuracy;
        rep.avg_robust = s / double(rep.cells.size());
        rep.drop = rep.clean_accuracy - rep.avg_robust;
    }
    return rep;
}

}  // namespace qsta::attack
