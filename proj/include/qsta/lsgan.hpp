#pragma once

// Least-squares GAN over flattened trajectory windows, one conditional GAN
// per class.
//
// Discriminator loss:  1/2 E[(D(x) - 1)^2] + 1/2 E[D(G(z))^2]
// Generator loss:      1/2 E[(D(G(z)) - 1)^2]
// Both nets are small MLPs with leaky-ReLU hidden layers and linear heads.
// Training alternates k discriminator minibatch steps with one generator
// step; an "iteration" is one discriminator step, and training stops at
// min(epoch budget, iteration budget), whichever comes first. Real rows are
// z-scored internally; generated rows are mapped back to raw units.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qsta/dataset.hpp"
#include "qsta/metrics.hpp"
#include "qsta/optim.hpp"
#include "qsta/rng.hpp"
#include "qsta/tensor.hpp"

namespace qsta::gan {

struct LsganConfig {
    std::size_t latent_dim = 16;
    std::size_t g_hidden = 64;
    std::size_t d_hidden = 64;
    double lr = 1e-4;
    std::size_t batch = 32;
    std::size_t epochs = 1000;
    std::size_t max_iterations = 3000;  // discriminator steps
    std::size_t k = 5;                  // discriminator steps per generator step
};

// Two-hidden-layer MLP with leaky-ReLU activations and a linear output.
struct Mlp {
    std::vector<Tensor> W;  // 3 weight matrices
    std::vector<Tensor> b;

    static Mlp init(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
        Mlp m;
        auto layer = [&](std::size_t r, std::size_t c) {
            Tensor w = Tensor::zeros({r, c}, true);
            const double lim = std::sqrt(6.0 / double(r + c));
            for (auto& v : w.data()) v = rng.uniform(-lim, lim);
            m.W.push_back(w);
            m.b.push_back(Tensor::zeros({c}, true));
        };
        layer(in, hidden);
        layer(hidden, hidden);
        layer(hidden, out);
        return m;
    }

    Tensor forward(const Tensor& x) const {
        Tensor h = x;
        for (std::size_t l = 0; l < W.size(); ++l) {
            h = add(matmul(h, W[l]), b[l]);
            if (l + 1 < W.size()) h = leaky_relu(h, 0.2);
        }
        return h;
    }

    std::vector<NamedParam> params(const std::string& prefix) const {
        std::vector<NamedParam> p;
        for (std::size_t l = 0; l < W.size(); ++l) {
            p.push_back({prefix + ".W" + std::to_string(l), W[l]});
            p.push_back({prefix + ".b" + std::to_string(l), b[l]});
        }
        return p;
    }
};

// Least-squares adversarial losses over discriminator outputs.
inline Tensor lsgan_d_loss(const Tensor& d_real, const Tensor& d_fake) {
    Tensor real_term = mean(mul(sub(d_real, Tensor::scalar(1.0)), sub(d_real, Tensor::scalar(1.0))));
    Tensor fake_term = mean(mul(d_fake, d_fake));
    return scale(add(real_term, fake_term), 0.5);
}

inline Tensor lsgan_g_loss(const Tensor& d_fake) {
    Tensor t = sub(d_fake, Tensor::scalar(1.0));
    return scale(mean(mul(t, t)), 0.5);
}

struct Generator {
    Mlp net;
    std::size_t latent_dim = 0;
    std::size_t out_dim = 0;
    std::size_t class_label = 0;
    std::vector<double> mean, sd;  // de-standardization transform

    // n raw-unit rows, deterministic per seed.
    std::vector<std::vector<double>> generate(std::size_t n, std::uint64_t seed) const {
        std::vector<std::vector<double>> out;
        if (n == 0) return out;
        NoGradScope ng;
        Rng rng = Rng::derive(seed, "lsgan_sample");
        Tensor z = Tensor::zeros({n, latent_dim});
        for (auto& v : z.data()) v = rng.normal();
        Tensor g = net.forward(z);
        out.assign(n, std::vector<double>(out_dim));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < out_dim; ++j)
                out[i][j] = g.at(i, j) * sd[j] + mean[j];
        return out;
    }
};

struct LsganHistory {
    std::vector<double> d_loss;  // per discriminator iteration
    std::vector<double> g_loss;  // per generator step
    double mmd_initial = 0.0;    // raw-unit MMD vs real, before/after training
    double mmd_final = 0.0;
    bool degenerate_input = false;  // all real rows identical
    std::size_t iterations = 0;
    std::size_t epochs = 0;
};

struct LsganResult {
    Generator generator;
    Mlp discriminator;
    LsganHistory history;
};

inline LsganResult lsgan_train(const std::vector<std::vector<double>>& real,
                               const LsganConfig& cfg, std::uint64_t seed,
                               std::size_t class_label = 0) {
    if (real.size() < 2 * cfg.batch)
        throw data::DataError("lsgan: need at least 2*batch real samples, got " +
                              std::to_string(real.size()));
    const std::size_t n = real.size();
    const std::size_t dim = real[0].size();

    LsganResult res;
    auto& hist = res.history;

    // internal standardization
    std::vector<double> mu(dim, 0.0), sd(dim, 0.0);
    for (const auto& r : real)
        for (std::size_t j = 0; j < dim; ++j) mu[j] += r[j];
    for (auto& v : mu) v /= double(n);
    for (const auto& r : real)
        for (std::size_t j = 0; j < dim; ++j) sd[j] += (r[j] - mu[j]) * (r[j] - mu[j]);
    bool all_const = true;
    for (auto& v : sd) {
        v = std::sqrt(v / double(n));
        if (v > 1e-12) all_const = false;
        if (v < 1e-6) v = 1.0;  // constant dims pass through unscaled
    }
    hist.degenerate_input = all_const;

    std::vector<std::vector<double>> zreal(n, std::vector<double>(dim));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dim; ++j) zreal[i][j] = (real[i][j] - mu[j]) / sd[j];

    Rng g_rng = Rng::derive(seed, "lsgan_g_init");
    Rng d_rng = Rng::derive(seed, "lsgan_d_init");
    Rng loop_rng = Rng::derive(seed, "lsgan_loop");

    res.generator.net = Mlp::init(cfg.latent_dim, cfg.g_hidden, dim, g_rng);
    res.generator.latent_dim = cfg.latent_dim;
    res.generator.out_dim = dim;
    res.generator.class_label = class_label;
    res.generator.mean = mu;
    res.generator.sd = sd;
    res.discriminator = Mlp::init(dim, cfg.d_hidden, 1, d_rng);

    AdamOptions opt;
    opt.lr = cfg.lr;
    AdamW g_opt(res.generator.net.params("g"), opt);
    AdamW d_opt(res.discriminator.params("d"), opt);

    auto mmd_vs_real = [&](std::uint64_t sample_seed) {
        const std::size_t n_eval = std::min<std::size_t>(n, 200);
        auto fake = res.generator.generate(n_eval, sample_seed);
        // uniform subsample of the real rows — consecutive rows share a
        // scenario cell, so a contiguous slice would bias the comparison
        Rng pick = Rng::derive(sample_seed, "mmd_eval");
        std::vector<std::size_t> order = pick.permutation(n);
        std::vector<std::vector<double>> real_eval;
        real_eval.reserve(n_eval);
        for (std::size_t i = 0; i < n_eval; ++i) real_eval.push_back(real[order[i]]);
        return metrics::mmd_rbf(real_eval, fake);
    };
    hist.mmd_initial = mmd_vs_real(seed ^ 0x1111);

    auto sample_latent = [&](std::size_t rows) {
        Tensor z = Tensor::zeros({rows, cfg.latent_dim});
        for (auto& v : z.data()) v = loop_rng.normal();
        return z;
    };
    auto real_batch = [&](const std::vector<std::size_t>& idx, std::size_t start) {
        Tensor xb = Tensor::zeros({cfg.batch, dim});
        for (std::size_t r = 0; r < cfg.batch; ++r)
            for (std::size_t j = 0; j < dim; ++j) xb.at(r, j) = zreal[idx[start + r]][j];
        return xb;
    };

    std::size_t iters = 0;
    std::size_t since_g = 0;
    bool done = false;
    for (std::size_t epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
        std::vector<std::size_t> idx = loop_rng.permutation(n);
        for (std::size_t start = 0; start + cfg.batch <= n && !done; start += cfg.batch) {
            // discriminator step: generator output is produced off-tape so
            // only the discriminator receives gradients
            {
                Tape tape;
                TapeScope scope(tape);
                Tensor d_real = res.discriminator.forward(real_batch(idx, start));
                Tensor gz;
                {
                    NoGradScope ng;
                    gz = res.generator.net.forward(sample_latent(cfg.batch));
                }
                Tensor d_fake = res.discriminator.forward(gz);
                Tensor loss = lsgan_d_loss(d_real, d_fake);
                d_opt.zero_grad();
                tape.backward(loss);
                d_opt.step();
                hist.d_loss.push_back(loss.value());
            }
            ++iters;
            ++since_g;
            if (since_g >= cfg.k) {
                since_g = 0;
                Tape tape;
                TapeScope scope(tape);
                Tensor d_fake = res.discriminator.forward(
                    res.generator.net.forward(sample_latent(cfg.batch)));
                Tensor loss = lsgan_g_loss(d_fake);
                g_opt.zero_grad();
                tape.backward(loss);
                g_opt.step();
                hist.g_loss.push_back(loss.value());
            }
            if (iters >= cfg.max_iterations) done = true;
        }
        hist.epochs = epoch + 1;
    }
    hist.iterations = iters;
    hist.mmd_final = mmd_vs_real(seed ^ 0x2222);
    return res;
}

// ---------------------------------------------------------------------------
// Dataset augmentation
// ---------------------------------------------------------------------------

// Rebuild a window-format trajectory record from a flattened row (P, Q, U
// channel blocks per step). Voltage channels are clamped at zero.
inline data::Trajectory window_trajectory(const std::vector<double>& row, std::size_t L,
                                          std::size_t n_buses, double rate_hz, std::string id,
                                          int label, std::uint64_t seed) {
    const std::size_t F = 3 * n_buses;
    if (row.size() != L * F) throw data::DataError("window row has wrong length");
    data::Trajectory t;
    t.id = std::move(id);
    t.label = label;
    t.rate_hz = rate_hz;
    t.provenance.source = "lsgan";
    t.provenance.seed = seed;
    t.P.assign(n_buses, std::vector<double>(L));
    t.Q.assign(n_buses, std::vector<double>(L));
    t.U.assign(n_buses, std::vector<double>(L));
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t b = 0; b < n_buses; ++b) {
            t.P[b][i] = row[i * F + b];
            t.Q[b][i] = row[i * F + n_buses + b];
            t.U[b][i] = std::max(0.0, row[i * F + 2 * n_buses + b]);
        }
    }
    return t;
}

struct AugmentResult {
    std::vector<data::Trajectory> synthetic;  // window-format records
    std::vector<LsganHistory> histories;      // one per class
};

// Train one GAN per class on the labeled windows and generate enough
// synthetic windows to reach target_total at the given class-0 share.
inline AugmentResult augment_windows(const data::WindowSet& real, std::size_t n_buses,
                                     double rate_hz, std::size_t target_total,
                                     double class0_share, const LsganConfig& cfg,
                                     std::uint64_t seed) {
    AugmentResult out;
    std::vector<std::size_t> class_count(2, 0);
    for (auto y : real.y) ++class_count[y];
    const std::size_t targets[2] = {
        static_cast<std::size_t>(std::round(class0_share * double(target_total))),
        target_total - static_cast<std::size_t>(std::round(class0_share * double(target_total)))};
    for (std::size_t cls = 0; cls < 2; ++cls) {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < real.size(); ++i) {
            if (real.y[i] != cls) continue;
            rows.push_back(real.x[i].data());
        }
        LsganResult trained = lsgan_train(rows, cfg, seed + cls, cls);
        const std::size_t have = class_count[cls];
        const std::size_t want = targets[cls] > have ? targets[cls] - have : 0;
        auto gen = trained.generator.generate(want, seed + 31 * (cls + 1));
        const std::size_t L = real.seq_len();
        for (std::size_t i = 0; i < gen.size(); ++i) {
            out.synthetic.push_back(window_trajectory(
                gen[i], L, n_buses, rate_hz,
                "lsgan-" + std::to_string(cls) + "-" + std::to_string(i),
                static_cast<int>(cls), seed));
        }
        out.histories.push_back(trained.history);
    }
    return out;
}

}  // namespace qsta::gan
