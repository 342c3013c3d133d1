#pragma once

// Adam / AdamW over named parameter tensors, cosine learning-rate decay, and
// global-norm gradient clipping.

#include <cmath>
#include <string>
#include <vector>

#include "qsta/tensor.hpp"

namespace qsta {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

// Scale all gradients so the global L2 norm is at most max_norm.
// Returns the pre-clip norm.
inline double clip_global_norm(std::vector<NamedParam>& params, double max_norm) {
    double sq = 0.0;
    for (auto& p : params) {
        if (!p.tensor.has_grad()) continue;
        for (double g : p.tensor.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (auto& p : params) {
            if (!p.tensor.has_grad()) continue;
            for (double& g : p.tensor.grad()) g *= s;
        }
    }
    return norm;
}

// Cosine decay from lr_max at step 0 to lr_min at step total_steps.
inline double cosine_lr(std::size_t step, std::size_t total_steps, double lr_max, double lr_min) {
    if (total_steps == 0 || step >= total_steps) return lr_min;
    const double t = static_cast<double>(step) / static_cast<double>(total_steps);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(3.14159265358979323846 * t));
}

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Adam with optional decoupled weight decay (AdamW when weight_decay > 0).
class AdamW {
public:
    using Options = AdamOptions;

    explicit AdamW(std::vector<NamedParam> params, Options opt = {})
        : params_(std::move(params)), opt_(opt) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i].tensor.size(), 0.0);
            v_[i].assign(params_[i].tensor.size(), 0.0);
        }
    }

    std::vector<NamedParam>& params() { return params_; }
    Options& options() { return opt_; }
    std::size_t step_count() const { return t_; }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    // One update using current .grad values. lr_override < 0 means use opt.lr.
    void step(double lr_override = -1.0) {
        const double lr = lr_override >= 0.0 ? lr_override : opt_.lr;
        ++t_;
        const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i].tensor;
            if (!p.has_grad()) continue;
            auto& g = p.grad();
            auto& x = p.data();
            for (std::size_t j = 0; j < x.size(); ++j) {
                if (!std::isfinite(g[j]))
                    throw TensorError("optimizer: non-finite gradient in parameter '" +
                                      params_[i].name + "' at index " + std::to_string(j));
                m_[i][j] = opt_.beta1 * m_[i][j] + (1.0 - opt_.beta1) * g[j];
                v_[i][j] = opt_.beta2 * v_[i][j] + (1.0 - opt_.beta2) * g[j] * g[j];
                const double mhat = m_[i][j] / bc1;
                const double vhat = v_[i][j] / bc2;
                x[j] -= lr * (mhat / (std::sqrt(vhat) + opt_.eps) + opt_.weight_decay * x[j]);
            }
        }
    }

private:
    std::vector<NamedParam> params_;
    Options opt_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

}  // namespace qsta
