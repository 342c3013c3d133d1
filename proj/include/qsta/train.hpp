#pragma once

// Minibatch training loop: AdamW with cosine learning-rate decay and global
// gradient-norm clipping, per-epoch train loss and test metrics, optional
// early stopping on test targets, deterministic per seed.

#include <cmath>
#include <string>
#include <vector>

#include "qsta/dataset.hpp"
#include "qsta/metrics.hpp"
#include "qsta/model.hpp"
#include "qsta/optim.hpp"
#include "qsta/rng.hpp"

namespace qsta::harness {

struct TrainConfig {
    std::size_t epochs = 55;
    std::size_t batch = 32;
    double lr_max = 1e-4;
    double lr_min = 1e-5;
    double clip_norm = 1.0;
    double weight_decay = 0.0;
    // Early stop once test accuracy AND AUC reach these targets (both < 0
    // disables the check; AUC target ignored when AUC is undefined).
    double stop_accuracy = -1.0;
    double stop_auc = -1.0;
};

struct TrainResult {
    std::vector<double> loss_trace;            // mean train loss per epoch
    std::vector<metrics::Metrics> test_trace;  // test metrics per epoch
    metrics::Metrics final_metrics;
    std::size_t epochs_run = 0;
    bool early_stopped = false;
};

class TrainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Test metrics from the model's class-1 probabilities.
inline metrics::Metrics evaluate(model::Model& m, const data::WindowSet& test) {
    auto probs = m.predict_proba(test.x);
    std::vector<std::size_t> pred(test.size());
    std::vector<double> score(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        score[i] = probs[i][1];
        std::size_t arg = 0;
        for (std::size_t c = 1; c < probs[i].size(); ++c)
            if (probs[i][c] > probs[i][arg]) arg = c;
        pred[i] = arg;
    }
    return metrics::evaluate_predictions(test.y, pred, score);
}

inline TrainResult train(model::Model& m, const data::WindowSet& train_set,
                         const data::WindowSet& test_set, const TrainConfig& cfg,
                         std::uint64_t seed) {
    if (train_set.size() == 0) throw TrainError("train: empty training set");
    TrainResult res;
    if (cfg.epochs == 0) {
        res.final_metrics = evaluate(m, test_set);
        return res;
    }

    AdamOptions opt;
    opt.lr = cfg.lr_max;
    opt.weight_decay = cfg.weight_decay;
    AdamW optim(m.params(), opt);
    Rng shuffle_rng = Rng::derive(seed, "train_shuffle");

    const std::size_t steps_per_epoch = (train_set.size() + cfg.batch - 1) / cfg.batch;
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = shuffle_rng.permutation(train_set.size());
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t bs = std::min(cfg.batch, order.size() - start);
            std::vector<Tensor> xs;
            std::vector<std::size_t> ys;
            xs.reserve(bs);
            ys.reserve(bs);
            for (std::size_t i = 0; i < bs; ++i) {
                xs.push_back(train_set.x[order[start + i]]);
                ys.push_back(train_set.y[order[start + i]]);
            }
            Tape tape;
            TapeScope scope(tape);
            Tensor loss = cross_entropy_batch(m.forward_logits(xs), ys);
            const double lv = loss.value();
            if (!std::isfinite(lv))
                throw TrainError("training diverged (non-finite loss) at epoch " +
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
            metrics::Metrics mt = evaluate(m, test_set);
            res.test_trace.push_back(mt);
            res.final_metrics = mt;
            if (cfg.stop_accuracy >= 0.0 && mt.accuracy >= cfg.stop_accuracy &&
                (cfg.stop_auc < 0.0 || (mt.auc && *mt.auc >= cfg.stop_auc))) {
                res.early_stopped = true;
                break;
            }
        }
    }
    if (test_set.size() > 0 && res.test_trace.empty()) res.final_metrics = evaluate(m, test_set);
    res.final_metrics.loss_trace = res.loss_trace;
    return res;
}

}  // namespace qsta::harness
