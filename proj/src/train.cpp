#include "ck/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ck/losses.hpp"
#include "ck/ops.hpp"

namespace ck {

void TrainConfig::validate() const {
    if (epochs < 0) throw ParamError("train config: epochs must be nonnegative");
    if (!(lr > 0.0)) throw ParamError("train config: learning rate must be positive");
    if (batch < 1) throw ParamError("train config: batch size must be positive");
    if (alpha_smooth < 0.0 || alpha_smooth >= 1.0) {
        throw ParamError("train config: smoothing factor outside [0,1)");
    }
    if (lr_decay_fraction < 0.0 || lr_decay_fraction >= 1.0) {
        throw ParamError("train config: decay fraction outside [0,1)");
    }
    if (lr_decay_period < 0) throw ParamError("train config: decay period must be nonnegative");
    if (l1 < 0.0) throw ParamError("train config: l1 coefficient must be nonnegative");
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
    if (cfg.lr_decay_period <= 0 || cfg.lr_decay_fraction == 0.0) return cfg.lr;
    const int steps = epoch / cfg.lr_decay_period;
    return cfg.lr * std::pow(1.0 - cfg.lr_decay_fraction, steps);
}

void zero_grads(const std::vector<TensorPtr>& params) {
    for (const auto& p : params) p->zero_grad();
}

void finetune_step(const TensorPtr& weights, double lr, const std::vector<std::uint8_t>* keep) {
    if (!(lr > 0.0)) throw ParamError("finetune_step: learning rate must be positive");
    if (weights->grad.size() != weights->data.size()) {
        throw ShapeError("finetune_step: gradient buffer missing or mismatched for shape " +
                         shape_str(weights->shape));
    }
    if (keep && keep->size() != weights->data.size() && !keep->empty()) {
        throw ShapeError("finetune_step: keep mask length mismatch");
    }
    for (std::size_t i = 0; i < weights->data.size(); ++i) {
        weights->data[i] -= lr * weights->grad[i];
        if (keep && !keep->empty() && !(*keep)[i]) weights->data[i] = 0.0;
    }
}

void sgd_update(const std::vector<TensorPtr>& params, double lr, const PruneMask* mask) {
    if (mask && !mask->empty() && mask->keep.size() != params.size()) {
        throw ShapeError("sgd_update: mask rows do not match parameter count");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::vector<std::uint8_t>* keep = nullptr;
        if (mask && !mask->empty()) keep = &mask->keep[i];
        finetune_step(params[i], lr, keep);
    }
}

namespace {

// One optimizer pass over the train set; `sample_loss` builds the per-sample
// loss on the active tape.
template <typename LossFn>
std::vector<EpochLog> train_loop(Model& m, const std::vector<const Sample*>& train_set,
                                 const TrainConfig& cfg, const PruneMask* mask,
                                 LossFn&& sample_loss) {
    cfg.validate();
    if (train_set.empty()) throw TrainError("training: empty train set");
    auto params = m.params();
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<EpochLog> logs;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch);
            Tape tape;
            Tape::Scope scope(tape);
            TensorPtr loss;
            for (std::size_t i = start; i < end; ++i) {
                auto term = sample_loss(*train_set[order[i]]);
                loss = loss ? add(loss, term) : term;
            }
            loss = scale(loss, 1.0 / static_cast<double>(end - start));
            if (cfg.l1 > 0.0) {
                TensorPtr penalty;
                for (const auto& p : params) {
                    if (!prunable(p)) continue;
                    auto term = sum(abs(p));
                    penalty = penalty ? add(penalty, term) : term;
                }
                if (penalty) loss = add(loss, scale(penalty, cfg.l1));
            }
            const double value = loss->item();
            if (!std::isfinite(value)) {
                throw TrainError("training: non-finite loss at epoch " + std::to_string(epoch));
            }
            loss_sum += value;
            ++batches;
            zero_grads(params);
            tape.backward(loss);
            sgd_update(params, lr, mask);
        }
        logs.push_back({epoch, loss_sum / static_cast<double>(batches), lr});
    }
    return logs;
}

}  // namespace

std::vector<EpochLog> train_classifier(Model& m, const std::vector<const Sample*>& train_set,
                                       const TrainConfig& cfg, const PruneMask* mask) {
    if (m.spec.head.type != HeadSpec::Type::classifier) {
        throw ConfigError("train_classifier: model has a detector head");
    }
    const int k = m.spec.head.classes;
    return train_loop(m, train_set, cfg, mask, [&](const Sample& s) {
        auto logits = forward_classify(m, s.image);
        auto probs = softmax_with_temperature(logits, 1.0);
        return cross_entropy(probs, label_smooth(s.label, k, cfg.alpha_smooth));
    });
}

std::vector<EpochLog> train_detector(Model& m, const std::vector<const Sample*>& train_set,
                                     const TrainConfig& cfg, const PruneMask* mask) {
    if (m.spec.head.type != HeadSpec::Type::detector) {
        throw ConfigError("train_detector: model has a classifier head");
    }
    return train_loop(m, train_set, cfg, mask, [&](const Sample& s) {
        return detect_loss(forward_grid(m, s.image), s.boxes, m.spec);
    });
}

PruneMask prune_sparse(Model& m, const std::vector<const Sample*>& train_set, double l1_coeff,
                       double t, int finetune_epochs, const TrainConfig& base_cfg) {
    if (l1_coeff < 0.0) throw ParamError("prune_sparse: l1 coefficient must be nonnegative");
    TrainConfig cfg = base_cfg;
    cfg.epochs = finetune_epochs;
    cfg.l1 = l1_coeff;
    if (m.spec.head.type == HeadSpec::Type::classifier) {
        train_classifier(m, train_set, cfg);
    } else {
        train_detector(m, train_set, cfg);
    }
    return prune_model_magnitude(m.params(), t);
}

std::vector<int> predict_classes(const Model& m, const std::vector<const Sample*>& samples) {
    NoGradGuard ng;
    std::vector<int> preds;
    preds.reserve(samples.size());
    for (const auto* s : samples) {
        auto logits = forward_classify(m, s->image);
        int best = 0;
        for (std::size_t i = 1; i < logits->data.size(); ++i) {
            if (logits->data[i] > logits->data[static_cast<std::size_t>(best)]) {
                best = static_cast<int>(i);
            }
        }
        preds.push_back(best);
    }
    return preds;
}

double classification_accuracy(const Model& m, const std::vector<const Sample*>& samples) {
    if (samples.empty()) return 0.0;
    auto preds = predict_classes(m, samples);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == samples[i]->label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace ck
