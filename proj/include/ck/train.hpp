#pragma once

#include <cstdint>
#include <vector>

#include "ck/model.hpp"
#include "ck/pruning.hpp"
#include "ck/synthdata.hpp"
#include "ck/tensor.hpp"

namespace ck {

struct TrainConfig {
    int epochs = 20;
    double lr = 0.05;
    int batch = 8;
    double alpha_smooth = 0.1;
    std::uint64_t seed = 1;
    double lr_decay_fraction = 0.1;  // eta <- eta * (1 - fraction) every period epochs
    int lr_decay_period = 5;
    double l1 = 0.0;  // optional L1 penalty on weight matrices

    void validate() const;
};

double lr_at_epoch(const TrainConfig& cfg, int epoch);

void zero_grads(const std::vector<TensorPtr>& params);

// w <- w - lr * grad for one tensor; entries cleared by `keep` stay 0.
void finetune_step(const TensorPtr& weights, double lr,
                   const std::vector<std::uint8_t>* keep = nullptr);

// Whole-model SGD update honoring an optional prune mask.
void sgd_update(const std::vector<TensorPtr>& params, double lr,
                const PruneMask* mask = nullptr);

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    double lr = 0.0;
};

// Smoothed-label cross-entropy SGD training; throws TrainError naming the
// epoch on a non-finite loss.
std::vector<EpochLog> train_classifier(Model& m, const std::vector<const Sample*>& train_set,
                                       const TrainConfig& cfg, const PruneMask* mask = nullptr);

// Grid detection loss SGD training.
std::vector<EpochLog> train_detector(Model& m, const std::vector<const Sample*>& train_set,
                                     const TrainConfig& cfg, const PruneMask* mask = nullptr);

// L1-regularized fine-tuning followed by magnitude pruning at threshold t.
PruneMask prune_sparse(Model& m, const std::vector<const Sample*>& train_set, double l1_coeff,
                       double t, int finetune_epochs, const TrainConfig& base_cfg);

std::vector<int> predict_classes(const Model& m, const std::vector<const Sample*>& samples);
double classification_accuracy(const Model& m, const std::vector<const Sample*>& samples);

}  // namespace ck
