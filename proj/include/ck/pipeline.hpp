#pragma once

#include "ck/distill.hpp"
#include "ck/model.hpp"
#include "ck/pruning.hpp"
#include "ck/train.hpp"

namespace ck {

struct PipelineResult {
    Model student;
    PruneMask teacher_mask;
    std::int64_t teacher_params = 0;
    std::int64_t student_params = 0;
    double teacher_sparsity = 0.0;
    double prune_threshold = 0.0;
    std::vector<EpochLog> distill_log;
};

// Applies the configured pruning strategy to a copy of `base` (in place for
// the caller-visible teacher copy inside the result is not needed; the
// pruned teacher only serves as the soft-label source).
PruneMask apply_prune_strategy(Model& m, const std::vector<const Sample*>& train_set,
                               const PruneConfig& cfg, const TrainConfig& train_cfg,
                               double* threshold_out = nullptr);

// Prune the base model, initialize a strictly smaller student, train it
// against the pruned teacher's soft targets with per-epoch weight blending,
// and return the blended student.
PipelineResult distillation_pruning_pipeline(const Model& base, const ModelSpec& student_arch,
                                             const PruneConfig& prune_cfg,
                                             const DistillConfig& distill_cfg,
                                             const Dataset& data, const TrainConfig& train_cfg);

}  // namespace ck
