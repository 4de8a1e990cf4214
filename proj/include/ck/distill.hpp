#pragma once

#include "ck/detection.hpp"
#include "ck/losses.hpp"
#include "ck/model.hpp"
#include "ck/tensor.hpp"

namespace ck {

struct DistillConfig {
    double temperature = 2.0;  // T_d
    double alpha = 0.7;        // mix between the KL and CE branches
    double blend = 0.7;        // per-epoch weight blending factor
    double lr = 0.05;
    int epochs = 15;

    void validate() const;
};

// alpha * KL(P_T || P_S) + (1-alpha) * CE(P_S at temperature 1, target).
// Both soft distributions use the configured temperature; gradient flows to
// the student logits only.
TensorPtr distill_loss(const TensorPtr& teacher_logits, const TensorPtr& student_logits,
                       const SmoothedLabel& target, const DistillConfig& cfg);

// Detector-head counterpart: the KL branch compares temperature-softened
// teacher and student objectness (as two-way distributions) and per-cell
// class distributions; the CE branch is the ground-truth detection loss.
TensorPtr detect_distill_loss(const TensorPtr& teacher_grid, const TensorPtr& student_grid,
                              const std::vector<Detection>& ground_truth, const ModelSpec& spec,
                              const DistillConfig& cfg);

// w_hat = alpha * w_next + (1-alpha) * w_hat_prev. Errors outside [0,1];
// warns (and proceeds) outside the recommended [0.5, 0.9].
TensorPtr blend_weights(const TensorPtr& w_next, const TensorPtr& w_hat_prev, double alpha_blend);

// In-place per-epoch blending of a whole parameter list.
void blend_model_weights(const std::vector<TensorPtr>& blended_prev,
                         const std::vector<TensorPtr>& current, double alpha_blend);

}  // namespace ck
