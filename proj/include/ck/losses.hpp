#pragma once

#include "ck/tensor.hpp"

namespace ck {

// Soft target distribution produced by label smoothing: the target index
// holds (1-alpha)+alpha/K, every other entry holds alpha/K.
struct SmoothedLabel {
    std::vector<double> distribution;
    int class_count = 0;
    double alpha = 0.0;
    int target = 0;
};

SmoothedLabel label_smooth(int y, int class_count, double alpha);

// softmax(logits / temperature) over a 1-D logit vector, max-subtracted.
TensorPtr softmax_with_temperature(const TensorPtr& logits, double temperature);

// Sum p_i ln(p_i/q_i) with the 0*ln(0/q)=0 convention. Both inputs must be
// probability vectors (sum 1 within 1e-9); q must be positive wherever p is.
TensorPtr kl_divergence(const TensorPtr& p, const TensorPtr& q);

// -Sum target_i ln(pred_i); pred must be positive wherever target is.
TensorPtr cross_entropy(const TensorPtr& pred, const TensorPtr& target);
TensorPtr cross_entropy(const TensorPtr& pred, const SmoothedLabel& target);

}  // namespace ck
