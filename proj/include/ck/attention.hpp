#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ck/tensor.hpp"

namespace ck {

enum class AttentionMode { none, channel, spatial, cbam, sam, bam };

AttentionMode attention_mode_from_string(const std::string& s);
std::string to_string(AttentionMode mode);

// Feature-gating block. Channel gates come from an MLP over the globally
// pooled channel vector; spatial gates from a per-position MLP over the
// channel dimension (weights shared across positions).
struct AttentionBlock {
    AttentionMode mode = AttentionMode::none;
    int channels = 0;
    int reduction = 4;

    TensorPtr w1;    // [C, C/r]
    TensorPtr w2;    // [C/r, C]
    TensorPtr w1_s;  // [C, C/r]
    TensorPtr w2_s;  // [C/r, 1]

    static AttentionBlock create(AttentionMode mode, int channels, int reduction,
                                 std::mt19937_64& rng);

    bool has_channel_branch() const;
    bool has_spatial_branch() const;
    std::vector<std::pair<std::string, TensorPtr>> named_params(const std::string& prefix) const;
};

// sigma(W2 . ReLU(W1 . gap(x))) -> [C], entries in (0,1).
TensorPtr channel_score(const TensorPtr& x, const AttentionBlock& block);

// out[i,j,k] = scores[i] * x[i,j,k]
TensorPtr apply_channel_attention(const TensorPtr& x, const TensorPtr& scores);

// sigma(W2_s . ReLU(W1_s . x[:,i,j])) per position -> [H,W].
TensorPtr spatial_score(const TensorPtr& x, const AttentionBlock& block);

// out[i,j,k] = scores[j,k] * x[i,j,k]
TensorPtr apply_spatial_attention(const TensorPtr& x, const TensorPtr& scores);

// Channel gating then spatial gating; output shape equals input shape.
TensorPtr cbam_forward(const TensorPtr& x, const AttentionBlock& block);

// Spatial gating only.
TensorPtr sam_forward(const TensorPtr& x, const AttentionBlock& block);

// Parallel gates combined as x * (1 + M_channel (x) M_spatial).
TensorPtr bam_forward(const TensorPtr& x, const AttentionBlock& block);

// Dispatch on block.mode; AttentionMode::none returns x unchanged.
TensorPtr attention_forward(const TensorPtr& x, const AttentionBlock& block);

}  // namespace ck
