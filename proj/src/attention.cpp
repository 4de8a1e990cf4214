#include "ck/attention.hpp"

#include <cmath>

#include "ck/ops.hpp"

namespace ck {

AttentionMode attention_mode_from_string(const std::string& s) {
    if (s == "none") return AttentionMode::none;
    if (s == "channel") return AttentionMode::channel;
    if (s == "spatial") return AttentionMode::spatial;
    if (s == "cbam") return AttentionMode::cbam;
    if (s == "sam") return AttentionMode::sam;
    if (s == "bam") return AttentionMode::bam;
    throw ParamError("unknown attention mode '" + s + "'");
}

std::string to_string(AttentionMode mode) {
    switch (mode) {
        case AttentionMode::none: return "none";
        case AttentionMode::channel: return "channel";
        case AttentionMode::spatial: return "spatial";
        case AttentionMode::cbam: return "cbam";
        case AttentionMode::sam: return "sam";
        case AttentionMode::bam: return "bam";
    }
    return "none";
}

namespace {

TensorPtr init_weight(std::int64_t rows, std::int64_t cols, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> v(static_cast<std::size_t>(rows * cols));
    for (auto& x : v) x = dist(rng);
    return make_tensor({rows, cols}, std::move(v), true);
}

void require_channels(const char* op, const TensorPtr& x, const AttentionBlock& block) {
    if (x->shape.size() != 3) {
        throw ShapeError(std::string(op) + ": expected [C,H,W], got " + shape_str(x->shape));
    }
    if (x->shape[0] != block.channels) {
        throw ShapeError(std::string(op) + ": input has " + std::to_string(x->shape[0]) +
                         " channels, block expects " + std::to_string(block.channels));
    }
}

}  // namespace

bool AttentionBlock::has_channel_branch() const {
    return mode == AttentionMode::channel || mode == AttentionMode::cbam ||
           mode == AttentionMode::bam;
}

bool AttentionBlock::has_spatial_branch() const {
    return mode == AttentionMode::spatial || mode == AttentionMode::sam ||
           mode == AttentionMode::cbam || mode == AttentionMode::bam;
}

AttentionBlock AttentionBlock::create(AttentionMode mode, int channels, int reduction,
                                      std::mt19937_64& rng) {
    if (channels <= 0 || reduction <= 0 || channels % reduction != 0) {
        throw ParamError("AttentionBlock: channels " + std::to_string(channels) +
                         " must be a positive multiple of reduction " + std::to_string(reduction));
    }
    AttentionBlock b;
    b.mode = mode;
    b.channels = channels;
    b.reduction = reduction;
    const std::int64_t c = channels, cr = channels / reduction;
    if (b.has_channel_branch()) {
        b.w1 = init_weight(c, cr, rng);
        b.w2 = init_weight(cr, c, rng);
    }
    if (b.has_spatial_branch()) {
        b.w1_s = init_weight(c, cr, rng);
        b.w2_s = init_weight(cr, 1, rng);
    }
    return b;
}

std::vector<std::pair<std::string, TensorPtr>> AttentionBlock::named_params(
    const std::string& prefix) const {
    std::vector<std::pair<std::string, TensorPtr>> out;
    if (w1) out.emplace_back(prefix + ".w1", w1);
    if (w2) out.emplace_back(prefix + ".w2", w2);
    if (w1_s) out.emplace_back(prefix + ".w1_s", w1_s);
    if (w2_s) out.emplace_back(prefix + ".w2_s", w2_s);
    return out;
}

TensorPtr channel_score(const TensorPtr& x, const AttentionBlock& block) {
    require_channels("channel_score", x, block);
    if (!block.has_channel_branch()) {
        throw ParamError("channel_score: mode " + to_string(block.mode) +
                         " has no channel branch");
    }
    auto pooled = reshape(global_avg_pool(x), {1, block.channels});
    auto hidden = relu(matmul(pooled, block.w1));
    auto scores = sigmoid(matmul(hidden, block.w2));
    return reshape(scores, {block.channels});
}

TensorPtr apply_channel_attention(const TensorPtr& x, const TensorPtr& scores) {
    if (x->shape.size() != 3 || scores->shape.size() != 1 || scores->shape[0] != x->shape[0]) {
        throw ShapeError("apply_channel_attention: scores " + shape_str(scores->shape) +
                         " do not match input " + shape_str(x->shape));
    }
    return broadcast_mul(x, scores);
}

TensorPtr spatial_score(const TensorPtr& x, const AttentionBlock& block) {
    require_channels("spatial_score", x, block);
    if (!block.has_spatial_branch()) {
        throw ParamError("spatial_score: mode " + to_string(block.mode) +
                         " has no spatial branch");
    }
    const std::int64_t c = x->shape[0], h = x->shape[1], w = x->shape[2];
    auto columns = transpose2d(reshape(x, {c, h * w}));  // [HW, C]
    auto hidden = relu(matmul(columns, block.w1_s));
    auto scores = sigmoid(matmul(hidden, block.w2_s));  // [HW, 1]
    return reshape(scores, {h, w});
}

TensorPtr apply_spatial_attention(const TensorPtr& x, const TensorPtr& scores) {
    if (x->shape.size() != 3 || scores->shape.size() != 2 || scores->shape[0] != x->shape[1] ||
        scores->shape[1] != x->shape[2]) {
        throw ShapeError("apply_spatial_attention: scores " + shape_str(scores->shape) +
                         " do not match input " + shape_str(x->shape));
    }
    return broadcast_mul(x, scores);
}

TensorPtr cbam_forward(const TensorPtr& x, const AttentionBlock& block) {
    if (block.mode != AttentionMode::cbam) {
        throw ParamError("cbam_forward: block mode is " + to_string(block.mode));
    }
    auto gated = apply_channel_attention(x, channel_score(x, block));
    return apply_spatial_attention(gated, spatial_score(gated, block));
}

TensorPtr sam_forward(const TensorPtr& x, const AttentionBlock& block) {
    if (block.mode != AttentionMode::sam) {
        throw ParamError("sam_forward: block mode is " + to_string(block.mode));
    }
    return apply_spatial_attention(x, spatial_score(x, block));
}

TensorPtr bam_forward(const TensorPtr& x, const AttentionBlock& block) {
    if (block.mode != AttentionMode::bam) {
        throw ParamError("bam_forward: block mode is " + to_string(block.mode));
    }
    auto channel_gated = apply_channel_attention(x, channel_score(x, block));
    auto both = apply_spatial_attention(channel_gated, spatial_score(x, block));
    return add(x, both);
}

TensorPtr attention_forward(const TensorPtr& x, const AttentionBlock& block) {
    switch (block.mode) {
        case AttentionMode::none: return x;
        case AttentionMode::channel: return apply_channel_attention(x, channel_score(x, block));
        case AttentionMode::spatial:
            return apply_spatial_attention(x, spatial_score(x, block));
        case AttentionMode::cbam: return cbam_forward(x, block);
        case AttentionMode::sam: return sam_forward(x, block);
        case AttentionMode::bam: return bam_forward(x, block);
    }
    return x;
}

}  // namespace ck
