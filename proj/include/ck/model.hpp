#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ck/attention.hpp"
#include "ck/detection.hpp"
#include "ck/tensor.hpp"

namespace ck {

struct StageSpec {
    int channels = 0;
    int blocks = 1;
    int stride = 1;  // applied by the first block of the stage
};

struct HeadSpec {
    enum class Type { classifier, detector };
    Type type = Type::classifier;
    int classes = 3;
    int grid = 8;   // detector only
    int boxes = 1;  // detector only
};

// Architecture descriptor. The stem is a stride-2 3x3 convolution followed
// by 2x2 max pooling, so stages start at input_size/4.
struct ModelSpec {
    int input_channels = 3;
    int input_size = 64;
    int stem_channels = 16;
    std::vector<StageSpec> stages;
    AttentionMode attention = AttentionMode::none;
    int attention_reduction = 4;
    HeadSpec head;
    double anchor_px = 8.0;  // detector box size scale

    void validate() const;
    int feature_map_size() const;
    int feature_channels() const;
    std::int64_t parameter_count() const;  // closed form from the spec alone

    static ModelSpec teacher_classifier(int classes = 3, AttentionMode attention = AttentionMode::cbam);
    static ModelSpec student_classifier(int classes = 3, AttentionMode attention = AttentionMode::cbam);
    static ModelSpec teacher_detector(int classes = 1, AttentionMode attention = AttentionMode::cbam);
    static ModelSpec student_detector(int classes = 1, AttentionMode attention = AttentionMode::cbam);
};

nlohmann::json model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

struct ConvLayer {
    TensorPtr w;  // [Co,Ci,k,k]
    TensorPtr b;  // [Co]
    int stride = 1;
    int padding = 1;
};

struct LinearLayer {
    TensorPtr w;  // [in,out]
    TensorPtr b;  // [out]
};

struct ResidualBlock {
    ConvLayer conv1;
    ConvLayer conv2;
    std::optional<ConvLayer> proj;  // 1x1 shortcut when shape changes
    std::optional<AttentionBlock> attention;
};

struct Model {
    ModelSpec spec;
    ConvLayer stem;
    std::vector<std::vector<ResidualBlock>> stages;
    LinearLayer fc;   // classifier head
    ConvLayer head;   // detector head (1x1)

    std::vector<std::pair<std::string, TensorPtr>> named_params() const;
    std::vector<TensorPtr> params() const;
    std::int64_t parameter_count() const;
};

// Seeded build; identical (spec, seed) pairs produce identical parameters.
Model build(const ModelSpec& spec, std::uint64_t seed);

// Deep copy (parameters are cloned, not shared).
Model clone_model(const Model& m);

TensorPtr forward_features(const Model& m, const TensorPtr& image);
TensorPtr forward_classify(const Model& m, const TensorPtr& image);  // logits [K]
TensorPtr forward_grid(const Model& m, const TensorPtr& image);      // [B*5+K, G, G]

// Grid decode: per cell and box, center offsets via sigmoid, width/height via
// exp times anchor_px, objectness via sigmoid; score = objectness * best
// class probability.
std::vector<Detection> decode_grid(const ModelSpec& spec, const Tensor& grid,
                                   double score_threshold);

// Greedy per-class suppression of boxes with IoU strictly above the threshold.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold);

std::vector<Detection> forward_detect(const Model& m, const TensorPtr& image,
                                      double score_threshold = 0.5, double nms_iou = 0.5);

// Squared error on box geometry and objectness plus cross-entropy on class
// scores for cells matched by ground-truth center containment; unmatched
// objectness is pushed to zero.
TensorPtr detect_loss(const TensorPtr& grid, const std::vector<Detection>& ground_truth,
                      const ModelSpec& spec);

// Checkpoint directory: model.json (spec descriptor + parameter names) and
// params.ckt (tensor containers, same order).
void save_checkpoint(const std::string& dir, const Model& m,
                     const nlohmann::json& extra = nlohmann::json::object());
Model load_checkpoint(const std::string& dir);
nlohmann::json checkpoint_meta(const std::string& dir);

}  // namespace ck
