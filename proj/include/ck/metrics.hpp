#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "ck/detection.hpp"

namespace ck {

// One-vs-rest confusion counts for a single class.
struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
};

// Per-class metrics. A metric with an empty denominator is reported as 0
// with its defined-flag cleared.
struct ClassificationMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;
    double f1 = 0.0;
    bool precision_defined = true;
    bool recall_defined = true;
    bool f1_defined = true;
};

ClassificationMetrics classification_metrics(const ConfusionCounts& counts);

// One-vs-rest counts per class from single-label predictions.
std::vector<ConfusionCounts> confusion_from_labels(const std::vector<int>& predicted,
                                                   const std::vector<int>& actual,
                                                   int num_classes);

// Macro average plus top-1 accuracy over single-label predictions.
struct MultiClassReport {
    std::vector<ClassificationMetrics> per_class;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double macro_accuracy = 0.0;
    double top1_accuracy = 0.0;
};

MultiClassReport multiclass_report(const std::vector<int>& predicted,
                                   const std::vector<int>& actual, int num_classes);

// Intersection over union; throws DataError on degenerate boxes.
double iou(const Box& a, const Box& b);

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct PrCurve {
    std::vector<PrPoint> points;  // one point per prediction, descending score
    std::int64_t gt_count = 0;
};

struct ApResult {
    double ap = 0.0;
    bool defined = false;  // false when the class has no ground truth
    PrCurve curve;
};

// All-point interpolated average precision for one class. Outer vectors are
// per image; detections of other classes are ignored. Matching is greedy by
// descending score against the unmatched ground-truth box of maximum IoU.
ApResult average_precision(const std::vector<std::vector<Detection>>& predictions,
                           const std::vector<std::vector<Detection>>& ground_truth, int class_id,
                           double iou_threshold = 0.5);

// Arithmetic mean over classes with a defined AP; throws EvalError when no
// class has one.
double mean_average_precision(const std::vector<ApResult>& per_class);

// Detection-level confusion counts at a fixed score threshold (for the
// precision/recall columns of the detection tables).
ConfusionCounts detection_counts(const std::vector<std::vector<Detection>>& predictions,
                                 const std::vector<std::vector<Detection>>& ground_truth,
                                 int class_id, double iou_threshold, double score_threshold);

struct FpsResult {
    double fps = 0.0;                // median over repetitions
    std::vector<double> repetitions;
};

// Times `forward_batch` (one call = `batch_size` frames) n_iters times after
// `warmup` untimed calls; repeats the measurement and reports the median.
FpsResult bench_fps(const std::function<void()>& forward_batch, int n_iters, int warmup,
                    int batch_size = 1, int repetitions = 5);

}  // namespace ck
