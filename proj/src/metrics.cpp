#include "ck/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace ck {

ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
    ClassificationMetrics m;
    if (c.tp + c.fp > 0) {
        m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    } else {
        m.precision_defined = false;
    }
    if (c.tp + c.fn > 0) {
        m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    } else {
        m.recall_defined = false;
    }
    if (c.total() > 0) m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    if (m.precision + m.recall > 0.0) {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
        m.f1_defined = false;
    }
    return m;
}

std::vector<ConfusionCounts> confusion_from_labels(const std::vector<int>& predicted,
                                                   const std::vector<int>& actual,
                                                   int num_classes) {
    if (predicted.size() != actual.size()) {
        throw ParamError("confusion_from_labels: prediction/label count mismatch");
    }
    std::vector<ConfusionCounts> counts(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        for (int c = 0; c < num_classes; ++c) {
            const bool pred_c = predicted[i] == c;
            const bool act_c = actual[i] == c;
            auto& cc = counts[static_cast<std::size_t>(c)];
            if (pred_c && act_c)
                ++cc.tp;
            else if (pred_c && !act_c)
                ++cc.fp;
            else if (!pred_c && act_c)
                ++cc.fn;
            else
                ++cc.tn;
        }
    }
    return counts;
}

MultiClassReport multiclass_report(const std::vector<int>& predicted,
                                   const std::vector<int>& actual, int num_classes) {
    MultiClassReport rep;
    auto counts = confusion_from_labels(predicted, actual, num_classes);
    std::int64_t correct = 0;
    for (const auto& c : counts) {
        rep.per_class.push_back(classification_metrics(c));
        correct += c.tp;
    }
    for (const auto& m : rep.per_class) {
        rep.macro_precision += m.precision;
        rep.macro_recall += m.recall;
        rep.macro_f1 += m.f1;
        rep.macro_accuracy += m.accuracy;
    }
    const double k = static_cast<double>(num_classes);
    rep.macro_precision /= k;
    rep.macro_recall /= k;
    rep.macro_f1 /= k;
    rep.macro_accuracy /= k;
    rep.top1_accuracy =
        predicted.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(predicted.size());
    return rep;
}

double iou(const Box& a, const Box& b) {
    if (!a.valid() || !b.valid()) {
        throw DataError("iou: degenerate box");
    }
    const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

namespace {

struct FlatPred {
    std::size_t image;
    const Detection* det;
};

// Greedy descending-score matching shared by AP and the threshold counts.
// Returns per-prediction TP flags for predictions of `class_id` with score
// >= score_min, in descending score order.
std::vector<char> greedy_match(const std::vector<std::vector<Detection>>& predictions,
                               const std::vector<std::vector<Detection>>& ground_truth,
                               int class_id, double iou_threshold, double score_min,
                               std::int64_t* gt_count_out) {
    if (predictions.size() != ground_truth.size()) {
        throw ParamError("detection eval: prediction/ground-truth image count mismatch");
    }
    std::vector<FlatPred> preds;
    for (std::size_t img = 0; img < predictions.size(); ++img) {
        for (const auto& d : predictions[img]) {
            if (d.class_id == class_id && d.score >= score_min) preds.push_back({img, &d});
        }
    }
    std::stable_sort(preds.begin(), preds.end(),
                     [](const FlatPred& a, const FlatPred& b) { return a.det->score > b.det->score; });

    std::vector<std::vector<const Detection*>> gts(ground_truth.size());
    std::vector<std::vector<char>> taken(ground_truth.size());
    std::int64_t gt_count = 0;
    for (std::size_t img = 0; img < ground_truth.size(); ++img) {
        for (const auto& g : ground_truth[img]) {
            if (g.class_id == class_id) {
                gts[img].push_back(&g);
                ++gt_count;
            }
        }
        taken[img].assign(gts[img].size(), 0);
    }
    if (gt_count_out) *gt_count_out = gt_count;

    std::vector<char> is_tp(preds.size(), 0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& p = preds[i];
        double best = 0.0;
        std::size_t best_j = 0;
        bool found = false;
        for (std::size_t j = 0; j < gts[p.image].size(); ++j) {
            if (taken[p.image][j]) continue;
            const double v = iou(p.det->box, gts[p.image][j]->box);
            if (v >= iou_threshold && v > best) {
                best = v;
                best_j = j;
                found = true;
            }
        }
        if (found) {
            taken[p.image][best_j] = 1;
            is_tp[i] = 1;
        }
    }
    return is_tp;
}

}  // namespace

ApResult average_precision(const std::vector<std::vector<Detection>>& predictions,
                           const std::vector<std::vector<Detection>>& ground_truth, int class_id,
                           double iou_threshold) {
    std::int64_t gt_count = 0;
    auto is_tp = greedy_match(predictions, ground_truth, class_id, iou_threshold,
                              -std::numeric_limits<double>::infinity(), &gt_count);
    ApResult res;
    res.curve.gt_count = gt_count;
    if (gt_count == 0) return res;  // AP undefined for this class
    res.defined = true;

    std::int64_t tp = 0, fp = 0;
    for (char t : is_tp) {
        if (t)
            ++tp;
        else
            ++fp;
        res.curve.points.push_back({static_cast<double>(tp) / static_cast<double>(gt_count),
                                    static_cast<double>(tp) / static_cast<double>(tp + fp)});
    }

    // Area under the monotone precision envelope, all-point interpolation.
    const auto& pts = res.curve.points;
    std::vector<double> env(pts.size());
    double run = 0.0;
    for (std::size_t i = pts.size(); i-- > 0;) {
        run = std::max(run, pts[i].precision);
        env[i] = run;
    }
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        ap += (pts[i].recall - prev_recall) * env[i];
        prev_recall = pts[i].recall;
    }
    res.ap = ap;
    return res;
}

double mean_average_precision(const std::vector<ApResult>& per_class) {
    double s = 0.0;
    int n = 0;
    for (const auto& r : per_class) {
        if (r.defined) {
            s += r.ap;
            ++n;
        }
    }
    if (n == 0) throw EvalError("mean_average_precision: no class has a defined AP");
    return s / static_cast<double>(n);
}

ConfusionCounts detection_counts(const std::vector<std::vector<Detection>>& predictions,
                                 const std::vector<std::vector<Detection>>& ground_truth,
                                 int class_id, double iou_threshold, double score_threshold) {
    std::int64_t gt_count = 0;
    auto is_tp =
        greedy_match(predictions, ground_truth, class_id, iou_threshold, score_threshold, &gt_count);
    ConfusionCounts c;
    for (char t : is_tp) {
        if (t)
            ++c.tp;
        else
            ++c.fp;
    }
    c.fn = gt_count - c.tp;
    return c;
}

FpsResult bench_fps(const std::function<void()>& forward_batch, int n_iters, int warmup,
                    int batch_size, int repetitions) {
    if (n_iters < 1) throw ParamError("bench_fps: n_iters must be >= 1");
    if (batch_size < 1) throw ParamError("bench_fps: batch_size must be >= 1");
    if (repetitions < 1) throw ParamError("bench_fps: repetitions must be >= 1");
    FpsResult res;
    for (int rep = 0; rep < repetitions; ++rep) {
        for (int i = 0; i < warmup; ++i) forward_batch();
        const auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < n_iters; ++i) forward_batch();
        const auto t1 = std::chrono::steady_clock::now();
        const double secs = std::chrono::duration<double>(t1 - t0).count();
        if (secs <= 0.0) throw MeasureError("bench_fps: zero elapsed time");
        res.repetitions.push_back(static_cast<double>(n_iters) * batch_size / secs);
    }
    std::vector<double> sorted = res.repetitions;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    res.fps = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return res;
}

}  // namespace ck
