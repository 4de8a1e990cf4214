#include "ck/losses.hpp"

#include <algorithm>
#include <cmath>

namespace ck {

SmoothedLabel label_smooth(int y, int class_count, double alpha) {
    if (class_count < 2) {
        throw ParamError("label_smooth: class count must be >= 2, got " +
                         std::to_string(class_count));
    }
    if (y < 0 || y >= class_count) {
        throw ParamError("label_smooth: target " + std::to_string(y) + " outside [0," +
                         std::to_string(class_count) + ")");
    }
    if (alpha < 0.0 || alpha >= 1.0) {
        throw ParamError("label_smooth: smoothing factor " + std::to_string(alpha) +
                         " outside [0,1)");
    }
    SmoothedLabel out;
    out.class_count = class_count;
    out.alpha = alpha;
    out.target = y;
    out.distribution.assign(static_cast<std::size_t>(class_count),
                            alpha / static_cast<double>(class_count));
    out.distribution[static_cast<std::size_t>(y)] =
        (1.0 - alpha) + alpha / static_cast<double>(class_count);
    return out;
}

TensorPtr softmax_with_temperature(const TensorPtr& logits, double temperature) {
    if (!(temperature > 0.0)) {
        throw ParamError("softmax_with_temperature: temperature must be positive, got " +
                         std::to_string(temperature));
    }
    if (logits->shape.size() != 1) {
        throw ShapeError("softmax_with_temperature: expected 1-D logits, got " +
                         shape_str(logits->shape));
    }
    const std::size_t k = logits->data.size();
    const double m = *std::max_element(logits->data.begin(), logits->data.end());
    std::vector<double> v(k);
    double denom = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        v[i] = std::exp((logits->data[i] - m) / temperature);
        denom += v[i];
    }
    for (std::size_t i = 0; i < k; ++i) v[i] /= denom;
    auto out = make_tensor(logits->shape, std::move(v));
    Tape* tp = Tape::active();
    if (tp && tracked(logits)) {
        mark_output(out);
        logits->ensure_grad();
        tp->record([logits, out, temperature] {
            double dot = 0.0;
            for (std::size_t i = 0; i < out->data.size(); ++i) dot += out->grad[i] * out->data[i];
            for (std::size_t i = 0; i < out->data.size(); ++i) {
                logits->grad[i] += out->data[i] * (out->grad[i] - dot) / temperature;
            }
        });
    }
    return out;
}

namespace {

void require_probability(const char* op, const TensorPtr& t) {
    double s = 0.0;
    for (double x : t->data) s += x;
    if (std::fabs(s - 1.0) > 1e-9) {
        throw DomainError(std::string(op) + ": input sums to " + std::to_string(s) +
                          ", expected 1");
    }
}

}  // namespace

TensorPtr kl_divergence(const TensorPtr& p, const TensorPtr& q) {
    if (p->shape != q->shape) {
        throw ShapeError("kl_divergence: shape mismatch " + shape_str(p->shape) + " vs " +
                         shape_str(q->shape));
    }
    require_probability("kl_divergence", p);
    require_probability("kl_divergence", q);
    double loss = 0.0;
    for (std::size_t i = 0; i < p->data.size(); ++i) {
        const double pi = p->data[i];
        if (pi == 0.0) continue;
        if (q->data[i] <= 0.0) {
            throw DomainError("kl_divergence: q is zero at index " + std::to_string(i) +
                              " where p is positive");
        }
        loss += pi * std::log(pi / q->data[i]);
    }
    auto out = scalar_tensor(loss);
    Tape* tp = Tape::active();
    const bool tp_p = tracked(p), tp_q = tracked(q);
    if (tp && (tp_p || tp_q)) {
        mark_output(out);
        if (tp_p) p->ensure_grad();
        if (tp_q) q->ensure_grad();
        tp->record([p, q, out, tp_p, tp_q] {
            const double g = out->grad[0];
            for (std::size_t i = 0; i < p->data.size(); ++i) {
                const double pi = p->data[i];
                if (pi == 0.0) continue;
                if (tp_p) p->grad[i] += g * (std::log(pi / q->data[i]) + 1.0);
                if (tp_q) q->grad[i] -= g * pi / q->data[i];
            }
        });
    }
    return out;
}

TensorPtr cross_entropy(const TensorPtr& pred, const TensorPtr& target) {
    if (pred->shape != target->shape) {
        throw ShapeError("cross_entropy: shape mismatch " + shape_str(pred->shape) + " vs " +
                         shape_str(target->shape));
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < pred->data.size(); ++i) {
        const double t = target->data[i];
        if (t == 0.0) continue;
        if (pred->data[i] <= 0.0) {
            throw DomainError("cross_entropy: prediction is zero at supported index " +
                              std::to_string(i));
        }
        loss -= t * std::log(pred->data[i]);
    }
    auto out = scalar_tensor(loss);
    Tape* tp = Tape::active();
    const bool tp_pred = tracked(pred), tp_t = tracked(target);
    if (tp && (tp_pred || tp_t)) {
        mark_output(out);
        if (tp_pred) pred->ensure_grad();
        if (tp_t) target->ensure_grad();
        tp->record([pred, target, out, tp_pred, tp_t] {
            const double g = out->grad[0];
            for (std::size_t i = 0; i < pred->data.size(); ++i) {
                const double t = target->data[i];
                if (tp_pred && t != 0.0) pred->grad[i] -= g * t / pred->data[i];
                if (tp_t) target->grad[i] -= g * std::log(pred->data[i]);
            }
        });
    }
    return out;
}

TensorPtr cross_entropy(const TensorPtr& pred, const SmoothedLabel& target) {
    auto t = make_tensor({static_cast<std::int64_t>(target.distribution.size())},
                         target.distribution);
    return cross_entropy(pred, t);
}

}  // namespace ck
