#include "ck/distill.hpp"

#include <cmath>
#include <iostream>

#include "ck/ops.hpp"

namespace ck {

void DistillConfig::validate() const {
    if (!(temperature > 0.0)) throw ParamError("distill config: temperature must be positive");
    if (alpha < 0.0 || alpha > 1.0) throw ParamError("distill config: alpha outside [0,1]");
    if (blend < 0.0 || blend > 1.0) throw ParamError("distill config: blend outside [0,1]");
    if (!(lr > 0.0)) throw ParamError("distill config: learning rate must be positive");
    if (epochs < 0) throw ParamError("distill config: epochs must be nonnegative");
}

TensorPtr distill_loss(const TensorPtr& teacher_logits, const TensorPtr& student_logits,
                       const SmoothedLabel& target, const DistillConfig& cfg) {
    cfg.validate();
    if (teacher_logits->shape != student_logits->shape) {
        throw ShapeError("distill_loss: logit shape mismatch " + shape_str(teacher_logits->shape) +
                         " vs " + shape_str(student_logits->shape));
    }
    TensorPtr teacher_probs;
    {
        NoGradGuard ng;  // the teacher side is a constant
        teacher_probs = softmax_with_temperature(teacher_logits, cfg.temperature);
    }
    auto student_soft = softmax_with_temperature(student_logits, cfg.temperature);
    auto l_kl = kl_divergence(teacher_probs, student_soft);
    auto student_hard = softmax_with_temperature(student_logits, 1.0);
    auto l_ce = cross_entropy(student_hard, target);
    return add(scale(l_kl, cfg.alpha), scale(l_ce, 1.0 - cfg.alpha));
}

namespace {

double sigmoid_scalar(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double bernoulli_kl(double p, double q) {
    double v = 0.0;
    if (p > 0.0) v += p * std::log(p / q);
    if (p < 1.0) v += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
    return v;
}

}  // namespace

TensorPtr detect_distill_loss(const TensorPtr& teacher_grid, const TensorPtr& student_grid,
                              const std::vector<Detection>& ground_truth, const ModelSpec& spec,
                              const DistillConfig& cfg) {
    cfg.validate();
    if (teacher_grid->shape != student_grid->shape) {
        throw ShapeError("detect_distill_loss: grid shape mismatch " +
                         shape_str(teacher_grid->shape) + " vs " + shape_str(student_grid->shape));
    }
    const int g = spec.head.grid, nb = spec.head.boxes, k = spec.head.classes;
    const double temp = cfg.temperature;
    auto idx = [&](std::int64_t ch, int r, int c) {
        return static_cast<std::size_t>((ch * g + r) * g + c);
    };

    // KL branch: objectness Bernoulli per box plus class categorical per cell,
    // both at the distillation temperature. dKL/dz_student = (q - p) / T.
    double kl = 0.0;
    auto dgrid = std::make_shared<std::vector<double>>(student_grid->data.size(), 0.0);
    for (int r = 0; r < g; ++r) {
        for (int c = 0; c < g; ++c) {
            for (int b = 0; b < nb; ++b) {
                const std::size_t oi = idx(b * 5 + 4, r, c);
                const double p = sigmoid_scalar(teacher_grid->data[oi] / temp);
                const double q = sigmoid_scalar(student_grid->data[oi] / temp);
                kl += bernoulli_kl(p, q);
                (*dgrid)[oi] += (q - p) / temp;
            }
            if (k > 1) {
                double mt = -1e308, ms = -1e308;
                for (int j = 0; j < k; ++j) {
                    mt = std::max(mt, teacher_grid->data[idx(nb * 5 + j, r, c)]);
                    ms = std::max(ms, student_grid->data[idx(nb * 5 + j, r, c)]);
                }
                double dt = 0.0, ds = 0.0;
                for (int j = 0; j < k; ++j) {
                    dt += std::exp((teacher_grid->data[idx(nb * 5 + j, r, c)] - mt) / temp);
                    ds += std::exp((student_grid->data[idx(nb * 5 + j, r, c)] - ms) / temp);
                }
                for (int j = 0; j < k; ++j) {
                    const std::size_t ci = idx(nb * 5 + j, r, c);
                    const double p = std::exp((teacher_grid->data[ci] - mt) / temp) / dt;
                    const double q = std::exp((student_grid->data[ci] - ms) / temp) / ds;
                    if (p > 0.0) kl += p * std::log(p / q);
                    (*dgrid)[ci] += (q - p) / temp;
                }
            }
        }
    }

    auto kl_term = scalar_tensor(kl);
    Tape* tp = Tape::active();
    if (tp && tracked(student_grid)) {
        mark_output(kl_term);
        student_grid->ensure_grad();
        tp->record([student_grid, kl_term, dgrid] {
            const double gscale = kl_term->grad[0];
            for (std::size_t i = 0; i < dgrid->size(); ++i) {
                student_grid->grad[i] += gscale * (*dgrid)[i];
            }
        });
    }
    auto ce_term = detect_loss(student_grid, ground_truth, spec);
    return add(scale(kl_term, cfg.alpha), scale(ce_term, 1.0 - cfg.alpha));
}

TensorPtr blend_weights(const TensorPtr& w_next, const TensorPtr& w_hat_prev, double alpha_blend) {
    if (alpha_blend < 0.0 || alpha_blend > 1.0) {
        throw ParamError("blend_weights: alpha " + std::to_string(alpha_blend) +
                         " outside [0,1]");
    }
    if (alpha_blend < 0.5 || alpha_blend > 0.9) {
        std::cerr << "warning: blend factor " << alpha_blend
                  << " outside the recommended [0.5, 0.9]\n";
    }
    if (w_next->shape != w_hat_prev->shape) {
        throw ShapeError("blend_weights: shape mismatch " + shape_str(w_next->shape) + " vs " +
                         shape_str(w_hat_prev->shape));
    }
    std::vector<double> v(w_next->data.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = alpha_blend * w_next->data[i] + (1.0 - alpha_blend) * w_hat_prev->data[i];
    }
    return make_tensor(w_next->shape, std::move(v));
}

void blend_model_weights(const std::vector<TensorPtr>& blended_prev,
                         const std::vector<TensorPtr>& current, double alpha_blend) {
    if (blended_prev.size() != current.size()) {
        throw ShapeError("blend_model_weights: parameter list length mismatch");
    }
    for (std::size_t i = 0; i < current.size(); ++i) {
        auto next = blend_weights(current[i], blended_prev[i], alpha_blend);
        blended_prev[i]->data = next->data;
    }
}

}  // namespace ck
