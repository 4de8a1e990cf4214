#include "ck/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ck/losses.hpp"
#include "ck/ops.hpp"

namespace ck {

PruneMask apply_prune_strategy(Model& m, const std::vector<const Sample*>& train_set,
                               const PruneConfig& cfg, const TrainConfig& train_cfg,
                               double* threshold_out) {
    cfg.validate();
    double t = 0.0;
    PruneMask mask;
    switch (cfg.strategy) {
        case PruneStrategy::none: break;
        case PruneStrategy::magnitude:
            t = cfg.threshold >= 0.0 ? cfg.threshold
                                     : threshold_for_sparsity(m.params(), cfg.sparsity);
            mask = prune_model_magnitude(m.params(), t);
            break;
        case PruneStrategy::random:
            mask = prune_model_random(m.params(), cfg.sparsity >= 0.0 ? cfg.sparsity : 0.0,
                                      cfg.seed);
            break;
        case PruneStrategy::sparse: {
            // L1 shrink first, then threshold from the requested sparsity
            TrainConfig ft = train_cfg;
            ft.epochs = cfg.finetune_epochs;
            ft.l1 = cfg.l1;
            if (m.spec.head.type == HeadSpec::Type::classifier) {
                train_classifier(m, train_set, ft);
            } else {
                train_detector(m, train_set, ft);
            }
            t = cfg.threshold >= 0.0 ? cfg.threshold
                                     : threshold_for_sparsity(m.params(), cfg.sparsity);
            mask = prune_model_magnitude(m.params(), t);
            break;
        }
    }
    if (threshold_out) *threshold_out = t;
    return mask;
}

PipelineResult distillation_pruning_pipeline(const Model& base, const ModelSpec& student_arch,
                                             const PruneConfig& prune_cfg,
                                             const DistillConfig& distill_cfg,
                                             const Dataset& data, const TrainConfig& train_cfg) {
    distill_cfg.validate();
    train_cfg.validate();

    // 1. prune; the pruned model becomes the teacher
    Model teacher = clone_model(base);
    auto train_set = data.train();
    PipelineResult res;
    res.student = build(student_arch, train_cfg.seed);
    res.teacher_mask =
        apply_prune_strategy(teacher, train_set, prune_cfg, train_cfg, &res.prune_threshold);
    res.teacher_params = teacher.parameter_count();
    res.teacher_sparsity = model_sparsity(teacher.params());

    // 2. student must be strictly smaller
    res.student_params = res.student.parameter_count();
    if (res.student_params >= res.teacher_params) {
        throw ConfigError("pipeline: student parameter count " +
                          std::to_string(res.student_params) +
                          " is not smaller than the teacher's " +
                          std::to_string(res.teacher_params));
    }
    if (teacher.spec.head.type != student_arch.head.type ||
        teacher.spec.head.classes != student_arch.head.classes) {
        throw ConfigError("pipeline: teacher and student heads disagree");
    }

    // 3. distillation training with per-epoch weight blending
    const bool classify = teacher.spec.head.type == HeadSpec::Type::classifier;
    auto student_params = res.student.params();
    std::vector<TensorPtr> blended;
    for (const auto& p : student_params) blended.push_back(make_tensor(p->shape, p->data));

    std::mt19937_64 rng(train_cfg.seed);
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainConfig sched = train_cfg;
    sched.lr = distill_cfg.lr;
    for (int epoch = 0; epoch < distill_cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(sched, epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += train_cfg.batch) {
            const std::size_t end = std::min(order.size(), start + train_cfg.batch);
            Tape tape;
            Tape::Scope scope(tape);
            TensorPtr loss;
            for (std::size_t i = start; i < end; ++i) {
                const Sample& s = *train_set[order[i]];
                TensorPtr term;
                if (classify) {
                    TensorPtr teacher_logits;
                    {
                        NoGradGuard ng;
                        teacher_logits = forward_classify(teacher, s.image);
                    }
                    auto student_logits = forward_classify(res.student, s.image);
                    term = distill_loss(teacher_logits, student_logits,
                                        label_smooth(s.label, teacher.spec.head.classes,
                                                     train_cfg.alpha_smooth),
                                        distill_cfg);
                } else {
                    TensorPtr teacher_grid;
                    {
                        NoGradGuard ng;
                        teacher_grid = forward_grid(teacher, s.image);
                    }
                    auto student_grid = forward_grid(res.student, s.image);
                    term = detect_distill_loss(teacher_grid, student_grid, s.boxes,
                                               res.student.spec, distill_cfg);
                }
                loss = loss ? add(loss, term) : term;
            }
            loss = scale(loss, 1.0 / static_cast<double>(end - start));
            const double value = loss->item();
            if (!std::isfinite(value)) {
                throw TrainError("pipeline: non-finite distillation loss at epoch " +
                                 std::to_string(epoch));
            }
            loss_sum += value;
            ++batches;
            zero_grads(student_params);
            tape.backward(loss);
            sgd_update(student_params, lr);
        }
        blend_model_weights(blended, student_params, distill_cfg.blend);
        res.distill_log.push_back(
            {epoch, batches ? loss_sum / static_cast<double>(batches) : 0.0, lr});
    }

    // 4. the blended weights are the delivered student
    for (std::size_t i = 0; i < student_params.size(); ++i) {
        student_params[i]->data = blended[i]->data;
    }
    return res;
}

}  // namespace ck
