#include "ck/pruning.hpp"

#include <algorithm>
#include <cmath>

namespace ck {

PruneStrategy prune_strategy_from_string(const std::string& s) {
    if (s == "none") return PruneStrategy::none;
    if (s == "magnitude") return PruneStrategy::magnitude;
    if (s == "random") return PruneStrategy::random;
    if (s == "sparse") return PruneStrategy::sparse;
    throw ParamError("unknown pruning strategy '" + s + "'");
}

std::string to_string(PruneStrategy s) {
    switch (s) {
        case PruneStrategy::none: return "none";
        case PruneStrategy::magnitude: return "magnitude";
        case PruneStrategy::random: return "random";
        case PruneStrategy::sparse: return "sparse";
    }
    return "none";
}

void PruneConfig::validate() const {
    if (threshold >= 0.0 && sparsity >= 0.0) {
        throw ParamError("prune config: set either threshold or sparsity, not both");
    }
    if (sparsity >= 1.0) throw ParamError("prune config: sparsity must be in [0,1)");
    if (l1 < 0.0) throw ParamError("prune config: l1 coefficient must be nonnegative");
    if (finetune_epochs < 0) throw ParamError("prune config: finetune epochs must be nonnegative");
    if ((strategy == PruneStrategy::magnitude || strategy == PruneStrategy::sparse ||
         strategy == PruneStrategy::random) &&
        threshold < 0.0 && sparsity < 0.0) {
        throw ParamError("prune config: strategy " + to_string(strategy) +
                         " needs a threshold or a target sparsity");
    }
}

double PruneMask::zero_fraction() const {
    std::int64_t zeros = 0, total = 0;
    for (const auto& row : keep) {
        for (std::uint8_t k : row) {
            total += 1;
            if (!k) zeros += 1;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total);
}

std::pair<TensorPtr, std::vector<std::uint8_t>> prune_magnitude(const TensorPtr& w, double t) {
    if (t < 0.0) throw ParamError("prune_magnitude: threshold must be nonnegative");
    std::vector<double> v(w->data.size());
    std::vector<std::uint8_t> keep(w->data.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const bool kept = std::fabs(w->data[i]) > t;
        keep[i] = kept ? 1 : 0;
        v[i] = kept ? w->data[i] : 0.0;
    }
    return {make_tensor(w->shape, std::move(v), w->requires_grad), std::move(keep)};
}

bool prunable(const TensorPtr& t) {
    return t->shape.size() >= 2;
}

double threshold_for_sparsity(const std::vector<TensorPtr>& params, double s) {
    if (s < 0.0 || s >= 1.0) {
        throw ParamError("threshold_for_sparsity: target sparsity " + std::to_string(s) +
                         " outside [0,1)");
    }
    std::vector<double> mags;
    for (const auto& p : params) {
        if (!prunable(p)) continue;
        for (double x : p->data) mags.push_back(std::fabs(x));
    }
    if (mags.empty()) throw ParamError("threshold_for_sparsity: no prunable weights");
    const auto n = static_cast<std::int64_t>(mags.size());
    const auto k = static_cast<std::int64_t>(std::ceil(s * static_cast<double>(n)));
    if (k <= 0) return 0.0;
    std::sort(mags.begin(), mags.end());
    return mags[static_cast<std::size_t>(k - 1)];
}

PruneMask prune_model_magnitude(const std::vector<TensorPtr>& params, double t) {
    PruneMask mask;
    for (const auto& p : params) {
        if (!prunable(p)) {
            mask.keep.emplace_back();
            continue;
        }
        auto [pruned, keep] = prune_magnitude(p, t);
        p->data = pruned->data;
        mask.keep.push_back(std::move(keep));
    }
    return mask;
}

PruneMask prune_model_random(const std::vector<TensorPtr>& params, double s, std::uint64_t seed) {
    if (s < 0.0 || s >= 1.0) throw ParamError("prune_random: sparsity outside [0,1)");
    std::mt19937_64 rng(seed);
    PruneMask mask;
    for (const auto& p : params) {
        if (!prunable(p)) {
            mask.keep.emplace_back();
            continue;
        }
        const std::size_t n = p->data.size();
        const auto drop = static_cast<std::size_t>(std::floor(s * static_cast<double>(n)));
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::uint8_t> keep(n, 1);
        for (std::size_t i = 0; i < drop; ++i) {
            keep[order[i]] = 0;
            p->data[order[i]] = 0.0;
        }
        mask.keep.push_back(std::move(keep));
    }
    return mask;
}

void apply_mask(const std::vector<TensorPtr>& params, const PruneMask& mask) {
    if (mask.empty()) return;
    if (mask.keep.size() != params.size()) {
        throw ShapeError("apply_mask: mask rows " + std::to_string(mask.keep.size()) +
                         " do not match parameter count " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& keep = mask.keep[i];
        if (keep.empty()) continue;
        if (keep.size() != params[i]->data.size()) {
            throw ShapeError("apply_mask: mask row " + std::to_string(i) + " has wrong length");
        }
        for (std::size_t j = 0; j < keep.size(); ++j) {
            if (!keep[j]) params[i]->data[j] = 0.0;
        }
    }
}

double model_sparsity(const std::vector<TensorPtr>& params) {
    std::int64_t zeros = 0, total = 0;
    for (const auto& p : params) {
        if (!prunable(p)) continue;
        for (double x : p->data) {
            ++total;
            if (x == 0.0) ++zeros;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total);
}

}  // namespace ck
