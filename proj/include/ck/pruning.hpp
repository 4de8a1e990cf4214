#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ck/tensor.hpp"

namespace ck {

enum class PruneStrategy { none, magnitude, random, sparse };

PruneStrategy prune_strategy_from_string(const std::string& s);
std::string to_string(PruneStrategy s);

struct PruneConfig {
    PruneStrategy strategy = PruneStrategy::none;
    double threshold = -1.0;  // < 0 means unset
    double sparsity = -1.0;   // < 0 means unset; exactly one of the two drives magnitude pruning
    double l1 = 1e-4;         // sparse strategy penalty coefficient
    std::uint64_t seed = 1;   // random strategy
    int finetune_epochs = 2;  // sparse strategy pre-prune schedule

    void validate() const;
};

// Per-parameter keep flags, parallel to a model's parameter list. An empty
// row keeps the whole tensor. Masked-out entries must stay exactly 0 through
// every subsequent update.
struct PruneMask {
    std::vector<std::vector<std::uint8_t>> keep;

    bool empty() const { return keep.empty(); }
    double zero_fraction() const;
};

// W'[i] = W[i] if |W[i]| > t else 0. Returns the pruned copy and keep flags.
std::pair<TensorPtr, std::vector<std::uint8_t>> prune_magnitude(const TensorPtr& w, double t);

// True for tensors pruning applies to (weight matrices/kernels, not biases).
bool prunable(const TensorPtr& t);

// Smallest t such that the fraction of prunable weights with |w| <= t is
// >= s, from a global sort of absolute values.
double threshold_for_sparsity(const std::vector<TensorPtr>& params, double s);

// In-place magnitude pruning over a parameter list; biases are kept.
PruneMask prune_model_magnitude(const std::vector<TensorPtr>& params, double t);

// Zeroes exactly floor(s*n) entries per prunable tensor, seeded sampling
// without replacement.
PruneMask prune_model_random(const std::vector<TensorPtr>& params, double s, std::uint64_t seed);

// Re-zeroes masked entries (used after parameter updates).
void apply_mask(const std::vector<TensorPtr>& params, const PruneMask& mask);

// Fraction of exactly-zero entries across prunable tensors.
double model_sparsity(const std::vector<TensorPtr>& params);

}  // namespace ck
