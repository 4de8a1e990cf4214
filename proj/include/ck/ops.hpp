#pragma once

#include "ck/tensor.hpp"

namespace ck {

// Primitive tensor operations. Each op computes its forward value and, when
// an active tape is tracking any input, registers the matching gradient rule.
// Shape violations throw ShapeError naming both shapes.

TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);

// Multiplies/adds `b` broadcast against `a`. Accepts equal shapes, a scalar
// `b`, a `b` whose shape is a prefix of `a`'s (e.g. [C] against [C,H,W]), or
// a suffix of `a`'s (e.g. [H,W] against [C,H,W]). Prefix wins when both fit.
TensorPtr broadcast_mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr broadcast_add(const TensorPtr& a, const TensorPtr& b);

TensorPtr scale(const TensorPtr& a, double c);
TensorPtr relu(const TensorPtr& a);
TensorPtr sigmoid(const TensorPtr& a);
TensorPtr exp(const TensorPtr& a);
TensorPtr softplus(const TensorPtr& a);  // ln(1 + e^x), computed stably
TensorPtr abs(const TensorPtr& a);       // subgradient 0 at 0

TensorPtr sum(const TensorPtr& a);  // -> scalar

// [m,k] x [k,n] -> [m,n]
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
TensorPtr transpose2d(const TensorPtr& a);

// Copies into a new shape with identical element count.
TensorPtr reshape(const TensorPtr& a, std::vector<std::int64_t> shape);

// Cross-correlation with zero padding over x:[C_in,H,W], kernels:
// [C_out,C_in,k,k]. Output H' = floor((H+2p-k)/stride)+1.
TensorPtr conv2d(const TensorPtr& x, const TensorPtr& kernels, int stride, int padding);

// [C,H,W] -> [C]; entry i is the mean over the spatial extent of channel i.
TensorPtr global_avg_pool(const TensorPtr& x);

// 2x2 stride-2 max pooling over [C,H,W]; odd trailing rows/cols are dropped.
TensorPtr max_pool2(const TensorPtr& x);

}  // namespace ck
