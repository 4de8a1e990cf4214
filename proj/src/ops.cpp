#include "ck/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

namespace ck {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;

// c (+)= a[m,k] * b[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
             std::int64_t n, bool accumulate) {
    CMatMap A(a, m, k), B(b, k, n);
    MatMap C(c, m, n);
    if (accumulate)
        C.noalias() += A * B;
    else
        C.noalias() = A * B;
}

// c (+)= a[m,k] * b[n,k]^T
void gemm_nt(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
             std::int64_t n, bool accumulate) {
    CMatMap A(a, m, k), B(b, n, k);
    MatMap C(c, m, n);
    if (accumulate)
        C.noalias() += A * B.transpose();
    else
        C.noalias() = A * B.transpose();
}

// c (+)= a[k,m]^T * b[k,n]
void gemm_tn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
             std::int64_t n, bool accumulate) {
    CMatMap A(a, k, m), B(b, k, n);
    MatMap C(c, m, n);
    if (accumulate)
        C.noalias() += A.transpose() * B;
    else
        C.noalias() = A.transpose() * B;
}

void require_same_shape(const char* op, const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a->shape) + " vs " +
                         shape_str(b->shape));
    }
}

enum class BroadcastKind { full, scalar, prefix, suffix };

struct BroadcastPlan {
    BroadcastKind kind;
    std::int64_t outer;  // replicated leading extent (suffix) or b extent (prefix)
    std::int64_t inner;  // replicated trailing extent (prefix) or b extent (suffix)
};

BroadcastPlan broadcast_plan(const char* op, const TensorPtr& a, const TensorPtr& b) {
    if (a->shape == b->shape) return {BroadcastKind::full, 1, a->size()};
    if (b->size() == 1) return {BroadcastKind::scalar, 1, a->size()};
    const auto& as = a->shape;
    const auto& bs = b->shape;
    if (bs.size() < as.size()) {
        if (std::equal(bs.begin(), bs.end(), as.begin())) {
            std::int64_t inner = 1;
            for (std::size_t i = bs.size(); i < as.size(); ++i) inner *= as[i];
            return {BroadcastKind::prefix, b->size(), inner};
        }
        if (std::equal(bs.rbegin(), bs.rend(), as.rbegin())) {
            std::int64_t outer = 1;
            for (std::size_t i = 0; i + bs.size() < as.size(); ++i) outer *= as[i];
            return {BroadcastKind::suffix, outer, b->size()};
        }
    }
    throw ShapeError(std::string(op) + ": shapes " + shape_str(as) + " and " + shape_str(bs) +
                     " are not broadcast-compatible");
}

}  // namespace

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape("add", a, b);
    std::vector<double> v(a->data.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->data[i] + b->data[i];
    auto out = make_tensor(a->shape, std::move(v));
    Tape* tp = Tape::active();
    const bool ta = tracked(a), tb = tracked(b);
    if (tp && (ta || tb)) {
        mark_output(out);
        if (ta) a->ensure_grad();
        if (tb) b->ensure_grad();
        tp->record([a, b, out, ta, tb] {
            for (std::size_t i = 0; i < out->grad.size(); ++i) {
                if (ta) a->grad[i] += out->grad[i];
                if (tb) b->grad[i] += out->grad[i];
            }
        });
    }
    return out;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape("sub", a, b);
    std::vector<double> v(a->data.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->data[i] - b->data[i];
    auto out = make_tensor(a->shape, std::move(v));
    Tape* tp = Tape::active();
    const bool ta = tracked(a), tb = tracked(b);
    if (tp && (ta || tb)) {
        mark_output(out);
        if (ta) a->ensure_grad();
        if (tb) b->ensure_grad();
        tp->record([a, b, out, ta, tb] {
            for (std::size_t i = 0; i < out->grad.size(); ++i) {
                if (ta) a->grad[i] += out->grad[i];
                if (tb) b->grad[i] -= out->grad[i];
            }
        });
    }
    return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape("mul", a, b);
    std::vector<double> v(a->data.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->data[i] * b->data[i];
    auto out = make_tensor(a->shape, std::move(v));
    Tape* tp = Tape::active();
    const bool ta = tracked(a), tb = tracked(b);
    if (tp && (ta || tb)) {
        mark_output(out);
        if (ta) a->ensure_grad();
        if (tb) b->ensure_grad();
        tp->record([a, b, out, ta, tb] {
            for (std::size_t i = 0; i < out->grad.size(); ++i) {
                if (ta) a->grad[i] += out->grad[i] * b->data[i];
                if (tb) b->grad[i] += out->grad[i] * a->data[i];
            }
        });
    }
    return out;
}

namespace {

TensorPtr broadcast_binary(const char* name, const TensorPtr& a, const TensorPtr& b, bool is_mul) {
    BroadcastPlan plan = broadcast_plan(name, a, b);
    std::vector<double> v(a->data.size());
    auto b_index = [plan](std::int64_t idx) -> std::int64_t {
        switch (plan.kind) {
            case BroadcastKind::full: return idx;
            case BroadcastKind::scalar: return 0;
            case BroadcastKind::prefix: return idx / plan.inner;
            case BroadcastKind::suffix: return idx % plan.inner;
        }
        return 0;
    };
    for (std::int64_t i = 0; i < a->size(); ++i) {
        const double bv = b->data[static_cast<std::size_t>(b_index(i))];
        v[static_cast<std::size_t>(i)] = is_mul ? a->data[i] * bv : a->data[i] + bv;
    }
    auto out = make_tensor(a->shape, std::move(v));
    Tape* tp = Tape::active();
    const bool ta = tracked(a), tb = tracked(b);
    if (tp && (ta || tb)) {
        mark_output(out);
        if (ta) a->ensure_grad();
        if (tb) b->ensure_grad();
        tp->record([a, b, out, ta, tb, b_index, is_mul] {
            for (std::int64_t i = 0; i < out->size(); ++i) {
                const std::int64_t bi = b_index(i);
                const double g = out->grad[static_cast<std::size_t>(i)];
                if (is_mul) {
                    if (ta) a->grad[i] += g * b->data[static_cast<std::size_t>(bi)];
                    if (tb) b->grad[bi] += g * a->data[i];
                } else {
                    if (ta) a->grad[i] += g;
                    if (tb) b->grad[bi] += g;
                }
            }
        });
    }
    return out;
}

}  // namespace

TensorPtr broadcast_mul(const TensorPtr& a, const TensorPtr& b) {
    return broadcast_binary("broadcast_mul", a, b, true);
}

TensorPtr broadcast_add(const TensorPtr& a, const TensorPtr& b) {
    return broadcast_binary("broadcast_add", a, b, false);
}

TensorPtr scale(const TensorPtr& a, double c) {
    std::vector<double> v(a->data.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->data[i] * c;
    auto out = make_tensor(a->shape, std::move(v));
    Tape* tp = Tape::active();
    if (tp && tracked(a)) {
        mark_output(out);
        a->ensure_grad();
        tp->record([a, out, c] {
            for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i] * c;
        });
    }
    return out;
}

TensorPtr relu(const TensorPtr& a) {
    std::vector<double> v(a->data.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a->data[i] > 0.0 ? a->data[i] : 0.0;
    auto out = make_tensor(a->shape, std::move(v));
    Tape* tp = Tape::active();
    if (tp && tracked(a)) {
        mark_output(out);
        a->ensure_grad();
        tp->record([a, out] {
            for (std::size_t i = 0; i < out->grad.size(); ++i) {
                if (a->data[i] > 0.0) a->grad[i] += out->grad[i];
            }
        });
    }
    return out;
}

TensorPtr sigmoid(const TensorPtr& a) {
    std::vector<double> v(a->data.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = a->data[i];
        v[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    auto out = make_tensor(a->shape, std::move(v));
    Tape* tp = Tape::active();
    if (tp && tracked(a)) {
        mark_output(out);
        a->ensure_grad();
        tp->record([a, out] {
            for (std::size_t i = 0; i < out->grad.size(); ++i) {
                const double s = out->data[i];
                a->grad[i] += out->grad[i] * s * (1.0 - s);
            }
        });
    }
    return out;
}

TensorPtr exp(const TensorPtr& a) {
    std::vector<double> v(a->data.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(a->data[i]);
    auto out = make_tensor(a->shape, std::move(v));
    Tape* tp = Tape::active();
    if (tp && tracked(a)) {
        mark_output(out);
        a->ensure_grad();
        tp->record([a, out] {
            for (std::size_t i = 0; i < out->grad.size(); ++i)
                a->grad[i] += out->grad[i] * out->data[i];
        });
    }
    return out;
}

TensorPtr softplus(const TensorPtr& a) {
    std::vector<double> v(a->data.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = a->data[i];
        v[i] = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    }
    auto out = make_tensor(a->shape, std::move(v));
    Tape* tp = Tape::active();
    if (tp && tracked(a)) {
        mark_output(out);
        a->ensure_grad();
        tp->record([a, out] {
            for (std::size_t i = 0; i < out->grad.size(); ++i) {
                const double x = a->data[i];
                const double s =
                    x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
                a->grad[i] += out->grad[i] * s;
            }
        });
    }
    return out;
}

TensorPtr abs(const TensorPtr& a) {
    std::vector<double> v(a->data.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::fabs(a->data[i]);
    auto out = make_tensor(a->shape, std::move(v));
    Tape* tp = Tape::active();
    if (tp && tracked(a)) {
        mark_output(out);
        a->ensure_grad();
        tp->record([a, out] {
            for (std::size_t i = 0; i < out->grad.size(); ++i) {
                const double x = a->data[i];
                if (x > 0.0)
                    a->grad[i] += out->grad[i];
                else if (x < 0.0)
                    a->grad[i] -= out->grad[i];
            }
        });
    }
    return out;
}

TensorPtr sum(const TensorPtr& a) {
    double s = 0.0;
    for (double x : a->data) s += x;
    auto out = scalar_tensor(s);
    Tape* tp = Tape::active();
    if (tp && tracked(a)) {
        mark_output(out);
        a->ensure_grad();
        tp->record([a, out] {
            const double g = out->grad[0];
            for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += g;
        });
    }
    return out;
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0]) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a->shape) + " and " +
                         shape_str(b->shape));
    }
    const std::int64_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
    std::vector<double> v(static_cast<std::size_t>(m * n));
    gemm_nn(a->data.data(), b->data.data(), v.data(), m, k, n, false);
    auto out = make_tensor({m, n}, std::move(v));
    Tape* tp = Tape::active();
    const bool ta = tracked(a), tb = tracked(b);
    if (tp && (ta || tb)) {
        mark_output(out);
        if (ta) a->ensure_grad();
        if (tb) b->ensure_grad();
        tp->record([a, b, out, ta, tb, m, k, n] {
            if (ta) gemm_nt(out->grad.data(), b->data.data(), a->grad.data(), m, n, k, true);
            if (tb) gemm_tn(a->data.data(), out->grad.data(), b->grad.data(), k, m, n, true);
        });
    }
    return out;
}

TensorPtr transpose2d(const TensorPtr& a) {
    if (a->shape.size() != 2) {
        throw ShapeError("transpose2d: expected rank-2 tensor, got " + shape_str(a->shape));
    }
    const std::int64_t m = a->shape[0], n = a->shape[1];
    std::vector<double> v(a->data.size());
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) v[j * m + i] = a->data[i * n + j];
    auto out = make_tensor({n, m}, std::move(v));
    Tape* tp = Tape::active();
    if (tp && tracked(a)) {
        mark_output(out);
        a->ensure_grad();
        tp->record([a, out, m, n] {
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j) a->grad[i * n + j] += out->grad[j * m + i];
        });
    }
    return out;
}

TensorPtr reshape(const TensorPtr& a, std::vector<std::int64_t> shape) {
    if (numel(shape) != a->size()) {
        throw ShapeError("reshape: cannot view " + shape_str(a->shape) + " as " +
                         shape_str(shape));
    }
    auto out = make_tensor(std::move(shape), a->data);
    Tape* tp = Tape::active();
    if (tp && tracked(a)) {
        mark_output(out);
        a->ensure_grad();
        tp->record([a, out] {
            for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
        });
    }
    return out;
}

TensorPtr conv2d(const TensorPtr& x, const TensorPtr& kernels, int stride, int padding) {
    if (x->shape.size() != 3 || kernels->shape.size() != 4) {
        throw ShapeError("conv2d: expected x [C,H,W] and kernels [Co,Ci,k,k], got " +
                         shape_str(x->shape) + " and " + shape_str(kernels->shape));
    }
    if (stride < 1 || padding < 0) throw ParamError("conv2d: stride must be >=1, padding >=0");
    const std::int64_t ci = x->shape[0], h = x->shape[1], w = x->shape[2];
    const std::int64_t co = kernels->shape[0], kc = kernels->shape[1], kh = kernels->shape[2],
                       kw = kernels->shape[3];
    if (kc != ci) {
        throw ShapeError("conv2d: input channels " + shape_str(x->shape) +
                         " do not match kernels " + shape_str(kernels->shape));
    }
    if (kh != kw) throw ShapeError("conv2d: only square kernels supported");
    if (kh > h + 2 * padding || kw > w + 2 * padding) {
        throw ShapeError("conv2d: kernel " + shape_str(kernels->shape) +
                         " larger than padded input " + shape_str(x->shape));
    }
    const std::int64_t ho = (h + 2 * padding - kh) / stride + 1;
    const std::int64_t wo = (w + 2 * padding - kw) / stride + 1;
    const std::int64_t ckk = ci * kh * kw;
    const std::int64_t cols = ho * wo;

    auto im2col = std::make_shared<std::vector<double>>(static_cast<std::size_t>(ckk * cols), 0.0);
    {
        double* col = im2col->data();
        for (std::int64_t c = 0; c < ci; ++c) {
            for (std::int64_t ky = 0; ky < kh; ++ky) {
                for (std::int64_t kx = 0; kx < kw; ++kx) {
                    const std::int64_t row = (c * kh + ky) * kw + kx;
                    double* dst = col + row * cols;
                    for (std::int64_t oy = 0; oy < ho; ++oy) {
                        const std::int64_t iy = oy * stride - padding + ky;
                        if (iy < 0 || iy >= h) continue;
                        const double* src = x->data.data() + (c * h + iy) * w;
                        for (std::int64_t ox = 0; ox < wo; ++ox) {
                            const std::int64_t ix = ox * stride - padding + kx;
                            if (ix >= 0 && ix < w) dst[oy * wo + ox] = src[ix];
                        }
                    }
                }
            }
        }
    }

    std::vector<double> v(static_cast<std::size_t>(co * cols));
    gemm_nn(kernels->data.data(), im2col->data(), v.data(), co, ckk, cols, false);
    auto out = make_tensor({co, ho, wo}, std::move(v));

    Tape* tp = Tape::active();
    const bool tx = tracked(x), tk = tracked(kernels);
    if (tp && (tx || tk)) {
        mark_output(out);
        if (tx) x->ensure_grad();
        if (tk) kernels->ensure_grad();
        tp->record([x, kernels, out, im2col, tx, tk, ci, h, w, co, kh, kw, ho, wo, stride,
                    padding, ckk, cols] {
            if (tk) {
                gemm_nt(out->grad.data(), im2col->data(), kernels->grad.data(), co, cols, ckk,
                        true);
            }
            if (tx) {
                std::vector<double> dcol(static_cast<std::size_t>(ckk * cols));
                gemm_tn(kernels->data.data(), out->grad.data(), dcol.data(), ckk, co, cols, false);
                for (std::int64_t c = 0; c < ci; ++c) {
                    for (std::int64_t ky = 0; ky < kh; ++ky) {
                        for (std::int64_t kx = 0; kx < kw; ++kx) {
                            const std::int64_t row = (c * kh + ky) * kw + kx;
                            const double* src = dcol.data() + row * cols;
                            for (std::int64_t oy = 0; oy < ho; ++oy) {
                                const std::int64_t iy = oy * stride - padding + ky;
                                if (iy < 0 || iy >= h) continue;
                                double* dst = x->grad.data() + (c * h + iy) * w;
                                for (std::int64_t ox = 0; ox < wo; ++ox) {
                                    const std::int64_t ix = ox * stride - padding + kx;
                                    if (ix >= 0 && ix < w) dst[ix] += src[oy * wo + ox];
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr global_avg_pool(const TensorPtr& x) {
    if (x->shape.size() != 3) {
        throw ShapeError("global_avg_pool: expected [C,H,W], got " + shape_str(x->shape));
    }
    const std::int64_t c = x->shape[0], h = x->shape[1], w = x->shape[2];
    const std::int64_t hw = h * w;
    std::vector<double> v(static_cast<std::size_t>(c));
    for (std::int64_t i = 0; i < c; ++i) {
        double s = 0.0;
        const double* src = x->data.data() + i * hw;
        for (std::int64_t j = 0; j < hw; ++j) s += src[j];
        v[static_cast<std::size_t>(i)] = s / static_cast<double>(hw);
    }
    auto out = make_tensor({c}, std::move(v));
    Tape* tp = Tape::active();
    if (tp && tracked(x)) {
        mark_output(out);
        x->ensure_grad();
        tp->record([x, out, c, hw] {
            for (std::int64_t i = 0; i < c; ++i) {
                const double g = out->grad[static_cast<std::size_t>(i)] / static_cast<double>(hw);
                double* dst = x->grad.data() + i * hw;
                for (std::int64_t j = 0; j < hw; ++j) dst[j] += g;
            }
        });
    }
    return out;
}

TensorPtr max_pool2(const TensorPtr& x) {
    if (x->shape.size() != 3) {
        throw ShapeError("max_pool2: expected [C,H,W], got " + shape_str(x->shape));
    }
    const std::int64_t c = x->shape[0], h = x->shape[1], w = x->shape[2];
    const std::int64_t ho = h / 2, wo = w / 2;
    if (ho < 1 || wo < 1) {
        throw ShapeError("max_pool2: spatial extent of " + shape_str(x->shape) +
                         " too small for 2x2 pooling");
    }
    std::vector<double> v(static_cast<std::size_t>(c * ho * wo));
    auto argmax = std::make_shared<std::vector<std::int64_t>>(v.size());
    for (std::int64_t ch = 0; ch < c; ++ch) {
        for (std::int64_t oy = 0; oy < ho; ++oy) {
            for (std::int64_t ox = 0; ox < wo; ++ox) {
                double best = -1e308;
                std::int64_t best_idx = 0;
                for (std::int64_t dy = 0; dy < 2; ++dy) {
                    for (std::int64_t dx = 0; dx < 2; ++dx) {
                        const std::int64_t idx = (ch * h + oy * 2 + dy) * w + ox * 2 + dx;
                        if (x->data[static_cast<std::size_t>(idx)] > best) {
                            best = x->data[static_cast<std::size_t>(idx)];
                            best_idx = idx;
                        }
                    }
                }
                const std::int64_t oidx = (ch * ho + oy) * wo + ox;
                v[static_cast<std::size_t>(oidx)] = best;
                (*argmax)[static_cast<std::size_t>(oidx)] = best_idx;
            }
        }
    }
    auto out = make_tensor({c, ho, wo}, std::move(v));
    Tape* tp = Tape::active();
    if (tp && tracked(x)) {
        mark_output(out);
        x->ensure_grad();
        tp->record([x, out, argmax] {
            for (std::size_t i = 0; i < out->grad.size(); ++i) {
                x->grad[static_cast<std::size_t>((*argmax)[i])] += out->grad[i];
            }
        });
    }
    return out;
}

}  // namespace ck
