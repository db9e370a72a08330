#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pocf/tensor.hpp"

namespace pocf {

namespace detail {

/// c += a * b, row-major, a: [m x k], b: [k x n], c: [m x n].
/// i-k-j order keeps the inner loop contiguous so it vectorizes.
template <class S>
void matmul_acc(const S* a, const S* b, S* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const S* arow = a + static_cast<std::size_t>(i) * k;
        S* crow = c + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const S aik = arow[kk];
            const S* brow = b + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

template <class S>
std::vector<S> transpose_raw(const S* a, int rows, int cols) {
    std::vector<S> t(static_cast<std::size_t>(rows) * cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            t[static_cast<std::size_t>(j) * rows + i] = a[static_cast<std::size_t>(i) * cols + j];
    return t;
}

template <class S>
void require_defined(const TensorT<S>& t, const char* op) {
    if (!t.defined()) throw contract_error(std::string(op) + ": undefined tensor operand");
}

template <class S>
TapeT<S>* first_tape(std::initializer_list<const TensorT<S>*> ins) {
    for (const auto* t : ins)
        if (t->tape) return t->tape;
    return nullptr;
}

template <class S>
bool any_requires_grad(std::initializer_list<const TensorT<S>*> ins) {
    for (const auto* t : ins)
        if (t->requires_grad()) return true;
    return false;
}

/// Tape/requires_grad propagation shared by every op. Returns the tape to
/// record on, or nullptr when the op runs outside any recording context.
template <class S>
TapeT<S>* propagate(TensorT<S>& out, std::initializer_list<const TensorT<S>*> ins) {
    TapeT<S>* tape = first_tape<S>(ins);
    out.tape = tape;
    if (tape && any_requires_grad<S>(ins)) {
        out.d->requires_grad = true;
        return tape;
    }
    return nullptr;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// structural ops

template <class S>
TensorT<S> reshape(const TensorT<S>& x, Shape new_shape) {
    detail::require_defined(x, "reshape");
    validate_shape(new_shape, "reshape");
    if (shape_numel(new_shape) != x.size())
        throw dim_error("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(new_shape));
    TensorT<S> out = TensorT<S>::from_data(std::move(new_shape), x.values());
    if (auto* tape = detail::propagate(out, {&x})) {
        auto dx = x.d, dout = out.d;
        tape->record([dx, dout] {
            if (dout->grad.empty() || !dx->requires_grad) return;
            auto& g = ensure_grad(*dx);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += dout->grad[i];
        });
    }
    return out;
}

template <class S>
TensorT<S> transpose(const TensorT<S>& x) {
    detail::require_defined(x, "transpose");
    if (x.ndim() != 2) throw dim_error("transpose: expected 2-d tensor, got " + shape_str(x.shape()));
    const int r = x.dim(0), c = x.dim(1);
    TensorT<S> out = TensorT<S>::from_data({c, r}, detail::transpose_raw(x.data(), r, c));
    if (auto* tape = detail::propagate(out, {&x})) {
        auto dx = x.d, dout = out.d;
        tape->record([dx, dout, r, c] {
            if (dout->grad.empty() || !dx->requires_grad) return;
            auto& g = ensure_grad(*dx);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    g[static_cast<std::size_t>(i) * c + j] += dout->grad[static_cast<std::size_t>(j) * r + i];
        });
    }
    return out;
}

/// Rows [start, start+len) of a 2-d tensor.
template <class S>
TensorT<S> slice_rows(const TensorT<S>& x, int start, int len) {
    detail::require_defined(x, "slice_rows");
    if (x.ndim() != 2) throw dim_error("slice_rows: expected 2-d tensor, got " + shape_str(x.shape()));
    const int r = x.dim(0), c = x.dim(1);
    if (start < 0 || len <= 0 || start + len > r)
        throw dim_error("slice_rows: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                        ") outside " + shape_str(x.shape()));
    TensorT<S> out = TensorT<S>::zeros({len, c});
    std::copy_n(x.data() + static_cast<std::size_t>(start) * c, static_cast<std::size_t>(len) * c, out.data());
    if (auto* tape = detail::propagate(out, {&x})) {
        auto dx = x.d, dout = out.d;
        tape->record([dx, dout, start, len, c] {
            if (dout->grad.empty() || !dx->requires_grad) return;
            auto& g = ensure_grad(*dx);
            for (std::size_t i = 0; i < static_cast<std::size_t>(len) * c; ++i)
                g[static_cast<std::size_t>(start) * c + i] += dout->grad[i];
        });
    }
    return out;
}

/// Columns [start, start+len) of a 2-d tensor.
template <class S>
TensorT<S> slice_cols(const TensorT<S>& x, int start, int len) {
    detail::require_defined(x, "slice_cols");
    if (x.ndim() != 2) throw dim_error("slice_cols: expected 2-d tensor, got " + shape_str(x.shape()));
    const int r = x.dim(0), c = x.dim(1);
    if (start < 0 || len <= 0 || start + len > c)
        throw dim_error("slice_cols: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                        ") outside " + shape_str(x.shape()));
    TensorT<S> out = TensorT<S>::zeros({r, len});
    for (int i = 0; i < r; ++i)
        std::copy_n(x.data() + static_cast<std::size_t>(i) * c + start, len,
                    out.data() + static_cast<std::size_t>(i) * len);
    if (auto* tape = detail::propagate(out, {&x})) {
        auto dx = x.d, dout = out.d;
        tape->record([dx, dout, r, c, start, len] {
            if (dout->grad.empty() || !dx->requires_grad) return;
            auto& g = ensure_grad(*dx);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < len; ++j)
                    g[static_cast<std::size_t>(i) * c + start + j] +=
                        dout->grad[static_cast<std::size_t>(i) * len + j];
        });
    }
    return out;
}

/// Stacks 2-d tensors of equal width on top of each other.
template <class S>
TensorT<S> concat_rows(const std::vector<TensorT<S>>& parts) {
    if (parts.empty()) throw contract_error("concat_rows: no operands");
    int total = 0;
    const int c = parts[0].defined() && parts[0].ndim() == 2 ? parts[0].dim(1) : -1;
    for (const auto& p : parts) {
        detail::require_defined(p, "concat_rows");
        if (p.ndim() != 2 || p.dim(1) != c)
            throw dim_error("concat_rows: width mismatch at " + shape_str(p.shape()));
        total += p.dim(0);
    }
    TensorT<S> out = TensorT<S>::zeros({total, c});
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy_n(p.data(), p.size(), out.data() + off);
        off += p.size();
    }
    TapeT<S>* tape = nullptr;
    bool rg = false;
    for (const auto& p : parts) {
        if (!tape && p.tape) tape = p.tape;
        rg = rg || p.requires_grad();
    }
    out.tape = tape;
    if (tape && rg) {
        out.d->requires_grad = true;
        std::vector<std::shared_ptr<TensorDataT<S>>> ins;
        ins.reserve(parts.size());
        for (const auto& p : parts) ins.push_back(p.d);
        auto dout = out.d;
        tape->record([ins, dout] {
            if (dout->grad.empty()) return;
            std::size_t off2 = 0;
            for (const auto& in : ins) {
                if (in->requires_grad) {
                    auto& g = ensure_grad(*in);
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += dout->grad[off2 + i];
                }
                off2 += in->values.size();
            }
        });
    }
    return out;
}

/// Places 2-d tensors of equal height side by side.
template <class S>
TensorT<S> concat_cols(const std::vector<TensorT<S>>& parts) {
    if (parts.empty()) throw contract_error("concat_cols: no operands");
    const int r = parts[0].defined() && parts[0].ndim() == 2 ? parts[0].dim(0) : -1;
    int total = 0;
    for (const auto& p : parts) {
        detail::require_defined(p, "concat_cols");
        if (p.ndim() != 2 || p.dim(0) != r)
            throw dim_error("concat_cols: height mismatch at " + shape_str(p.shape()));
        total += p.dim(1);
    }
    TensorT<S> out = TensorT<S>::zeros({r, total});
    int off = 0;
    for (const auto& p : parts) {
        const int w = p.dim(1);
        for (int i = 0; i < r; ++i)
            std::copy_n(p.data() + static_cast<std::size_t>(i) * w, w,
                        out.data() + static_cast<std::size_t>(i) * total + off);
        off += w;
    }
    TapeT<S>* tape = nullptr;
    bool rg = false;
    for (const auto& p : parts) {
        if (!tape && p.tape) tape = p.tape;
        rg = rg || p.requires_grad();
    }
    out.tape = tape;
    if (tape && rg) {
        out.d->requires_grad = true;
        std::vector<std::shared_ptr<TensorDataT<S>>> ins;
        std::vector<int> widths;
        for (const auto& p : parts) {
            ins.push_back(p.d);
            widths.push_back(p.dim(1));
        }
        auto dout = out.d;
        tape->record([ins, widths, dout, r, total] {
            if (dout->grad.empty()) return;
            int off2 = 0;
            for (std::size_t pi = 0; pi < ins.size(); ++pi) {
                const int w = widths[pi];
                if (ins[pi]->requires_grad) {
                    auto& g = ensure_grad(*ins[pi]);
                    for (int i = 0; i < r; ++i)
                        for (int j = 0; j < w; ++j)
                            g[static_cast<std::size_t>(i) * w + j] +=
                                dout->grad[static_cast<std::size_t>(i) * total + off2 + j];
                }
                off2 += w;
            }
        });
    }
    return out;
}

/// x[index] along the leading axis; output drops that axis.
template <class S>
TensorT<S> select(const TensorT<S>& x, int index) {
    detail::require_defined(x, "select");
    if (x.ndim() < 2) throw dim_error("select: need at least 2 axes, got " + shape_str(x.shape()));
    if (index < 0 || index >= x.dim(0))
        throw dim_error("select: index " + std::to_string(index) + " outside " + shape_str(x.shape()));
    Shape sub(x.shape().begin() + 1, x.shape().end());
    const std::size_t stride = shape_numel(sub);
    TensorT<S> out = TensorT<S>::zeros(sub);
    std::copy_n(x.data() + stride * index, stride, out.data());
    if (auto* tape = detail::propagate(out, {&x})) {
        auto dx = x.d, dout = out.d;
        tape->record([dx, dout, stride, index] {
            if (dout->grad.empty() || !dx->requires_grad) return;
            auto& g = ensure_grad(*dx);
            for (std::size_t i = 0; i < stride; ++i) g[stride * index + i] += dout->grad[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// arithmetic

template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    detail::require_defined(a, "add");
    detail::require_defined(b, "add");
    if (a.shape() != b.shape())
        throw dim_error("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    TensorT<S> out = TensorT<S>::zeros(a.shape());
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    if (auto* tape = detail::propagate(out, {&a, &b})) {
        auto da = a.d, db = b.d, dout = out.d;
        tape->record([da, db, dout] {
            if (dout->grad.empty()) return;
            if (da->requires_grad) {
                auto& g = ensure_grad(*da);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += dout->grad[i];
            }
            if (db->requires_grad) {
                auto& g = ensure_grad(*db);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += dout->grad[i];
            }
        });
    }
    return out;
}

/// x: [r x c] plus a bias row broadcast over rows. The only broadcasting
/// this library does.
template <class S>
TensorT<S> add_bias(const TensorT<S>& x, const TensorT<S>& bias) {
    detail::require_defined(x, "add_bias");
    detail::require_defined(bias, "add_bias");
    if (x.ndim() != 2 || bias.ndim() != 1 || bias.dim(0) != x.dim(1))
        throw dim_error("add_bias: " + shape_str(x.shape()) + " with bias " + shape_str(bias.shape()));
    const int r = x.dim(0), c = x.dim(1);
    TensorT<S> out = TensorT<S>::zeros(x.shape());
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out.data()[static_cast<std::size_t>(i) * c + j] = x.data()[static_cast<std::size_t>(i) * c + j] + bias.data()[j];
    if (auto* tape = detail::propagate(out, {&x, &bias})) {
        auto dx = x.d, db = bias.d, dout = out.d;
        tape->record([dx, db, dout, r, c] {
            if (dout->grad.empty()) return;
            if (dx->requires_grad) {
                auto& g = ensure_grad(*dx);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += dout->grad[i];
            }
            if (db->requires_grad) {
                auto& g = ensure_grad(*db);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) g[j] += dout->grad[static_cast<std::size_t>(i) * c + j];
            }
        });
    }
    return out;
}

template <class S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
    detail::require_defined(a, "mul");
    detail::require_defined(b, "mul");
    if (a.shape() != b.shape())
        throw dim_error("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    TensorT<S> out = TensorT<S>::zeros(a.shape());
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
    if (auto* tape = detail::propagate(out, {&a, &b})) {
        auto da = a.d, db = b.d, dout = out.d;
        tape->record([da, db, dout] {
            if (dout->grad.empty()) return;
            if (da->requires_grad) {
                auto& g = ensure_grad(*da);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += dout->grad[i] * db->values[i];
            }
            if (db->requires_grad) {
                auto& g = ensure_grad(*db);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += dout->grad[i] * da->values[i];
            }
        });
    }
    return out;
}

template <class S>
TensorT<S> scale(const TensorT<S>& x, S s) {
    detail::require_defined(x, "scale");
    TensorT<S> out = TensorT<S>::zeros(x.shape());
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * s;
    if (auto* tape = detail::propagate(out, {&x})) {
        auto dx = x.d, dout = out.d;
        tape->record([dx, dout, s] {
            if (dout->grad.empty() || !dx->requires_grad) return;
            auto& g = ensure_grad(*dx);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += dout->grad[i] * s;
        });
    }
    return out;
}

template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
    detail::require_defined(a, "matmul");
    detail::require_defined(b, "matmul");
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        throw dim_error("matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    TensorT<S> out = TensorT<S>::zeros({m, n});
    detail::matmul_acc(a.data(), b.data(), out.data(), m, k, n);
    if (auto* tape = detail::propagate(out, {&a, &b})) {
        auto da = a.d, db = b.d, dout = out.d;
        tape->record([da, db, dout, m, k, n] {
            if (dout->grad.empty()) return;
            if (da->requires_grad) {
                // dA += dC * B^T
                auto bt = detail::transpose_raw(db->values.data(), k, n);
                detail::matmul_acc(dout->grad.data(), bt.data(), ensure_grad(*da).data(), m, n, k);
            }
            if (db->requires_grad) {
                // dB += A^T * dC
                auto at = detail::transpose_raw(da->values.data(), m, k);
                detail::matmul_acc(at.data(), dout->grad.data(), ensure_grad(*db).data(), k, m, n);
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions

template <class S>
TensorT<S> sum(const TensorT<S>& x) {
    detail::require_defined(x, "sum");
    S acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i];
    TensorT<S> out = TensorT<S>::scalar(acc);
    if (auto* tape = detail::propagate(out, {&x})) {
        auto dx = x.d, dout = out.d;
        tape->record([dx, dout] {
            if (dout->grad.empty() || !dx->requires_grad) return;
            auto& g = ensure_grad(*dx);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += dout->grad[0];
        });
    }
    return out;
}

template <class S>
TensorT<S> mean(const TensorT<S>& x) {
    detail::require_defined(x, "mean");
    S acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i];
    const S inv = S(1) / static_cast<S>(x.size());
    TensorT<S> out = TensorT<S>::scalar(acc * inv);
    if (auto* tape = detail::propagate(out, {&x})) {
        auto dx = x.d, dout = out.d;
        tape->record([dx, dout, inv] {
            if (dout->grad.empty() || !dx->requires_grad) return;
            auto& g = ensure_grad(*dx);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += dout->grad[0] * inv;
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// nonlinearities

namespace detail {
inline constexpr double kGeluAlpha = 0.7978845608028653558798921198687;  // sqrt(2/pi)
inline constexpr double kGeluBeta = 0.044715;
}  // namespace detail

/// GELU, tanh approximation.
template <class S>
TensorT<S> gelu(const TensorT<S>& x) {
    detail::require_defined(x, "gelu");
    TensorT<S> out = TensorT<S>::zeros(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = static_cast<double>(x.data()[i]);
        const double t = std::tanh(detail::kGeluAlpha * (v + detail::kGeluBeta * v * v * v));
        out.data()[i] = static_cast<S>(0.5 * v * (1.0 + t));
    }
    if (auto* tape = detail::propagate(out, {&x})) {
        auto dx = x.d, dout = out.d;
        tape->record([dx, dout] {
            if (dout->grad.empty() || !dx->requires_grad) return;
            auto& g = ensure_grad(*dx);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double v = static_cast<double>(dx->values[i]);
                const double u = detail::kGeluAlpha * (v + detail::kGeluBeta * v * v * v);
                const double t = std::tanh(u);
                const double du = detail::kGeluAlpha * (1.0 + 3.0 * detail::kGeluBeta * v * v);
                const double dg = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
                g[i] += dout->grad[i] * static_cast<S>(dg);
            }
        });
    }
    return out;
}

namespace detail {
template <class S>
void axis_extents(const TensorT<S>& x, int axis, const char* op, std::size_t& outer, std::size_t& len,
                  std::size_t& inner) {
    if (axis < 0 || axis >= x.ndim())
        throw dim_error(std::string(op) + ": axis " + std::to_string(axis) + " invalid for " + shape_str(x.shape()));
    outer = 1;
    inner = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(x.dim(i));
    len = static_cast<std::size_t>(x.dim(axis));
    for (int i = axis + 1; i < x.ndim(); ++i) inner *= static_cast<std::size_t>(x.dim(i));
}
}  // namespace detail

/// Softmax along `axis`, max-subtracted for stability. Non-finite input is
/// rejected rather than propagated.
template <class S>
TensorT<S> softmax(const TensorT<S>& x, int axis) {
    detail::require_defined(x, "softmax");
    std::size_t outer, len, inner;
    detail::axis_extents(x, axis, "softmax", outer, len, inner);
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(static_cast<double>(x.data()[i]))) throw numeric_error("softmax: non-finite input");
    TensorT<S> out = TensorT<S>::zeros(x.shape());
    const S* xin = x.data();
    S* o = out.data();
    for (std::size_t a = 0; a < outer; ++a) {
        for (std::size_t b = 0; b < inner; ++b) {
            const std::size_t base = a * len * inner + b;
            S mx = xin[base];
            for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, xin[base + j * inner]);
            S denom = 0;
            for (std::size_t j = 0; j < len; ++j) {
                const S e = std::exp(xin[base + j * inner] - mx);
                o[base + j * inner] = e;
                denom += e;
            }
            const S inv = S(1) / denom;
            for (std::size_t j = 0; j < len; ++j) o[base + j * inner] *= inv;
        }
    }
    if (auto* tape = detail::propagate(out, {&x})) {
        auto dx = x.d, dout = out.d;
        tape->record([dx, dout, outer, len, inner] {
            if (dout->grad.empty() || !dx->requires_grad) return;
            auto& g = ensure_grad(*dx);
            const auto& s = dout->values;
            const auto& go = dout->grad;
            for (std::size_t a = 0; a < outer; ++a) {
                for (std::size_t b = 0; b < inner; ++b) {
                    const std::size_t base = a * len * inner + b;
                    S dot = 0;
                    for (std::size_t j = 0; j < len; ++j) dot += go[base + j * inner] * s[base + j * inner];
                    for (std::size_t j = 0; j < len; ++j)
                        g[base + j * inner] += s[base + j * inner] * (go[base + j * inner] - dot);
                }
            }
        });
    }
    return out;
}

/// Layer normalization over the last axis with learned affine. eps sits
/// inside the sqrt; population variance.
template <class S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma, const TensorT<S>& beta, S eps) {
    detail::require_defined(x, "layer_norm");
    detail::require_defined(gamma, "layer_norm");
    detail::require_defined(beta, "layer_norm");
    const int d = x.dim(x.ndim() - 1);
    if (gamma.ndim() != 1 || beta.ndim() != 1 || gamma.dim(0) != d || beta.dim(0) != d)
        throw dim_error("layer_norm: affine params " + shape_str(gamma.shape()) + "/" + shape_str(beta.shape()) +
                        " do not match last axis of " + shape_str(x.shape()));
    const std::size_t rows = x.size() / static_cast<std::size_t>(d);
    TensorT<S> out = TensorT<S>::zeros(x.shape());
    std::vector<S> inv_std(rows), xhat(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const S* row = x.data() + r * d;
        S mu = 0;
        for (int j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<S>(d);
        S var = 0;
        for (int j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<S>(d);
        const S inv = S(1) / std::sqrt(var + eps);
        inv_std[r] = inv;
        for (int j = 0; j < d; ++j) {
            const S xh = (row[j] - mu) * inv;
            xhat[r * d + j] = xh;
            out.data()[r * d + j] = xh * gamma.data()[j] + beta.data()[j];
        }
    }
    if (auto* tape = detail::propagate(out, {&x, &gamma, &beta})) {
        auto dx = x.d, dg = gamma.d, db = beta.d, dout = out.d;
        tape->record([dx, dg, db, dout, rows, d, inv_std = std::move(inv_std), xhat = std::move(xhat)] {
            if (dout->grad.empty()) return;
            const auto& go = dout->grad;
            if (dg->requires_grad) {
                auto& g = ensure_grad(*dg);
                for (std::size_t r = 0; r < rows; ++r)
                    for (int j = 0; j < d; ++j) g[j] += go[r * d + j] * xhat[r * d + j];
            }
            if (db->requires_grad) {
                auto& g = ensure_grad(*db);
                for (std::size_t r = 0; r < rows; ++r)
                    for (int j = 0; j < d; ++j) g[j] += go[r * d + j];
            }
            if (dx->requires_grad) {
                auto& g = ensure_grad(*dx);
                for (std::size_t r = 0; r < rows; ++r) {
                    S m1 = 0, m2 = 0;  // mean(dxhat), mean(dxhat*xhat)
                    for (int j = 0; j < d; ++j) {
                        const S dxh = go[r * d + j] * dg->values[j];
                        m1 += dxh;
                        m2 += dxh * xhat[r * d + j];
                    }
                    m1 /= static_cast<S>(d);
                    m2 /= static_cast<S>(d);
                    for (int j = 0; j < d; ++j) {
                        const S dxh = go[r * d + j] * dg->values[j];
                        g[r * d + j] += (dxh - m1 - xhat[r * d + j] * m2) * inv_std[r];
                    }
                }
            }
        });
    }
    return out;
}

/// Inverted dropout: keeps each value with probability 1-p and rescales by
/// 1/(1-p). The mask is drawn from `rng` at call time, so determinism is
/// inherited from the caller's seed discipline.
template <class S>
TensorT<S> dropout(const TensorT<S>& x, S p, Rng& rng) {
    detail::require_defined(x, "dropout");
    if (p < S(0) || p >= S(1)) throw contract_error("dropout: p must be in [0, 1)");
    if (p == S(0)) return x;
    const S keep = S(1) - p;
    const S inv = S(1) / keep;
    std::vector<S> mask(x.size());
    TensorT<S> out = TensorT<S>::zeros(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        mask[i] = (static_cast<S>(rng.uniform()) < keep) ? inv : S(0);
        out.data()[i] = x.data()[i] * mask[i];
    }
    if (auto* tape = detail::propagate(out, {&x})) {
        auto dx = x.d, dout = out.d;
        tape->record([dx, dout, mask = std::move(mask)] {
            if (dout->grad.empty() || !dx->requires_grad) return;
            auto& g = ensure_grad(*dx);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += dout->grad[i] * mask[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// loss

/// Mean over the batch of weights[target] * (-log softmax(logits)[target]).
/// Log-probabilities go through max-subtracted log-sum-exp.
template <class S>
TensorT<S> weighted_cross_entropy(const TensorT<S>& logits, const std::vector<int>& targets,
                                  const std::vector<S>& weights) {
    detail::require_defined(logits, "weighted_cross_entropy");
    if (logits.ndim() != 2) throw dim_error("weighted_cross_entropy: logits must be [batch x classes]");
    const int batch = logits.dim(0), classes = logits.dim(1);
    if (static_cast<int>(targets.size()) != batch)
        throw contract_error("weighted_cross_entropy: " + std::to_string(targets.size()) + " targets for batch " +
                             std::to_string(batch));
    if (static_cast<int>(weights.size()) != classes)
        throw contract_error("weighted_cross_entropy: " + std::to_string(weights.size()) + " weights for " +
                             std::to_string(classes) + " classes");
    for (int t : targets)
        if (t < 0 || t >= classes)
            throw contract_error("weighted_cross_entropy: target " + std::to_string(t) + " outside [0, " +
                                 std::to_string(classes) + ")");
    for (S w : weights)
        if (!(w > S(0))) throw contract_error("weighted_cross_entropy: weights must be positive");
    for (std::size_t i = 0; i < logits.size(); ++i)
        if (!std::isfinite(static_cast<double>(logits.data()[i])))
            throw numeric_error("weighted_cross_entropy: non-finite logits");

    std::vector<S> probs(logits.size());
    S loss = 0;
    for (int b = 0; b < batch; ++b) {
        const S* row = logits.data() + static_cast<std::size_t>(b) * classes;
        S mx = row[0];
        for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
        S denom = 0;
        for (int c = 0; c < classes; ++c) denom += std::exp(row[c] - mx);
        const S lse = mx + std::log(denom);
        for (int c = 0; c < classes; ++c) probs[static_cast<std::size_t>(b) * classes + c] = std::exp(row[c] - lse);
        loss += weights[static_cast<std::size_t>(targets[b])] * (lse - row[targets[b]]);
    }
    loss /= static_cast<S>(batch);
    TensorT<S> out = TensorT<S>::scalar(loss);
    if (auto* tape = detail::propagate(out, {&logits})) {
        auto dl = logits.d, dout = out.d;
        tape->record([dl, dout, targets, weights, probs = std::move(probs), batch, classes] {
            if (dout->grad.empty() || !dl->requires_grad) return;
            auto& g = ensure_grad(*dl);
            const S go = dout->grad[0];
            for (int b = 0; b < batch; ++b) {
                const S w = weights[static_cast<std::size_t>(targets[b])] / static_cast<S>(batch);
                for (int c = 0; c < classes; ++c) {
                    const std::size_t i = static_cast<std::size_t>(b) * classes + c;
                    g[i] += go * w * (probs[i] - (c == targets[b] ? S(1) : S(0)));
                }
            }
        });
    }
    return out;
}

template <class S>
bool all_finite(const TensorT<S>& x) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(static_cast<double>(x.data()[i]))) return false;
    return true;
}

}  // namespace pocf
