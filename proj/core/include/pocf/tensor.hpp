#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "pocf/error.hpp"
#include "pocf/rng.hpp"

namespace pocf {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

inline void validate_shape(const Shape& s, const char* where) {
    for (int d : s) {
        if (d <= 0) throw contract_error(std::string(where) + ": non-positive dimension in " + shape_str(s));
    }
}

template <class S>
class TapeT;

/// Storage block shared by tensor handles. `grad` stays empty until a
/// backward pass touches it.
template <class S>
struct TensorDataT {
    Shape shape;
    std::vector<S> values;
    std::vector<S> grad;
    bool requires_grad = false;
};

/// Value-semantics handle onto a row-major n-d float buffer. Copies share
/// storage; ops produce fresh buffers. A tensor may carry a non-owning tape
/// pointer, in which case differentiable ops downstream of it are recorded.
template <class S>
class TensorT {
public:
    using Data = TensorDataT<S>;

    TensorT() = default;

    static TensorT zeros(Shape shape) {
        validate_shape(shape, "zeros");
        TensorT t;
        t.d = std::make_shared<Data>();
        t.d->values.assign(shape_numel(shape), S(0));
        t.d->shape = std::move(shape);
        return t;
    }

    static TensorT full(Shape shape, S v) {
        TensorT t = zeros(std::move(shape));
        for (auto& x : t.d->values) x = v;
        return t;
    }

    static TensorT ones(Shape shape) { return full(std::move(shape), S(1)); }

    static TensorT from_data(Shape shape, std::vector<S> data) {
        validate_shape(shape, "from_data");
        if (shape_numel(shape) != data.size())
            throw dim_error("from_data: " + shape_str(shape) + " does not hold " + std::to_string(data.size()) +
                            " values");
        TensorT t;
        t.d = std::make_shared<Data>();
        t.d->shape = std::move(shape);
        t.d->values = std::move(data);
        return t;
    }

    static TensorT scalar(S v) { return from_data({1}, {v}); }

    /// Leaf that participates in autodiff: requires_grad and bound to `tape`.
    static TensorT variable(Shape shape, std::vector<S> data, TapeT<S>* tape) {
        TensorT t = from_data(std::move(shape), std::move(data));
        t.d->requires_grad = true;
        t.tape = tape;
        return t;
    }

    static TensorT randn(Shape shape, Rng& rng, S stddev = S(1)) {
        TensorT t = zeros(std::move(shape));
        for (auto& x : t.d->values) x = static_cast<S>(rng.normal()) * stddev;
        return t;
    }

    bool defined() const { return static_cast<bool>(d); }

    const Shape& shape() const { return d->shape; }
    int ndim() const { return static_cast<int>(d->shape.size()); }
    int dim(int i) const { return d->shape[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return d->values.size(); }

    S* data() { return d->values.data(); }
    const S* data() const { return d->values.data(); }
    std::vector<S>& values() { return d->values; }
    const std::vector<S>& values() const { return d->values; }

    S& at(int i) { return d->values[static_cast<std::size_t>(i)]; }
    S at(int i) const { return d->values[static_cast<std::size_t>(i)]; }
    S& at(int i, int j) { return d->values[static_cast<std::size_t>(i) * dim(1) + j]; }
    S at(int i, int j) const { return d->values[static_cast<std::size_t>(i) * dim(1) + j]; }

    bool requires_grad() const { return d && d->requires_grad; }
    void set_requires_grad(bool rg) { d->requires_grad = rg; }

    bool has_grad() const { return d && !d->grad.empty(); }
    const std::vector<S>& grad() const {
        if (!has_grad()) throw contract_error("grad: not populated; run backward first");
        return d->grad;
    }
    /// Grad as a tensor of the same shape (copy).
    TensorT grad_tensor() const { return from_data(d->shape, grad()); }
    void zero_grad() {
        if (d) d->grad.clear();
    }

    std::shared_ptr<Data> d;
    TapeT<S>* tape = nullptr;
};

template <class S>
std::vector<S>& ensure_grad(TensorDataT<S>& d) {
    if (d.grad.empty()) d.grad.assign(d.values.size(), S(0));
    return d.grad;
}

/// Wengert list: differentiable ops are recorded in execution order and
/// replayed in reverse. Replaying twice on identical inputs produces
/// bitwise-identical gradients since every accumulation order is fixed.
template <class S>
class TapeT {
public:
    void record(std::function<void()> backward_step) { steps_.push_back(std::move(backward_step)); }

    std::size_t size() const { return steps_.size(); }

    void clear() { steps_.clear(); }

    /// Seeds d(loss)/d(loss) = 1 and runs all recorded steps in reverse,
    /// populating grad on every requires_grad tensor reachable from loss.
    void backward(const TensorT<S>& loss) {
        if (!loss.defined() || loss.size() != 1)
            throw contract_error("backward: loss must be a scalar tensor");
        if (loss.tape != this)
            throw contract_error("backward: loss was not recorded on this tape");
        ensure_grad(*loss.d)[0] = S(1);
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> steps_;
};

using Tensor = TensorT<float>;
using Tape = TapeT<float>;

}  // namespace pocf
