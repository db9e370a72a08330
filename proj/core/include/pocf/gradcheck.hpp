#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pocf/tensor.hpp"

namespace pocf {

template <class S>
struct GradCheckReport {
    S max_rel_err = 0;
    std::string worst_param;
    std::size_t worst_index = 0;
};

/// Compares reverse-mode gradients against central differences.
///
/// `make_loss` must rebuild the scalar loss from the current values of
/// `params`; when it receives a tape the graph is recorded, when it receives
/// nullptr only the value is needed. The relative error per element is
/// |analytic - cd| / max(|analytic|, |cd|, 1e-8) and the maximum over all
/// elements is returned.
template <class S>
GradCheckReport<S> finite_diff_check(std::vector<std::pair<std::string, TensorT<S>*>> params,
                                     const std::function<TensorT<S>(TapeT<S>*)>& make_loss, S h) {
    // analytic pass
    TapeT<S> tape;
    for (auto& [name, p] : params) {
        p->zero_grad();
        p->set_requires_grad(true);
        p->tape = &tape;
    }
    TensorT<S> loss = make_loss(&tape);
    tape.backward(loss);
    std::vector<std::vector<S>> analytic;
    analytic.reserve(params.size());
    for (auto& [name, p] : params)
        analytic.push_back(p->has_grad() ? p->grad() : std::vector<S>(p->size(), S(0)));
    tape.clear();
    for (auto& [name, p] : params) {
        p->zero_grad();
        p->tape = nullptr;
    }

    auto eval = [&]() -> S { return make_loss(nullptr).at(0); };

    GradCheckReport<S> report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& vals = params[pi].second->values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const S saved = vals[i];
            vals[i] = saved + h;
            const S fp = eval();
            vals[i] = saved - h;
            const S fm = eval();
            vals[i] = saved;
            const S cd = (fp - fm) / (S(2) * h);
            const S a = analytic[pi][i];
            const S denom = std::max({std::abs(a), std::abs(cd), S(1e-8)});
            const S rel = std::abs(a - cd) / denom;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = params[pi].first;
                report.worst_index = i;
            }
        }
    }
    return report;
}

/// Single-tensor convenience overload.
template <class S>
S finite_diff_check(TensorT<S>& param, const std::function<TensorT<S>(TapeT<S>*)>& make_loss, S h) {
    return finite_diff_check<S>({{"param", &param}}, make_loss, h).max_rel_err;
}

}  // namespace pocf
