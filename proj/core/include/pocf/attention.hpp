#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pocf/ops.hpp"
#include "pocf/tensor.hpp"

namespace pocf {

enum class AttentionMode { standard, linear };

inline std::string to_string(AttentionMode m) { return m == AttentionMode::standard ? "standard" : "linear"; }

inline AttentionMode attention_mode_from_string(const std::string& s) {
    if (s == "standard") return AttentionMode::standard;
    if (s == "linear") return AttentionMode::linear;
    throw contract_error("unknown attention mode '" + s + "' (expected standard|linear)");
}

/// Projections of one multi-head self-attention layer. All weight matrices
/// are [d_model x d_model]; the head split happens along columns.
template <class S>
struct MhaParamsT {
    TensorT<S> w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o;
    int num_heads = 1;

    int d_model() const { return w_q.dim(0); }

    void validate() const {
        const int d = d_model();
        for (const TensorT<S>* w : {&w_q, &w_k, &w_v, &w_o})
            if (w->ndim() != 2 || w->dim(0) != d || w->dim(1) != d)
                throw dim_error("mha params: projection must be [" + std::to_string(d) + "x" + std::to_string(d) +
                                "], got " + shape_str(w->shape()));
        for (const TensorT<S>* b : {&b_q, &b_k, &b_v, &b_o})
            if (b->ndim() != 1 || b->dim(0) != d)
                throw dim_error("mha params: bias must be [" + std::to_string(d) + "], got " + shape_str(b->shape()));
        if (num_heads <= 0 || d % num_heads != 0)
            throw contract_error("mha params: d_model " + std::to_string(d) + " not divisible by num_heads " +
                                 std::to_string(num_heads));
    }
};

/// Standard attention plus the shared low-rank sequence projection. One
/// e_proj instance serves every head; when share_kv is false an independent
/// f_proj of the same shape projects the values.
template <class S>
struct LinformerParamsT {
    MhaParamsT<S> mha;
    TensorT<S> e_proj;  // [k x n_seq]
    TensorT<S> f_proj;  // only when !share_kv
    bool share_kv = true;

    int rank() const { return e_proj.dim(0); }

    void validate() const {
        mha.validate();
        if (!e_proj.defined() || e_proj.ndim() != 2)
            throw contract_error("linformer params: e_proj must be a [k x n_seq] matrix");
        if (e_proj.dim(0) < 1 || e_proj.dim(0) > e_proj.dim(1))
            throw contract_error("linformer params: rank k must satisfy 1 <= k <= n_seq, got " +
                                 shape_str(e_proj.shape()));
        if (!share_kv) {
            if (!f_proj.defined() || f_proj.shape() != e_proj.shape())
                throw contract_error("linformer params: f_proj must match e_proj shape when share_kv is false");
        }
    }
};

namespace detail {

template <class S>
struct QkvRows {
    TensorT<S> q, k, v;
};

template <class S>
QkvRows<S> project_qkv(const TensorT<S>& x, const MhaParamsT<S>& p) {
    return {add_bias(matmul(x, p.w_q), p.b_q), add_bias(matmul(x, p.w_k), p.b_k),
            add_bias(matmul(x, p.w_v), p.b_v)};
}

/// softmax(q k^T / sqrt(head_dim)) v for one head; k/v may be the projected
/// [rank x head_dim] tensors in linear mode.
template <class S>
TensorT<S> head_attention(const TensorT<S>& q, const TensorT<S>& k, const TensorT<S>& v, int head_dim,
                          std::vector<TensorT<S>>* attn_out) {
    const S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(head_dim)));
    TensorT<S> scores = scale(matmul(q, transpose(k)), inv_sqrt);
    TensorT<S> attn = softmax(scores, 1);
    if (attn_out) attn_out->push_back(attn);
    return matmul(attn, v);
}

}  // namespace detail

/// Scaled-dot-product multi-head self-attention over one sequence.
/// x: [n_seq x d_model] -> [n_seq x d_model]. When attn_out is non-null the
/// per-head attention matrices are appended to it (for inspection/tests).
template <class S>
TensorT<S> standard_mha(const TensorT<S>& x, const MhaParamsT<S>& params,
                        std::vector<TensorT<S>>* attn_out = nullptr) {
    params.validate();
    detail::require_defined(x, "standard_mha");
    if (x.ndim() != 2 || x.dim(1) != params.d_model())
        throw dim_error("standard_mha: input " + shape_str(x.shape()) + " does not match d_model " +
                        std::to_string(params.d_model()));
    const int d = params.d_model();
    const int heads = params.num_heads;
    const int hd = d / heads;
    auto qkv = detail::project_qkv(x, params);
    std::vector<TensorT<S>> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        TensorT<S> qh = slice_cols(qkv.q, h * hd, hd);
        TensorT<S> kh = slice_cols(qkv.k, h * hd, hd);
        TensorT<S> vh = slice_cols(qkv.v, h * hd, hd);
        outs.push_back(detail::head_attention(qh, kh, vh, hd, attn_out));
    }
    TensorT<S> cat = concat_cols(outs);
    return add_bias(matmul(cat, params.w_o), params.b_o);
}

/// Linformer attention: keys and values are first projected along the
/// sequence axis to rank k, so each head's attention matrix is [n_seq x k].
/// The projection is applied to the full K/V before the head split, which is
/// identical to per-head application because it acts on rows only.
template <class S>
TensorT<S> linformer_mha(const TensorT<S>& x, const LinformerParamsT<S>& params,
                         std::vector<TensorT<S>>* attn_out = nullptr) {
    params.validate();
    detail::require_defined(x, "linformer_mha");
    const int d = params.mha.d_model();
    if (x.ndim() != 2 || x.dim(1) != d)
        throw dim_error("linformer_mha: input " + shape_str(x.shape()) + " does not match d_model " +
                        std::to_string(d));
    if (params.e_proj.dim(1) != x.dim(0))
        throw dim_error("linformer_mha: e_proj " + shape_str(params.e_proj.shape()) +
                        " does not match sequence length " + std::to_string(x.dim(0)));
    const int heads = params.mha.num_heads;
    const int hd = d / heads;
    auto qkv = detail::project_qkv(x, params.mha);
    TensorT<S> pk = matmul(params.e_proj, qkv.k);                                   // [k x d]
    TensorT<S> pv = matmul(params.share_kv ? params.e_proj : params.f_proj, qkv.v);  // [k x d]
    std::vector<TensorT<S>> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        TensorT<S> qh = slice_cols(qkv.q, h * hd, hd);
        TensorT<S> kh = slice_cols(pk, h * hd, hd);
        TensorT<S> vh = slice_cols(pv, h * hd, hd);
        outs.push_back(detail::head_attention(qh, kh, vh, hd, attn_out));
    }
    TensorT<S> cat = concat_cols(outs);
    return add_bias(matmul(cat, params.mha.w_o), params.mha.b_o);
}

/// Exact multiply-accumulate count of one attention forward pass: Q/K/V and
/// output projections plus the attention-core matmuls (scores and weighted
/// sum); linear mode adds the two sequence projections E*K and F*V. Bias
/// adds, softmax and scaling are not MACs and are not counted. The head
/// count cancels out of the core terms (heads * n^2 * (d/heads) = n^2 * d)
/// and is accepted for interface completeness only.
///
///   standard: 4*n*d^2 + 2*n^2*d
///   linear:   4*n*d^2 + 4*n*k*d
inline std::uint64_t flop_count(AttentionMode mode, int n_seq, int d_model, int num_heads, int k) {
    if (n_seq < 1 || d_model < 1 || num_heads < 1 || d_model % num_heads != 0)
        throw contract_error("flop_count: invalid attention config");
    const auto n = static_cast<std::uint64_t>(n_seq);
    const auto d = static_cast<std::uint64_t>(d_model);
    const std::uint64_t projections = 4 * n * d * d;
    if (mode == AttentionMode::standard) return projections + 2 * n * n * d;
    if (k < 1 || k > n_seq) throw contract_error("flop_count: rank k must satisfy 1 <= k <= n_seq");
    return projections + 4 * n * static_cast<std::uint64_t>(k) * d;
}

}  // namespace pocf
