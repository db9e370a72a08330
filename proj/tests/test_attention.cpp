#include <doctest.h>

#include <cmath>

#include "pocf/attention.hpp"
#include "pocf/ops.hpp"

using namespace pocf;

namespace {

MhaParamsT<float> random_mha(int d, int heads, Rng& rng, float wscale = 0.4f) {
    MhaParamsT<float> p;
    p.num_heads = heads;
    p.w_q = Tensor::randn({d, d}, rng, wscale);
    p.b_q = Tensor::randn({d}, rng, 0.1f);
    p.w_k = Tensor::randn({d, d}, rng, wscale);
    p.b_k = Tensor::randn({d}, rng, 0.1f);
    p.w_v = Tensor::randn({d, d}, rng, wscale);
    p.b_v = Tensor::randn({d}, rng, 0.1f);
    p.w_o = Tensor::randn({d, d}, rng, wscale);
    p.b_o = Tensor::randn({d}, rng, 0.1f);
    return p;
}

MhaParamsT<float> identity_mha(int d) {
    MhaParamsT<float> p;
    p.num_heads = 1;
    auto eye = [d] {
        Tensor t = Tensor::zeros({d, d});
        for (int i = 0; i < d; ++i) t.at(i, i) = 1.0f;
        return t;
    };
    p.w_q = eye();
    p.w_k = eye();
    p.w_v = eye();
    p.w_o = eye();
    p.b_q = Tensor::zeros({d});
    p.b_k = Tensor::zeros({d});
    p.b_v = Tensor::zeros({d});
    p.b_o = Tensor::zeros({d});
    return p;
}

/// Independent oracle: softmax(x x^T / sqrt(d)) x evaluated with plain
/// double loops, no library ops.
std::vector<double> plain_self_attention(const Tensor& x) {
    const int n = x.dim(0), d = x.dim(1);
    std::vector<double> out(static_cast<std::size_t>(n) * d, 0.0);
    for (int i = 0; i < n; ++i) {
        std::vector<double> row(n, 0.0);
        double mx = -1e300;
        for (int j = 0; j < n; ++j) {
            double dot = 0;
            for (int c = 0; c < d; ++c)
                dot += static_cast<double>(x.at(i, c)) * static_cast<double>(x.at(j, c));
            row[j] = dot / std::sqrt(static_cast<double>(d));
            mx = std::max(mx, row[j]);
        }
        double denom = 0;
        for (int j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            denom += row[j];
        }
        for (int j = 0; j < n; ++j)
            for (int c = 0; c < d; ++c)
                out[static_cast<std::size_t>(i) * d + c] += row[j] / denom * static_cast<double>(x.at(j, c));
    }
    return out;
}

}  // namespace

TEST_SUITE("attention") {

TEST_CASE("single-token attention collapses to the value path") {
    Rng rng(21);
    const int d = 8;
    Tensor x = Tensor::randn({1, d}, rng);
    auto p = random_mha(d, 2, rng);
    std::vector<Tensor> attn;
    Tensor out = standard_mha(x, p, &attn);
    REQUIRE(attn.size() == 2);
    for (const auto& a : attn) {
        CHECK(a.shape() == Shape{1, 1});
        CHECK(a.at(0) == doctest::Approx(1.0));
    }
    // with the attention matrix pinned at [[1]], output = (xW_v + b_v) W_o + b_o
    Tensor expect = add_bias(matmul(add_bias(matmul(x, p.w_v), p.b_v), p.w_o), p.b_o);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-5));
}

TEST_CASE("identity projections reproduce the closed-form attention") {
    Rng rng(22);
    const int n = 6, d = 4;
    Tensor x = Tensor::randn({n, d}, rng);
    Tensor out = standard_mha(x, identity_mha(d));
    auto expect = plain_self_attention(x);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(expect[i]).epsilon(1e-5));
}

TEST_CASE("standard attention is permutation equivariant") {
    Rng rng(23);
    const int n = 7, d = 8;
    Tensor x = Tensor::randn({n, d}, rng);
    auto p = random_mha(d, 4, rng);
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    deterministic_shuffle(perm, rng);

    Tensor px = Tensor::zeros({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) px.at(i, j) = x.at(perm[i], j);

    Tensor out = standard_mha(x, p);
    Tensor pout = standard_mha(px, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            CHECK(pout.at(i, j) == doctest::Approx(out.at(perm[i], j)).epsilon(1e-5));
}

TEST_CASE("attention rows are probability vectors in both modes") {
    Rng rng(24);
    const int n = 9, d = 8, k = 4;
    Tensor x = Tensor::randn({n, d}, rng);
    auto p = random_mha(d, 2, rng);
    LinformerParamsT<float> lp;
    lp.mha = p;
    lp.e_proj = Tensor::randn({k, n}, rng, 0.5f);

    std::vector<Tensor> attn_std, attn_lin;
    standard_mha(x, p, &attn_std);
    linformer_mha(x, lp, &attn_lin);
    REQUIRE(!attn_std.empty());
    REQUIRE(!attn_lin.empty());
    for (const auto& a : attn_std) {
        REQUIRE(a.shape() == Shape{n, n});
        for (int i = 0; i < n; ++i) {
            double s = 0;
            for (int j = 0; j < n; ++j) s += a.at(i, j);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
        }
    }
    for (const auto& a : attn_lin) {
        REQUIRE(a.shape() == Shape{n, k});
        for (int i = 0; i < n; ++i) {
            double s = 0;
            for (int j = 0; j < k; ++j) s += a.at(i, j);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
        }
    }
}

TEST_CASE("identity sequence projection collapses to exact attention") {
    Rng rng(25);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(15));   // <= 16
        const int heads = 1 + static_cast<int>(rng.below(4));
        const int d = heads * (1 + static_cast<int>(rng.below(32 / heads)));  // <= 32
        Tensor x = Tensor::randn({n, d}, rng);
        auto p = random_mha(d, heads, rng);
        LinformerParamsT<float> lp;
        lp.mha = p;
        lp.share_kv = true;
        lp.e_proj = Tensor::zeros({n, n});
        for (int i = 0; i < n; ++i) lp.e_proj.at(i, i) = 1.0f;

        Tensor a = standard_mha(x, p);
        Tensor b = linformer_mha(x, lp);
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(b.data()[i] == doctest::Approx(a.data()[i]).epsilon(1e-5));
    }
}

TEST_CASE("rank-1 projection makes every output row identical") {
    Rng rng(26);
    const int n = 6, d = 8;
    Tensor x = Tensor::randn({n, d}, rng);
    LinformerParamsT<float> lp;
    lp.mha = random_mha(d, 2, rng);
    lp.e_proj = Tensor::randn({1, n}, rng, 0.5f);
    Tensor out = linformer_mha(x, lp);
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < d; ++j) CHECK(out.at(i, j) == doctest::Approx(out.at(0, j)).epsilon(1e-6));
}

TEST_CASE("separate value projection is honored") {
    Rng rng(27);
    const int n = 5, d = 4, k = 2;
    Tensor x = Tensor::randn({n, d}, rng);
    LinformerParamsT<float> shared;
    shared.mha = random_mha(d, 2, rng);
    shared.e_proj = Tensor::randn({k, n}, rng, 0.5f);

    LinformerParamsT<float> split = shared;
    split.share_kv = false;
    CHECK_THROWS_AS(linformer_mha(x, split), contract_error);  // f_proj missing
    split.f_proj = Tensor::randn({k, n}, rng, 0.5f);

    Tensor a = linformer_mha(x, shared);
    Tensor b = linformer_mha(x, split);
    bool differs = false;
    for (std::size_t i = 0; i < a.size() && !differs; ++i)
        differs = std::abs(a.data()[i] - b.data()[i]) > 1e-6f;
    CHECK(differs);
}

TEST_CASE("shape violations raise dimension errors") {
    Rng rng(28);
    const int d = 8;
    auto p = random_mha(d, 2, rng);
    CHECK_THROWS_AS(standard_mha(Tensor::randn({4, d + 1}, rng), p), dim_error);
    LinformerParamsT<float> lp;
    lp.mha = p;
    lp.e_proj = Tensor::randn({2, 9}, rng);  // n_seq mismatch
    CHECK_THROWS_AS(linformer_mha(Tensor::randn({4, d}, rng), lp), dim_error);
    MhaParamsT<float> bad = p;
    bad.num_heads = 3;  // does not divide 8
    CHECK_THROWS_AS(standard_mha(Tensor::randn({4, d}, rng), bad), contract_error);
}

TEST_CASE("flop_count agrees with hand enumeration at n=1") {
    // n=1, heads=1, d arbitrary, k=1. Projections: 4 matmuls [1xd]x[dxd]
    // = 4d^2. Standard core: scores [1xd]x[dx1] = d, weighted sum
    // [1x1]x[1xd] = d -> 2d. Linear adds E*K and F*V ([1x1]x[1xd] = d each)
    // and its core is scores d + weighted sum d.
    const int d = 16;
    CHECK(flop_count(AttentionMode::standard, 1, d, 1, 1) == 4ull * d * d + 2ull * d);
    CHECK(flop_count(AttentionMode::linear, 1, d, 1, 1) == 4ull * d * d + 4ull * d);
}

TEST_CASE("flop_count is independent of the head split") {
    for (int heads : {1, 2, 4, 8})
        CHECK(flop_count(AttentionMode::standard, 64, 64, heads, 16) ==
              flop_count(AttentionMode::standard, 64, 64, 1, 16));
}

TEST_CASE("standard count has an exact quadratic term") {
    // f(2n) - 4 f(n) must be affine in n: check the second difference of
    // g(n) = f(2n) - 4 f(n) vanishes at equal spacing, in exact integers.
    const int d = 64, heads = 8, k = 32;
    auto f = [&](int n) {
        return static_cast<long long>(flop_count(AttentionMode::standard, n, d, heads, k));
    };
    auto g = [&](int n) { return f(2 * n) - 4 * f(n); };
    for (int n0 : {64, 256, 1024}) CHECK(g(n0 + 2 * 128) - 2 * g(n0 + 128) + g(n0) == 0);
    // second difference of a*n^2 + b*n at step h is 2*a*h^2; here a = 2*d
    const long long second = f(3 * 256) - 2 * f(2 * 256) + f(256);
    CHECK(second == 4LL * d * 256 * 256);
}

TEST_CASE("linear count is exactly linear in n") {
    const int d = 64, heads = 8, k = 64;
    for (int n : {128, 256, 1024, 2048}) {
        CHECK(flop_count(AttentionMode::linear, 2 * n, d, heads, k) ==
              2 * flop_count(AttentionMode::linear, n, d, heads, k));
    }
    const double ratio = static_cast<double>(flop_count(AttentionMode::linear, 4096, d, heads, k)) /
                         static_cast<double>(flop_count(AttentionMode::linear, 2048, d, heads, k));
    CHECK(ratio <= 2.2);
}

TEST_CASE("flop counts grow monotonically and their ratio is increasing") {
    const int d = 64, heads = 8, k = 32;
    std::uint64_t prev_std = 0, prev_lin = 0;
    double prev_ratio = 0.0;
    for (int n = 64; n <= 4096; n *= 2) {
        const std::uint64_t s = flop_count(AttentionMode::standard, n, d, heads, k);
        const std::uint64_t l = flop_count(AttentionMode::linear, n, d, heads, k);
        CHECK(s > prev_std);
        CHECK(l > prev_lin);
        const double ratio = static_cast<double>(s) / static_cast<double>(l);
        CHECK(ratio > prev_ratio);
        prev_std = s;
        prev_lin = l;
        prev_ratio = ratio;
    }
}

TEST_CASE("flop_count rejects invalid configurations") {
    CHECK_THROWS_AS(flop_count(AttentionMode::standard, 0, 64, 8, 1), contract_error);
    CHECK_THROWS_AS(flop_count(AttentionMode::standard, 8, 63, 8, 1), contract_error);
    CHECK_THROWS_AS(flop_count(AttentionMode::linear, 8, 64, 8, 9), contract_error);
    CHECK_THROWS_AS(flop_count(AttentionMode::linear, 8, 64, 8, 0), contract_error);
}

}  // TEST_SUITE
