#include "pocf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace pocf {

namespace {

using Clock = std::chrono::steady_clock;

double quantile(const std::vector<double>& sorted, double q) {
    const double rank = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(rank);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

TimingStats time_workload(const std::function<void()>& fn, int reps) {
    if (reps < 5) throw contract_error("time_workload: need at least 5 repetitions");
    fn();  // warm-up, discarded
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(reps));
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        fn();
        const auto t1 = Clock::now();
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    TimingStats s;
    s.reps = reps;
    s.median_s = quantile(times, 0.5);
    s.p10_s = quantile(times, 0.1);
    s.p90_s = quantile(times, 0.9);
    return s;
}

double harness_overhead_s() {
    return time_workload([] {}, 11).median_s;
}

std::vector<BenchResult> attention_scaling(AttentionMode mode, const std::vector<int>& seq_lens, int d_model,
                                           int heads, int k, int reps, std::uint64_t seed) {
    if (seq_lens.size() < 3) throw contract_error("attention_scaling: need at least 3 sequence lengths");
    for (std::size_t i = 1; i < seq_lens.size(); ++i)
        if (seq_lens[i] <= seq_lens[i - 1]) throw contract_error("attention_scaling: seq_lens must be ascending");
    if (seq_lens.front() < 1 || seq_lens.back() < 8 * seq_lens.front())
        throw contract_error("attention_scaling: seq_lens must span at least an 8x range");

    std::vector<BenchResult> out;
    for (int n : seq_lens) {
        Rng rng(seed + static_cast<std::uint64_t>(n));
        Tensor x = Tensor::randn({n, d_model}, rng, 1.0f);
        MhaParamsT<float> mha;
        mha.num_heads = heads;
        mha.w_q = Tensor::randn({d_model, d_model}, rng, 0.05f);
        mha.b_q = Tensor::zeros({d_model});
        mha.w_k = Tensor::randn({d_model, d_model}, rng, 0.05f);
        mha.b_k = Tensor::zeros({d_model});
        mha.w_v = Tensor::randn({d_model, d_model}, rng, 0.05f);
        mha.b_v = Tensor::zeros({d_model});
        mha.w_o = Tensor::randn({d_model, d_model}, rng, 0.05f);
        mha.b_o = Tensor::zeros({d_model});

        BenchResult r;
        r.mode = to_string(mode);
        r.n = n;
        if (mode == AttentionMode::standard) {
            r.timing = time_workload([&] { standard_mha(x, mha); }, reps);
        } else {
            LinformerParamsT<float> lin;
            lin.mha = mha;
            lin.share_kv = true;
            lin.e_proj = Tensor::randn({k, n}, rng, 0.05f);
            r.timing = time_workload([&] { linformer_mha(x, lin); }, reps);
        }
        r.flops = flop_count(mode, n, d_model, heads, k);
        r.fps = r.timing.median_s > 0.0 ? 1.0 / r.timing.median_s : 0.0;
        out.push_back(std::move(r));
    }
    return out;
}

ThroughputReport throughput(const ViTModel& model, int n_frames, int batch_size, int reps, std::uint64_t seed) {
    if (n_frames < 100) throw contract_error("throughput: need at least 100 frames");
    if (batch_size < 1) throw contract_error("throughput: batch size must be >= 1");
    model.config.validate();

    // every run streams n_frames distinct frames regardless of batch size,
    // so small batches do not get an artificial single-buffer cache advantage
    Rng rng(seed);
    std::vector<Tensor> batches;
    for (int remaining = n_frames; remaining > 0; remaining -= batch_size) {
        const int b = std::min(batch_size, remaining);
        batches.push_back(Tensor::randn(
            {b, model.config.channels, model.config.image_size, model.config.image_size}, rng, 1.0f));
    }

    ThroughputReport rep;
    rep.n_frames = n_frames;
    rep.batch_size = batch_size;
    rep.flops_per_frame = model_forward_flops(model.config);
    rep.timing = time_workload(
        [&] {
            for (const Tensor& batch : batches) model.forward(batch);
        },
        reps);
    rep.fps = static_cast<double>(n_frames) / rep.timing.median_s;
    rep.per_frame_s = rep.timing.median_s / static_cast<double>(n_frames);
    return rep;
}

double fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) throw contract_error("fit_loglog_slope: need at least 2 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : points) {
        if (x <= 0.0 || y <= 0.0) throw contract_error("fit_loglog_slope: points must be positive");
        const double lx = std::log(x), ly = std::log(y);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = static_cast<double>(points.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::string bench_csv(const std::vector<BenchResult>& rows) {
    std::string out = "mode,n,median_s,p10_s,p90_s,flops,fps\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.9f,%.9f,%.9f,%llu,%.3f\n", r.mode.c_str(), r.n, r.timing.median_s,
                      r.timing.p10_s, r.timing.p90_s, static_cast<unsigned long long>(r.flops), r.fps);
        out += buf;
    }
    return out;
}

std::string bench_json(const std::vector<BenchResult>& rows, int indent) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows)
        j.push_back({{"mode", r.mode},
                     {"n", r.n},
                     {"median_s", r.timing.median_s},
                     {"p10_s", r.timing.p10_s},
                     {"p90_s", r.timing.p90_s},
                     {"reps", r.timing.reps},
                     {"flops", r.flops},
                     {"fps", r.fps}});
    return j.dump(indent);
}

}  // namespace pocf
