#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pocf/attention.hpp"
#include "pocf/vit.hpp"

namespace pocf {

struct TimingStats {
    double median_s = 0.0;
    double p10_s = 0.0;
    double p90_s = 0.0;
    int reps = 0;
};

/// One measured workload: wall-time statistics over the repetitions, the
/// analytic multiply-accumulate count, and a rate (frames/s for model
/// workloads, workloads/s otherwise).
struct BenchResult {
    std::string mode;
    int n = 0;  // sequence length, or batch size for model throughput rows
    TimingStats timing;
    std::uint64_t flops = 0;
    double fps = 0.0;
};

/// Runs `fn` once as a discarded warm-up, then `reps` (>= 5) timed passes on
/// the monotonic clock. Quantiles interpolate linearly between order
/// statistics, so median always lies within [p10, p90].
TimingStats time_workload(const std::function<void()>& fn, int reps);

/// Median cost of timing an empty workload.
double harness_overhead_s();

/// Times one attention forward pass per sequence length. seq_lens must be
/// strictly ascending, hold at least 3 points and span at least an 8x range.
std::vector<BenchResult> attention_scaling(AttentionMode mode, const std::vector<int>& seq_lens, int d_model,
                                           int heads, int k, int reps, std::uint64_t seed = 0);

struct ThroughputReport {
    double fps = 0.0;
    double per_frame_s = 0.0;
    TimingStats timing;
    int n_frames = 0;
    int batch_size = 0;
    std::uint64_t flops_per_frame = 0;
};

/// Forward-only inference rate over n_frames (>= 100) random frames,
/// median of `reps` >= 5 timed runs after one warm-up.
ThroughputReport throughput(const ViTModel& model, int n_frames, int batch_size, int reps = 5,
                            std::uint64_t seed = 0);

/// Least-squares slope of log(y) against log(x).
double fit_loglog_slope(const std::vector<std::pair<double, double>>& points);

inline BenchResult throughput_row(const ThroughputReport& r, const std::string& mode) {
    return {mode, r.batch_size, r.timing, r.flops_per_frame, r.fps};
}

std::string bench_csv(const std::vector<BenchResult>& rows);
std::string bench_json(const std::vector<BenchResult>& rows, int indent = 2);

}  // namespace pocf
