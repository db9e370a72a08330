#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pocf/error.hpp"

namespace pocf {

struct Sample {
    std::string path;
    int label = 0;
};

/// Ordered (path, class) list plus the per-class sample counts that feed the
/// loss weighting.
struct Dataset {
    std::vector<Sample> samples;
    std::vector<std::string> class_names;
    std::vector<int> counts;

    int num_classes() const { return static_cast<int>(class_names.size()); }
    std::size_t size() const { return samples.size(); }
};

/// Scans `root/<class_name>/*.{png,jpg,jpeg}`. Class order is the
/// lexicographic directory order unless `root/classes.json` (a JSON array of
/// names) overrides it; `class_filter`, when non-empty, selects and orders a
/// subset on top of that. Files are sorted lexicographically per class.
Dataset scan_dataset(const std::string& root, const std::vector<std::string>& class_filter = {});

/// weight[c] = min(counts) / counts[c]; the rarest class gets exactly 1.
std::vector<float> class_weights(const std::vector<int>& counts);

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct DatasetSplit {
    Dataset train, val, test;
};

/// Stratified split: per class the samples are shuffled deterministically
/// under `seed` and apportioned by largest remainder, so per-class partition
/// sizes are within one sample of the requested ratios. Every partition must
/// receive at least one sample of every class.
DatasetSplit split_dataset(const Dataset& ds, const SplitRatios& ratios, std::uint64_t seed);

}  // namespace pocf
