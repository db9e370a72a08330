#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pocf {

struct PerClassMetrics {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double sensitivity = 0.0;  // == recall, reported separately to mirror the table layout
    double specificity = 0.0;
    std::vector<std::string> undefined_flags;  // metric names whose denominator was zero
};

/// Confusion matrix (rows = true class, columns = predicted) with the
/// derived per-class and overall metrics. Zero-denominator metrics are
/// reported as 0 and flagged instead of NaN.
struct MetricsReport {
    std::vector<std::vector<std::int64_t>> confusion_matrix;
    std::vector<PerClassMetrics> per_class;
    double accuracy = 0.0;
    double balanced_accuracy = 0.0;
    std::int64_t num_samples = 0;

    std::string to_json(int indent = 2) const;
    /// Human-readable table using the published column names.
    std::string to_text() const;
};

std::vector<std::vector<std::int64_t>> confusion_matrix(const std::vector<int>& predictions,
                                                        const std::vector<int>& targets, int num_classes);

MetricsReport report_from_confusion(const std::vector<std::vector<std::int64_t>>& cm,
                                    const std::vector<std::string>& labels);

}  // namespace pocf
