#include "pocf/metrics.hpp"

#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "pocf/error.hpp"

namespace pocf {

std::vector<std::vector<std::int64_t>> confusion_matrix(const std::vector<int>& predictions,
                                                        const std::vector<int>& targets, int num_classes) {
    if (predictions.size() != targets.size())
        throw contract_error("confusion_matrix: " + std::to_string(predictions.size()) + " predictions vs " +
                             std::to_string(targets.size()) + " targets");
    if (num_classes < 2) throw contract_error("confusion_matrix: need at least 2 classes");
    std::vector<std::vector<std::int64_t>> cm(static_cast<std::size_t>(num_classes),
                                              std::vector<std::int64_t>(static_cast<std::size_t>(num_classes), 0));
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const int t = targets[i], p = predictions[i];
        if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
            throw contract_error("confusion_matrix: class index outside [0, " + std::to_string(num_classes) +
                                 ") at sample " + std::to_string(i));
        cm[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] += 1;
    }
    return cm;
}

MetricsReport report_from_confusion(const std::vector<std::vector<std::int64_t>>& cm,
                                    const std::vector<std::string>& labels) {
    const std::size_t c = cm.size();
    if (c < 2) throw contract_error("report_from_confusion: need at least 2 classes");
    if (labels.size() != c) throw contract_error("report_from_confusion: label/matrix size mismatch");
    for (const auto& row : cm)
        if (row.size() != c) throw contract_error("report_from_confusion: matrix is not square");

    MetricsReport r;
    r.confusion_matrix = cm;
    std::int64_t total = 0, diag = 0;
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            if (cm[i][j] < 0) throw contract_error("report_from_confusion: negative count");
            total += cm[i][j];
            if (i == j) diag += cm[i][j];
        }
    if (total == 0) throw contract_error("report_from_confusion: empty confusion matrix");
    r.num_samples = total;
    r.accuracy = static_cast<double>(diag) / static_cast<double>(total);

    double recall_sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
        PerClassMetrics m;
        m.label = labels[k];
        const std::int64_t tp = cm[k][k];
        std::int64_t fn = 0, fp = 0;
        for (std::size_t j = 0; j < c; ++j) {
            if (j != k) {
                fn += cm[k][j];
                fp += cm[j][k];
            }
        }
        const std::int64_t tn = total - tp - fn - fp;

        if (tp + fp > 0)
            m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        else
            m.undefined_flags.push_back("precision");
        if (tp + fn > 0) {
            m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        } else {
            m.undefined_flags.push_back("recall");
            m.undefined_flags.push_back("sensitivity");
        }
        m.sensitivity = m.recall;
        if (tn + fp > 0)
            m.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
        else
            m.undefined_flags.push_back("specificity");
        if (m.precision + m.recall > 0.0)
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        else
            m.undefined_flags.push_back("f1");

        recall_sum += m.recall;
        r.per_class.push_back(std::move(m));
    }
    r.balanced_accuracy = recall_sum / static_cast<double>(c);
    return r;
}

std::string MetricsReport::to_json(int indent) const {
    nlohmann::json j;
    j["confusion_matrix"] = confusion_matrix;
    j["accuracy"] = accuracy;
    j["balanced_accuracy"] = balanced_accuracy;
    j["num_samples"] = num_samples;
    j["per_class"] = nlohmann::json::array();
    for (const auto& m : per_class) {
        j["per_class"].push_back({{"label", m.label},
                                  {"precision", m.precision},
                                  {"recall", m.recall},
                                  {"f1", m.f1},
                                  {"sensitivity", m.sensitivity},
                                  {"specificity", m.specificity},
                                  {"undefined_flags", m.undefined_flags}});
    }
    return j.dump(indent);
}

std::string MetricsReport::to_text() const {
    char buf[256];
    std::string out;
    out += "Class                Recall  Precision  F1-Score  Specificity  Sensitivity\n";
    for (const auto& m : per_class) {
        std::snprintf(buf, sizeof(buf), "%-20s %6.4f  %9.4f  %8.4f  %11.4f  %11.4f%s\n", m.label.c_str(), m.recall,
                      m.precision, m.f1, m.specificity, m.sensitivity,
                      m.undefined_flags.empty() ? "" : "  (undefined->0)");
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "Accuracy: %.4f   Balanced accuracy: %.4f   Samples: %lld\n", accuracy,
                  balanced_accuracy, static_cast<long long>(num_samples));
    out += buf;
    out += "Confusion matrix (rows = true, cols = predicted):\n";
    for (std::size_t i = 0; i < confusion_matrix.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "  %-18s", per_class[i].label.c_str());
        out += buf;
        for (std::int64_t v : confusion_matrix[i]) {
            std::snprintf(buf, sizeof(buf), " %6lld", static_cast<long long>(v));
            out += buf;
        }
        out += "\n";
    }
    return out;
}

}  // namespace pocf
