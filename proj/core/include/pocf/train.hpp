#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pocf/metrics.hpp"
#include "pocf/tensor.hpp"
#include "pocf/vit.hpp"

namespace pocf {

/// One preprocessed training/evaluation sample.
struct TrainSample {
    Tensor image;  // [channels x size x size], already standardized
    int label = 0;
};

struct TrainConfig {
    int epochs = 50;
    int batch_size = 16;
    float learning_rate = 3e-4f;
    float beta1 = 0.9f;   // first-moment decay
    float beta2 = 0.999f;  // second-moment decay
    float adam_epsilon = 1e-8f;
    float weight_decay = 0.0f;
    std::uint64_t seed = 0;
    bool use_class_weights = true;

    /// learning_rate 0 is permitted: it is the degenerate no-op optimizer
    /// used to test update arithmetic.
    void validate() const {
        if (epochs < 1) throw contract_error("train config: epochs must be >= 1");
        if (batch_size < 1) throw contract_error("train config: batch_size must be >= 1");
        if (learning_rate < 0.0f) throw contract_error("train config: negative learning rate");
        if (beta1 < 0.0f || beta1 >= 1.0f || beta2 < 0.0f || beta2 >= 1.0f)
            throw contract_error("train config: moment decays must be in [0, 1)");
        if (adam_epsilon <= 0.0f) throw contract_error("train config: adam_epsilon must be positive");
        if (weight_decay < 0.0f) throw contract_error("train config: negative weight decay");
    }
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct History {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;  // 1-based epoch whose parameters the model carries

    std::string to_json(int indent = 2) const;
};

/// Mini-batch training with adaptive moment estimation. Deterministic under
/// (seed, config, data): the shuffle sequence, accumulation order and update
/// order are all fixed. The model is left holding the parameters of the
/// best-validation-accuracy epoch (ties: lower validation loss, then the
/// earlier epoch).
History train(ViTModel& model, const std::vector<TrainSample>& train_set, const std::vector<TrainSample>& val_set,
              const TrainConfig& cfg, const std::vector<float>& weights);

/// Argmax predictions (ties -> lowest class index) over a whole set,
/// reported as the full confusion-matrix metric suite.
MetricsReport evaluate(const ViTModel& model, const std::vector<TrainSample>& test_set,
                       const std::vector<std::string>& class_names, int eval_batch_size = 16);

/// Per-sample argmax predictions.
std::vector<int> predict(const ViTModel& model, const std::vector<TrainSample>& samples, int eval_batch_size = 16);

}  // namespace pocf
