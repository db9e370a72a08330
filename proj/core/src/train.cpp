#include "pocf/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "pocf/ops.hpp"

namespace pocf {

namespace {

int argmax_row(const float* row, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (row[i] > row[best]) best = i;
    return best;
}

Tensor make_batch(const std::vector<TrainSample>& set, const std::vector<std::size_t>& order, std::size_t start,
                  std::size_t count) {
    std::vector<Tensor> images;
    images.reserve(count);
    for (std::size_t i = 0; i < count; ++i) images.push_back(set[order[start + i]].image);
    return stack_batch(images);
}

struct EvalStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

EvalStats eval_set(const ViTModel& model, const std::vector<TrainSample>& set, const std::vector<float>& weights,
                   int batch_size) {
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    double loss_sum = 0.0;
    std::size_t correct = 0;
    const int classes = model.config.num_classes;
    for (std::size_t start = 0; start < set.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t count = std::min<std::size_t>(batch_size, set.size() - start);
        Tensor xb = make_batch(set, order, start, count);
        Tensor logits = model.forward(xb);
        std::vector<int> targets(count);
        for (std::size_t i = 0; i < count; ++i) targets[i] = set[start + i].label;
        Tensor loss = weighted_cross_entropy(logits, targets, weights);
        loss_sum += static_cast<double>(loss.at(0)) * static_cast<double>(count);
        for (std::size_t i = 0; i < count; ++i)
            if (argmax_row(logits.data() + i * static_cast<std::size_t>(classes), classes) == targets[i]) ++correct;
    }
    return {loss_sum / static_cast<double>(set.size()),
            static_cast<double>(correct) / static_cast<double>(set.size())};
}

void check_labels(const std::vector<TrainSample>& set, int classes, const char* which) {
    for (const auto& s : set)
        if (s.label < 0 || s.label >= classes)
            throw contract_error(std::string("train: ") + which + " label " + std::to_string(s.label) +
                                 " outside model's " + std::to_string(classes) + " classes");
}

}  // namespace

History train(ViTModel& model, const std::vector<TrainSample>& train_set, const std::vector<TrainSample>& val_set,
              const TrainConfig& cfg, const std::vector<float>& weights_in) {
    cfg.validate();
    if (train_set.empty() || val_set.empty()) throw contract_error("train: empty train or validation set");
    const int classes = model.config.num_classes;
    check_labels(train_set, classes, "train");
    check_labels(val_set, classes, "validation");
    std::vector<float> weights =
        cfg.use_class_weights ? weights_in : std::vector<float>(static_cast<std::size_t>(classes), 1.0f);
    if (static_cast<int>(weights.size()) != classes)
        throw contract_error("train: " + std::to_string(weights.size()) + " class weights for " +
                             std::to_string(classes) + " classes");

    auto params = model.named_params();
    struct Slot {
        std::vector<float> m, v;
    };
    std::vector<Slot> slots(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        slots[i].m.assign(params[i].second->size(), 0.0f);
        slots[i].v.assign(params[i].second->size(), 0.0f);
    }

    Rng shuffle_rng(cfg.seed);
    History hist;
    double best_acc = -1.0, best_loss = std::numeric_limits<double>::infinity();
    std::vector<std::vector<float>> best_values;
    long long step = 0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        model.set_training(true);
        deterministic_shuffle(order, shuffle_rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        int batch_index = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
            const std::size_t count = std::min<std::size_t>(cfg.batch_size, order.size() - start);
            Tensor xb = make_batch(train_set, order, start, count);
            std::vector<int> targets(count);
            for (std::size_t i = 0; i < count; ++i) targets[i] = train_set[order[start + i]].label;

            Tape tape;
            xb.tape = &tape;
            Tensor logits = model.forward(xb);
            Tensor loss = weighted_cross_entropy(logits, targets, weights);
            if (!std::isfinite(static_cast<double>(loss.at(0))))
                throw numeric_error("train: non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                                    std::to_string(batch_index));
            tape.backward(loss);
            ++step;

            const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), static_cast<double>(step));
            for (std::size_t pi = 0; pi < params.size(); ++pi) {
                Tensor& p = *params[pi].second;
                if (!p.has_grad()) continue;  // params can sit outside the loss path in degenerate configs
                const auto& g = p.grad();
                auto& m = slots[pi].m;
                auto& v = slots[pi].v;
                auto& vals = p.values();
                for (std::size_t i = 0; i < vals.size(); ++i) {
                    m[i] = cfg.beta1 * m[i] + (1.0f - cfg.beta1) * g[i];
                    v[i] = cfg.beta2 * v[i] + (1.0f - cfg.beta2) * g[i] * g[i];
                    const float mhat = static_cast<float>(m[i] / bc1);
                    const float vhat = static_cast<float>(v[i] / bc2);
                    vals[i] -= cfg.learning_rate * (mhat / (std::sqrt(vhat) + cfg.adam_epsilon) +
                                                    cfg.weight_decay * vals[i]);
                }
                p.zero_grad();
            }
            tape.clear();

            loss_sum += static_cast<double>(loss.at(0)) * static_cast<double>(count);
            for (std::size_t i = 0; i < count; ++i)
                if (argmax_row(logits.data() + i * static_cast<std::size_t>(classes), classes) == targets[i])
                    ++correct;
        }
        model.set_training(false);

        EvalStats val = eval_set(model, val_set, weights, cfg.batch_size);
        EpochStats es;
        es.epoch = epoch;
        es.train_loss = loss_sum / static_cast<double>(train_set.size());
        es.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
        es.val_loss = val.loss;
        es.val_accuracy = val.accuracy;
        hist.epochs.push_back(es);

        if (val.accuracy > best_acc || (val.accuracy == best_acc && val.loss < best_loss)) {
            best_acc = val.accuracy;
            best_loss = val.loss;
            hist.best_epoch = epoch;
            best_values.clear();
            for (auto& [name, p] : params) best_values.push_back(p->values());
        }
    }

    for (std::size_t i = 0; i < params.size(); ++i) params[i].second->values() = best_values[i];
    return hist;
}

std::vector<int> predict(const ViTModel& model, const std::vector<TrainSample>& samples, int eval_batch_size) {
    if (samples.empty()) throw contract_error("predict: empty sample set");
    if (eval_batch_size < 1) throw contract_error("predict: batch size must be >= 1");
    const int classes = model.config.num_classes;
    std::vector<int> preds;
    preds.reserve(samples.size());
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(eval_batch_size)) {
        const std::size_t count = std::min<std::size_t>(eval_batch_size, samples.size() - start);
        Tensor xb = make_batch(samples, order, start, count);
        Tensor logits = model.forward(xb);
        for (std::size_t i = 0; i < count; ++i)
            preds.push_back(argmax_row(logits.data() + i * static_cast<std::size_t>(classes), classes));
    }
    return preds;
}

MetricsReport evaluate(const ViTModel& model, const std::vector<TrainSample>& test_set,
                       const std::vector<std::string>& class_names, int eval_batch_size) {
    if (test_set.empty()) throw contract_error("evaluate: empty test set");
    if (static_cast<int>(class_names.size()) != model.config.num_classes)
        throw contract_error("evaluate: " + std::to_string(class_names.size()) + " labels for " +
                             std::to_string(model.config.num_classes) + " classes");
    check_labels(test_set, model.config.num_classes, "test");
    std::vector<int> preds = predict(model, test_set, eval_batch_size);
    std::vector<int> targets;
    targets.reserve(test_set.size());
    for (const auto& s : test_set) targets.push_back(s.label);
    return report_from_confusion(confusion_matrix(preds, targets, model.config.num_classes), class_names);
}

std::string History::to_json(int indent) const {
    nlohmann::json j;
    j["best_epoch"] = best_epoch;
    j["epochs"] = nlohmann::json::array();
    for (const auto& e : epochs)
        j["epochs"].push_back({{"epoch", e.epoch},
                               {"train_loss", e.train_loss},
                               {"train_accuracy", e.train_accuracy},
                               {"val_loss", e.val_loss},
                               {"val_accuracy", e.val_accuracy}});
    return j.dump(indent);
}

}  // namespace pocf
