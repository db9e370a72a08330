// pocf — train, evaluate and benchmark the lightweight Linformer-based
// image classifier from the command line.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pocf/bench.hpp"
#include "pocf/checkpoint.hpp"
#include "pocf/dataset.hpp"
#include "pocf/image.hpp"
#include "pocf/metrics.hpp"
#include "pocf/synthdata.hpp"
#include "pocf/train.hpp"
#include "pocf/vit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// run configuration: preset < config file < command-line flags

struct RunConfig {
    std::string task = "binary";
    pocf::ViTConfig model;
    pocf::PreprocConfig preproc;
    pocf::TrainConfig train;
    pocf::SplitRatios split;
    std::vector<std::string> classes;  // empty = all dataset classes

    json to_json() const {
        json j;
        j["task"] = task;
        j["model"] = json::parse(pocf::vit_config_to_json(model));
        j["preproc"] = {{"target_size", preproc.target_size}, {"std_epsilon", preproc.std_epsilon}};
        j["train"] = {{"epochs", train.epochs},
                      {"batch_size", train.batch_size},
                      {"learning_rate", train.learning_rate},
                      {"beta1", train.beta1},
                      {"beta2", train.beta2},
                      {"adam_epsilon", train.adam_epsilon},
                      {"weight_decay", train.weight_decay},
                      {"seed", train.seed},
                      {"use_class_weights", train.use_class_weights}};
        j["split"] = {{"train", split.train}, {"val", split.val}, {"test", split.test}};
        j["classes"] = classes;
        return j;
    }
};

RunConfig preset_for_task(const std::string& task) {
    RunConfig rc;
    rc.task = task;
    if (task == "binary")
        rc.model = pocf::ViTConfig::binary_preset();
    else if (task == "multiclass")
        rc.model = pocf::ViTConfig::multiclass_preset();
    else
        throw pocf::contract_error("unknown task '" + task + "' (expected binary|multiclass)");
    return rc;
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void merge_config_file(RunConfig& rc, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw pocf::io_error("cannot read config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw pocf::format_error("config file '" + path + "': " + e.what());
    }
    maybe(j, "task", rc.task);
    if (j.contains("model")) {
        const json& m = j["model"];
        maybe(m, "layers", rc.model.layers);
        maybe(m, "hidden_size", rc.model.hidden_size);
        maybe(m, "mlp_size", rc.model.mlp_size);
        maybe(m, "heads", rc.model.heads);
        maybe(m, "patch_size", rc.model.patch_size);
        maybe(m, "image_size", rc.model.image_size);
        maybe(m, "channels", rc.model.channels);
        maybe(m, "num_classes", rc.model.num_classes);
        maybe(m, "proj_rank", rc.model.proj_rank);
        maybe(m, "share_kv", rc.model.share_kv);
        maybe(m, "dropout", rc.model.dropout);
        maybe(m, "seed", rc.model.seed);
        if (m.contains("attention_mode"))
            rc.model.attention_mode = pocf::attention_mode_from_string(m["attention_mode"].get<std::string>());
    }
    if (j.contains("preproc")) {
        maybe(j["preproc"], "target_size", rc.preproc.target_size);
        maybe(j["preproc"], "std_epsilon", rc.preproc.std_epsilon);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        maybe(t, "epochs", rc.train.epochs);
        maybe(t, "batch_size", rc.train.batch_size);
        maybe(t, "learning_rate", rc.train.learning_rate);
        maybe(t, "beta1", rc.train.beta1);
        maybe(t, "beta2", rc.train.beta2);
        maybe(t, "adam_epsilon", rc.train.adam_epsilon);
        maybe(t, "weight_decay", rc.train.weight_decay);
        maybe(t, "seed", rc.train.seed);
        maybe(t, "use_class_weights", rc.train.use_class_weights);
    }
    if (j.contains("split")) {
        maybe(j["split"], "train", rc.split.train);
        maybe(j["split"], "val", rc.split.val);
        maybe(j["split"], "test", rc.split.test);
    }
    maybe(j, "classes", rc.classes);
}

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw pocf::io_error("cannot open '" + tmp + "' for writing");
        out << content;
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw pocf::io_error("write failed for '" + tmp + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw pocf::io_error("cannot move output into place at '" + path + "'");
    }
}

std::vector<pocf::TrainSample> preprocess_set(const pocf::Dataset& ds, const pocf::PreprocConfig& pp,
                                              const char* label) {
    std::vector<pocf::TrainSample> out;
    out.reserve(ds.samples.size());
    for (const auto& s : ds.samples) out.push_back({pocf::preprocess_image(s.path, pp), s.label});
    std::cerr << "preprocessed " << out.size() << " " << label << " images\n";
    return out;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

/// Scans the dataset restricted to the checkpoint's classes, with an
/// explicit error when the two class sets cannot be reconciled.
pocf::Dataset scan_for_checkpoint(const std::string& data_root, const std::vector<std::string>& ckpt_classes) {
    if (ckpt_classes.empty()) throw pocf::contract_error("checkpoint carries no class names; cannot match dataset");
    pocf::Dataset all = pocf::scan_dataset(data_root);
    for (const auto& c : ckpt_classes)
        if (std::find(all.class_names.begin(), all.class_names.end(), c) == all.class_names.end())
            throw pocf::contract_error("class mismatch: checkpoint classes [" + join(ckpt_classes) +
                                       "] vs dataset classes [" + join(all.class_names) + "]");
    return pocf::scan_dataset(data_root, ckpt_classes);
}

// ---------------------------------------------------------------------------
// subcommands

struct TrainArgs {
    std::string data, config_file, out;
    std::string task = "binary";
    std::vector<std::string> classes;
    // overrides; applied only when the flag was seen
    int epochs = 0, batch_size = 0, layers = 0, proj_rank = 0, image_size = 0, patch_size = 0;
    double lr = 0.0, dropout = 0.0, val_ratio = 0.0, test_ratio = 0.0;
    std::uint64_t seed = 0;
    std::string attention;
    bool no_class_weights = false;
};

int cmd_train(const TrainArgs& a, const CLI::App& cmd) {
    RunConfig rc = preset_for_task(a.task);
    if (!a.config_file.empty()) merge_config_file(rc, a.config_file);
    if (cmd.count("--task")) rc.task = a.task;
    if (cmd.count("--classes")) rc.classes = a.classes;
    if (cmd.count("--epochs")) rc.train.epochs = a.epochs;
    if (cmd.count("--batch-size")) rc.train.batch_size = a.batch_size;
    if (cmd.count("--lr")) rc.train.learning_rate = static_cast<float>(a.lr);
    if (cmd.count("--seed")) {
        rc.train.seed = a.seed;
        rc.model.seed = a.seed;
    }
    if (cmd.count("--layers")) rc.model.layers = a.layers;
    if (cmd.count("--proj-rank")) rc.model.proj_rank = a.proj_rank;
    if (cmd.count("--image-size")) rc.model.image_size = a.image_size;
    if (cmd.count("--patch-size")) rc.model.patch_size = a.patch_size;
    if (cmd.count("--dropout")) rc.model.dropout = static_cast<float>(a.dropout);
    if (cmd.count("--attention")) rc.model.attention_mode = pocf::attention_mode_from_string(a.attention);
    if (cmd.count("--val-ratio")) rc.split.val = a.val_ratio;
    if (cmd.count("--test-ratio")) rc.split.test = a.test_ratio;
    rc.split.train = 1.0 - rc.split.val - rc.split.test;
    if (a.no_class_weights) rc.train.use_class_weights = false;
    rc.preproc.target_size = rc.model.image_size;

    if (rc.task == "binary" && !rc.classes.empty() && rc.classes.size() != 2)
        throw pocf::contract_error("task binary requires exactly 2 classes, got --classes " + join(rc.classes));

    pocf::Dataset ds = pocf::scan_dataset(a.data, rc.classes);
    if (rc.task == "binary" && ds.num_classes() != 2)
        throw pocf::contract_error("task binary requires exactly 2 classes; dataset has " +
                                   std::to_string(ds.num_classes()) + " — select a pair with --classes");
    rc.model.num_classes = ds.num_classes();
    rc.classes = ds.class_names;
    rc.model.validate();
    rc.train.validate();

    auto splits = pocf::split_dataset(ds, rc.split, rc.train.seed);
    std::cerr << "dataset: " << ds.size() << " samples, classes [" << join(ds.class_names) << "], split "
              << splits.train.size() << "/" << splits.val.size() << "/" << splits.test.size() << "\n";

    auto train_samples = preprocess_set(splits.train, rc.preproc, "train");
    auto val_samples = preprocess_set(splits.val, rc.preproc, "val");
    auto test_samples = preprocess_set(splits.test, rc.preproc, "test");
    auto weights = pocf::class_weights(splits.train.counts);

    pocf::ViTModel model = pocf::ViTModel::init(rc.model, rc.model.seed);
    std::cerr << "model: " << model.param_count() << " parameters, " << rc.model.layers << " layers, "
              << pocf::to_string(rc.model.attention_mode) << " attention\n";

    pocf::History hist = pocf::train(model, train_samples, val_samples, rc.train, weights);
    for (const auto& e : hist.epochs)
        std::fprintf(stderr, "epoch %3d  train_loss %.4f  train_acc %.4f  val_loss %.4f  val_acc %.4f\n", e.epoch,
                     e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy);

    json extra;
    extra["run_config"] = rc.to_json();
    pocf::save_checkpoint(model, a.out, ds.class_names, extra.dump());

    json hist_json = json::parse(hist.to_json());
    hist_json["run_config"] = rc.to_json();
    write_text_atomic(a.out + ".history.json", hist_json.dump(2) + "\n");

    pocf::MetricsReport report = pocf::evaluate(model, test_samples, ds.class_names);
    std::cout << "best epoch: " << hist.best_epoch << "\n";
    std::cout << report.to_text();
    std::cout << "checkpoint: " << a.out << "\n";
    return 0;
}

struct EvalArgs {
    std::string model, data;
    std::string report = "text";
};

int cmd_eval(const EvalArgs& a) {
    pocf::LoadedCheckpoint ckpt = pocf::load_checkpoint(a.model);
    pocf::Dataset ds = scan_for_checkpoint(a.data, ckpt.class_names);
    pocf::PreprocConfig pp;
    pp.target_size = ckpt.model.config.image_size;
    auto samples = preprocess_set(ds, pp, "eval");
    pocf::MetricsReport report = pocf::evaluate(ckpt.model, samples, ds.class_names);
    if (a.report == "json") {
        json j = json::parse(report.to_json());
        j["provenance"] = {{"checkpoint", a.model},
                           {"data", a.data},
                           {"model_config", json::parse(pocf::vit_config_to_json(ckpt.model.config))},
                           {"extra", json::parse(ckpt.extra_json)}};
        std::cout << j.dump(2) << "\n";
    } else if (a.report == "text") {
        std::cout << report.to_text();
    } else {
        throw pocf::contract_error("unknown report format '" + a.report + "' (expected json|text)");
    }
    return 0;
}

struct BenchArgs {
    std::string mode = "linear";
    std::vector<int> seq_lens;
    int d_model = 64, heads = 8, k = 32, reps = 5, threads = 1;
    std::string task = "binary", model_path, format = "csv", out;
    int frames = 100, batch = 8;
    std::uint64_t seed = 0;
};

int cmd_bench(const BenchArgs& a) {
    // benchmarks are single-threaded by contract; the flag exists so the
    // recorded output states the thread count explicitly
    if (a.threads != 1)
        throw pocf::contract_error("bench: only --threads 1 is supported (single-threaded by contract)");
    std::vector<pocf::BenchResult> rows;
    json provenance = {{"mode", a.mode}, {"seed", a.seed}, {"reps", a.reps}, {"threads", a.threads}};
    if (a.mode == "standard" || a.mode == "linear") {
        if (a.seq_lens.empty())
            throw pocf::contract_error("bench: --seq-lens is required for attention modes");
        for (std::size_t i = 1; i < a.seq_lens.size(); ++i)
            if (a.seq_lens[i] <= a.seq_lens[i - 1])
                throw pocf::contract_error("bench: --seq-lens must be strictly ascending");
        rows = pocf::attention_scaling(pocf::attention_mode_from_string(a.mode), a.seq_lens, a.d_model, a.heads,
                                       a.k, a.reps, a.seed);
        provenance["d_model"] = a.d_model;
        provenance["heads"] = a.heads;
        provenance["k"] = a.k;
    } else if (a.mode == "model") {
        pocf::ViTModel model = a.model_path.empty()
                                   ? pocf::ViTModel::init(preset_for_task(a.task).model)
                                   : pocf::load_checkpoint(a.model_path).model;
        pocf::ThroughputReport tr = pocf::throughput(model, a.frames, a.batch, a.reps, a.seed);
        rows.push_back(pocf::throughput_row(tr, "model-" + a.task));
        provenance["frames"] = a.frames;
        provenance["batch"] = a.batch;
        provenance["model_config"] = json::parse(pocf::vit_config_to_json(model.config));
        std::fprintf(stderr, "fps %.2f  per-frame %.4f s\n", tr.fps, tr.per_frame_s);
    } else {
        throw pocf::contract_error("bench: unknown --mode '" + a.mode + "' (expected standard|linear|model)");
    }

    std::string payload;
    if (a.format == "csv") {
        payload = pocf::bench_csv(rows);
    } else if (a.format == "json") {
        json j = {{"provenance", provenance}, {"results", json::parse(pocf::bench_json(rows))}};
        payload = j.dump(2) + "\n";
    } else {
        throw pocf::contract_error("bench: unknown --format '" + a.format + "' (expected csv|json)");
    }
    if (a.out.empty())
        std::cout << payload;
    else
        write_text_atomic(a.out, payload);
    return 0;
}

struct EmbedArgs {
    std::string model, data, out;
};

int cmd_embed(const EmbedArgs& a) {
    pocf::LoadedCheckpoint ckpt = pocf::load_checkpoint(a.model);
    pocf::Dataset ds = scan_for_checkpoint(a.data, ckpt.class_names);
    pocf::PreprocConfig pp;
    pp.target_size = ckpt.model.config.image_size;
    const int hidden = ckpt.model.config.hidden_size;

    std::ostringstream csv;
    csv << "# model=" << a.model << " data=" << a.data << " hidden=" << hidden << "\n";
    csv << "path,label";
    for (int i = 0; i < hidden; ++i) csv << ",e" << i;
    csv << "\n";

    const int batch = 16;
    for (std::size_t start = 0; start < ds.samples.size(); start += batch) {
        const std::size_t count = std::min<std::size_t>(batch, ds.samples.size() - start);
        std::vector<pocf::Tensor> images;
        for (std::size_t i = 0; i < count; ++i)
            images.push_back(pocf::preprocess_image(ds.samples[start + i].path, pp));
        pocf::Tensor emb = ckpt.model.embed(pocf::stack_batch(images));
        for (std::size_t i = 0; i < count; ++i) {
            const auto& s = ds.samples[start + i];
            csv << s.path << "," << ds.class_names[static_cast<std::size_t>(s.label)];
            char buf[32];
            for (int j = 0; j < hidden; ++j) {
                std::snprintf(buf, sizeof(buf), ",%.6g", emb.at(static_cast<int>(i), j));
                csv << buf;
            }
            csv << "\n";
        }
    }
    write_text_atomic(a.out, csv.str());
    std::cerr << "wrote " << ds.samples.size() << " embeddings to " << a.out << "\n";
    return 0;
}

struct CountArgs {
    std::string task = "binary", config_file;
};

int cmd_count_params(const CountArgs& a) {
    RunConfig rc = preset_for_task(a.task);
    if (!a.config_file.empty()) merge_config_file(rc, a.config_file);
    rc.model.validate();
    pocf::ViTModel model = pocf::ViTModel::init(rc.model);
    const std::uint64_t actual = model.param_count();
    const std::uint64_t closed = pocf::closed_form_param_count(rc.model);

    std::string ref = "-";
    const bool is_binary_preset = a.config_file.empty() && rc.task == "binary";
    const bool is_multi_preset = a.config_file.empty() && rc.task == "multiclass";
    if (is_binary_preset) ref = std::to_string(pocf::kPublishedParamCountBinary);
    if (is_multi_preset) ref = std::to_string(pocf::kPublishedParamCountMulticlass);

    std::printf("%-14s %14s %14s %14s\n", "config", "actual", "closed_form", "reference");
    std::printf("%-14s %14llu %14llu %14s\n", rc.task.c_str(), static_cast<unsigned long long>(actual),
                static_cast<unsigned long long>(closed), ref.c_str());
    if (actual != closed) {
        std::printf("note: actual and closed-form counts disagree — registry bug\n");
        return 1;
    }
    if (ref != "-") {
        const std::uint64_t refv = is_binary_preset ? pocf::kPublishedParamCountBinary
                                                    : pocf::kPublishedParamCountMulticlass;
        std::printf("note: audited count differs from the published reference by %+lld; the reference is\n"
                    "reported for comparison only and is not reachable from this hidden size (see README).\n",
                    static_cast<long long>(actual) - static_cast<long long>(refv));
    }
    return 0;
}

struct SynthArgs {
    std::string out;
    int per_class = 200, size = 224, classes_count = 3;
    std::uint64_t seed = 1234;
};

int cmd_synth(const SynthArgs& a) {
    pocf::SynthConfig sc;
    sc.per_class = a.per_class;
    sc.image_size = a.size;
    sc.num_classes = a.classes_count;
    sc.seed = a.seed;
    pocf::generate_synthetic_dataset(a.out, sc);
    std::cerr << "wrote " << a.classes_count * a.per_class << " images under " << a.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lightweight Linformer-ViT image classification pipeline"};
    app.require_subcommand(1);
    int rc = 0;

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "train a model on an image directory tree");
    train_cmd->add_option("--data", ta.data, "dataset root (root/<class>/*.png|jpg)")->required();
    train_cmd->add_option("--task", ta.task, "preset: binary|multiclass")->default_val("binary");
    train_cmd->add_option("--config", ta.config_file, "JSON config file (overrides preset)");
    train_cmd->add_option("--out", ta.out, "output checkpoint path")->required();
    train_cmd->add_option("--classes", ta.classes, "comma-separated class subset/order")->delimiter(',');
    train_cmd->add_option("--epochs", ta.epochs, "training epochs");
    train_cmd->add_option("--batch-size", ta.batch_size, "mini-batch size");
    train_cmd->add_option("--lr", ta.lr, "learning rate");
    train_cmd->add_option("--seed", ta.seed, "seed for init/shuffle/split");
    train_cmd->add_option("--layers", ta.layers, "encoder depth override");
    train_cmd->add_option("--proj-rank", ta.proj_rank, "low-rank projection k");
    train_cmd->add_option("--image-size", ta.image_size, "input image side");
    train_cmd->add_option("--patch-size", ta.patch_size, "patch side");
    train_cmd->add_option("--dropout", ta.dropout, "dropout probability");
    train_cmd->add_option("--attention", ta.attention, "attention mode: standard|linear");
    train_cmd->add_option("--val-ratio", ta.val_ratio, "validation split ratio");
    train_cmd->add_option("--test-ratio", ta.test_ratio, "test split ratio");
    train_cmd->add_flag("--no-class-weights", ta.no_class_weights, "disable loss weighting");
    train_cmd->callback([&] { rc = cmd_train(ta, *train_cmd); });

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a labeled directory tree");
    eval_cmd->add_option("--model", ea.model, "checkpoint path")->required();
    eval_cmd->add_option("--data", ea.data, "dataset root")->required();
    eval_cmd->add_option("--report", ea.report, "output format: json|text")->default_val("text");
    eval_cmd->callback([&] { rc = cmd_eval(ea); });

    BenchArgs ba;
    auto* bench_cmd = app.add_subcommand("bench", "attention scaling and model throughput measurements");
    bench_cmd->add_option("--mode", ba.mode, "standard|linear|model")->required();
    bench_cmd->add_option("--seq-lens", ba.seq_lens, "ascending sequence lengths (attention modes)")
        ->delimiter(',');
    bench_cmd->add_option("--d-model", ba.d_model, "model width")->default_val(64);
    bench_cmd->add_option("--heads", ba.heads, "attention heads")->default_val(8);
    bench_cmd->add_option("--k", ba.k, "low-rank projection size")->default_val(32);
    bench_cmd->add_option("--reps", ba.reps, "timed repetitions (>= 5)")->default_val(5);
    bench_cmd->add_option("--task", ba.task, "model preset for --mode model")->default_val("binary");
    bench_cmd->add_option("--model", ba.model_path, "checkpoint for --mode model");
    bench_cmd->add_option("--frames", ba.frames, "frames per timed run")->default_val(100);
    bench_cmd->add_option("--batch", ba.batch, "inference batch size")->default_val(8);
    bench_cmd->add_option("--format", ba.format, "csv|json")->default_val("csv");
    bench_cmd->add_option("--out", ba.out, "write to file instead of stdout");
    bench_cmd->add_option("--seed", ba.seed, "workload seed")->default_val(0);
    bench_cmd->add_option("--threads", ba.threads, "worker threads (single-threaded contract)")->default_val(1);
    bench_cmd->callback([&] { rc = cmd_bench(ba); });

    EmbedArgs ma;
    auto* embed_cmd = app.add_subcommand("embed", "export class-token embeddings as CSV");
    embed_cmd->add_option("--model", ma.model, "checkpoint path")->required();
    embed_cmd->add_option("--data", ma.data, "dataset root")->required();
    embed_cmd->add_option("--out", ma.out, "output CSV path")->required();
    embed_cmd->callback([&] { rc = cmd_embed(ma); });

    CountArgs ca;
    auto* count_cmd = app.add_subcommand("count-params", "audited vs closed-form vs published parameter counts");
    count_cmd->add_option("--task", ca.task, "binary|multiclass")->default_val("binary");
    count_cmd->add_option("--config", ca.config_file, "JSON config file");
    count_cmd->callback([&] { rc = cmd_count_params(ca); });

    SynthArgs sa;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic band-pattern dataset");
    synth_cmd->add_option("--out", sa.out, "dataset root to create")->required();
    synth_cmd->add_option("--per-class", sa.per_class, "images per class")->default_val(200);
    synth_cmd->add_option("--size", sa.size, "image side in pixels")->default_val(224);
    synth_cmd->add_option("--classes-count", sa.classes_count, "2 or 3 classes")->default_val(3);
    synth_cmd->add_option("--seed", sa.seed, "generator seed")->default_val(1234);
    synth_cmd->callback([&] { rc = cmd_synth(sa); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
