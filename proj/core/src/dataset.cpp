#include "pocf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "pocf/rng.hpp"

namespace fs = std::filesystem;

namespace pocf {

namespace {

bool has_image_ext(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<std::string> read_manifest(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw io_error("scan_dataset: cannot read manifest '" + manifest.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw format_error("scan_dataset: bad manifest '" + manifest.string() + "': " + e.what());
    }
    if (!j.is_array()) throw format_error("scan_dataset: manifest must be a JSON array of class names");
    std::vector<std::string> names;
    for (const auto& v : j) names.push_back(v.get<std::string>());
    return names;
}

}  // namespace

Dataset scan_dataset(const std::string& root, const std::vector<std::string>& class_filter) {
    const fs::path rootp(root);
    if (!fs::is_directory(rootp)) throw io_error("scan_dataset: '" + root + "' is not a directory");

    std::vector<std::string> names;
    const fs::path manifest = rootp / "classes.json";
    if (fs::is_regular_file(manifest)) {
        names = read_manifest(manifest);
    } else {
        for (const auto& e : fs::directory_iterator(rootp))
            if (e.is_directory()) names.push_back(e.path().filename().string());
        std::sort(names.begin(), names.end());
    }
    if (!class_filter.empty()) {
        for (const auto& want : class_filter)
            if (std::find(names.begin(), names.end(), want) == names.end())
                throw contract_error("scan_dataset: requested class '" + want + "' not present under '" + root + "'");
        names = class_filter;
    }
    if (names.empty()) throw contract_error("scan_dataset: no class directories under '" + root + "'");

    Dataset ds;
    ds.class_names = names;
    ds.counts.assign(names.size(), 0);
    for (std::size_t c = 0; c < names.size(); ++c) {
        const fs::path dir = rootp / names[c];
        if (!fs::is_directory(dir)) throw io_error("scan_dataset: missing class directory '" + dir.string() + "'");
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && has_image_ext(e.path())) files.push_back(e.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw contract_error("scan_dataset: class '" + names[c] + "' has no images");
        ds.counts[c] = static_cast<int>(files.size());
        for (auto& f : files) ds.samples.push_back({std::move(f), static_cast<int>(c)});
    }
    return ds;
}

std::vector<float> class_weights(const std::vector<int>& counts) {
    if (counts.empty()) throw contract_error("class_weights: empty counts");
    int mn = counts[0];
    for (int c : counts) {
        if (c < 1) throw contract_error("class_weights: class count must be >= 1, got " + std::to_string(c));
        mn = std::min(mn, c);
    }
    std::vector<float> w(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        w[i] = static_cast<float>(static_cast<double>(mn) / static_cast<double>(counts[i]));
    return w;
}

DatasetSplit split_dataset(const Dataset& ds, const SplitRatios& ratios, std::uint64_t seed) {
    const double r[3] = {ratios.train, ratios.val, ratios.test};
    double sum = 0;
    for (double v : r) {
        if (v <= 0.0) throw contract_error("split_dataset: all three ratios must be positive");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw contract_error("split_dataset: ratios must sum to 1");
    if (ds.samples.empty()) throw contract_error("split_dataset: empty dataset");

    DatasetSplit out;
    for (Dataset* part : {&out.train, &out.val, &out.test}) {
        part->class_names = ds.class_names;
        part->counts.assign(ds.class_names.size(), 0);
    }

    Rng rng(seed);
    for (int c = 0; c < ds.num_classes(); ++c) {
        std::vector<const Sample*> members;
        for (const auto& s : ds.samples)
            if (s.label == c) members.push_back(&s);
        deterministic_shuffle(members, rng);

        const auto n = static_cast<int>(members.size());
        int take[3];
        double frac[3];
        int assigned = 0;
        for (int i = 0; i < 3; ++i) {
            const double quota = r[i] * n;
            take[i] = static_cast<int>(std::floor(quota));
            frac[i] = quota - take[i];
            assigned += take[i];
        }
        int order[3] = {0, 1, 2};
        std::stable_sort(order, order + 3, [&frac](int a, int b) { return frac[a] > frac[b]; });
        for (int i = 0; assigned < n; ++i, ++assigned) ++take[order[i % 3]];
        if (take[0] < 1 || take[1] < 1 || take[2] < 1)
            throw contract_error("split_dataset: class '" + ds.class_names[static_cast<std::size_t>(c)] +
                                 "' has too few samples (" + std::to_string(n) +
                                 ") to fill train/val/test partitions");

        Dataset* parts[3] = {&out.train, &out.val, &out.test};
        int idx = 0;
        for (int p = 0; p < 3; ++p)
            for (int i = 0; i < take[p]; ++i, ++idx) {
                parts[p]->samples.push_back(*members[static_cast<std::size_t>(idx)]);
                parts[p]->counts[static_cast<std::size_t>(c)] += 1;
            }
    }
    return out;
}

}  // namespace pocf
