#include "pocf/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace pocf {

namespace {

constexpr char kMagic[4] = {'P', 'O', 'C', 'F'};

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

nlohmann::json config_json(const ViTConfig& cfg) {
    return {{"layers", cfg.layers},
            {"hidden_size", cfg.hidden_size},
            {"mlp_size", cfg.mlp_size},
            {"heads", cfg.heads},
            {"patch_size", cfg.patch_size},
            {"image_size", cfg.image_size},
            {"channels", cfg.channels},
            {"num_classes", cfg.num_classes},
            {"proj_rank", cfg.proj_rank},
            {"attention_mode", to_string(cfg.attention_mode)},
            {"share_kv", cfg.share_kv},
            {"dropout", cfg.dropout},
            {"seed", cfg.seed}};
}

ViTConfig config_from(const nlohmann::json& j) {
    ViTConfig cfg;
    cfg.layers = j.at("layers").get<int>();
    cfg.hidden_size = j.at("hidden_size").get<int>();
    cfg.mlp_size = j.at("mlp_size").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.patch_size = j.at("patch_size").get<int>();
    cfg.image_size = j.at("image_size").get<int>();
    cfg.channels = j.at("channels").get<int>();
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.proj_rank = j.at("proj_rank").get<int>();
    cfg.attention_mode = attention_mode_from_string(j.at("attention_mode").get<std::string>());
    cfg.share_kv = j.at("share_kv").get<bool>();
    cfg.dropout = j.at("dropout").get<float>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

}  // namespace

std::string vit_config_to_json(const ViTConfig& cfg, int indent) { return config_json(cfg).dump(indent); }

ViTConfig vit_config_from_json(const std::string& json_text) {
    try {
        return config_from(nlohmann::json::parse(json_text));
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("config: bad JSON: ") + e.what());
    }
}

void save_checkpoint(const ViTModel& model, const std::string& path, const std::vector<std::string>& class_names,
                     const std::string& extra_json) {
    model.config.validate();
    nlohmann::json header;
    header["config"] = config_json(model.config);
    header["class_names"] = class_names;
    try {
        header["extra"] = extra_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(extra_json);
    } catch (const nlohmann::json::exception& e) {
        throw contract_error(std::string("save_checkpoint: extra_json is not valid JSON: ") + e.what());
    }

    nlohmann::json manifest = nlohmann::json::array();
    std::uint64_t offset = 0;
    model.visit_params([&](const std::string& name, const Tensor& t) {
        manifest.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
        offset += t.size() * sizeof(float);
    });
    header["tensors"] = std::move(manifest);
    const std::string header_text = header.dump();
    if (header_text.size() > 0xFFFFFFFFull) throw contract_error("save_checkpoint: header too large");

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("save_checkpoint: cannot open '" + tmp + "' for writing");
        out.write(kMagic, 4);
        write_u32(out, kCheckpointVersion);
        write_u32(out, static_cast<std::uint32_t>(header_text.size()));
        out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
        model.visit_params([&](const std::string&, const Tensor& t) {
            out.write(reinterpret_cast<const char*>(t.data()),
                      static_cast<std::streamsize>(t.size() * sizeof(float)));
        });
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw io_error("save_checkpoint: write failed for '" + tmp + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw io_error("save_checkpoint: cannot move checkpoint into place at '" + path + "'");
    }
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("load_checkpoint: cannot open '" + path + "'");
    char magic[4] = {0};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw format_error("load_checkpoint: '" + path + "' is not a POCF checkpoint");
    const std::uint32_t version = read_u32(in);
    if (version != kCheckpointVersion)
        throw format_error("load_checkpoint: unsupported format version " + std::to_string(version));
    const std::uint32_t header_len = read_u32(in);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), header_len);
    if (in.gcount() != static_cast<std::streamsize>(header_len))
        throw format_error("load_checkpoint: truncated header in '" + path + "'");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("load_checkpoint: bad header JSON: ") + e.what());
    }

    LoadedCheckpoint result;
    const ViTConfig cfg = config_from(header.at("config"));
    cfg.validate();
    result.model = ViTModel::init(cfg, cfg.seed);
    if (header.contains("class_names")) result.class_names = header["class_names"].get<std::vector<std::string>>();
    result.extra_json = header.contains("extra") ? header["extra"].dump() : std::string("{}");

    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    struct Entry {
        Shape shape;
        std::uint64_t offset;
    };
    std::map<std::string, Entry> entries;
    for (const auto& t : header.at("tensors"))
        entries[t.at("name").get<std::string>()] = {t.at("shape").get<Shape>(), t.at("offset").get<std::uint64_t>()};

    std::size_t loaded = 0;
    std::string problem;
    result.model.visit_params([&](const std::string& name, Tensor& t) {
        auto it = entries.find(name);
        if (it == entries.end()) {
            if (problem.empty()) problem = "missing tensor '" + name + "'";
            return;
        }
        if (it->second.shape != t.shape()) {
            if (problem.empty())
                problem = "tensor '" + name + "' has shape " + shape_str(it->second.shape) + ", expected " +
                          shape_str(t.shape());
            return;
        }
        const std::uint64_t bytes = t.size() * sizeof(float);
        if (it->second.offset + bytes > data.size()) {
            if (problem.empty()) problem = "tensor '" + name + "' extends past end of file";
            return;
        }
        std::memcpy(t.data(), data.data() + it->second.offset, bytes);
        ++loaded;
    });
    if (!problem.empty()) throw format_error("load_checkpoint: " + problem + " in '" + path + "'");
    if (loaded != entries.size())
        throw format_error("load_checkpoint: manifest lists " + std::to_string(entries.size()) +
                           " tensors but the model defines " + std::to_string(loaded));
    return result;
}

}  // namespace pocf
