#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pocf/vit.hpp"

namespace pocf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string vit_config_to_json(const ViTConfig& cfg, int indent = -1);
ViTConfig vit_config_from_json(const std::string& json_text);

/// Checkpoint file layout (all integers little-endian):
///   bytes 0..3   magic "POCF"
///   bytes 4..7   u32 format version
///   bytes 8..11  u32 header length H
///   bytes 12..   JSON header of H bytes: {"config", "class_names",
///                "extra", "tensors": [{"name","shape","offset"}...]}
///   then         raw 32-bit float data; each tensor's offset is relative
///                to the start of this data section
/// The file is written to a temporary sibling and renamed, so failures never
/// leave a partial checkpoint. load(save(m)) is bitwise-identical.
void save_checkpoint(const ViTModel& model, const std::string& path,
                     const std::vector<std::string>& class_names = {}, const std::string& extra_json = "");

struct LoadedCheckpoint {
    ViTModel model;
    std::vector<std::string> class_names;
    std::string extra_json;  // "{}" when absent
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace pocf
