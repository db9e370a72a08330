#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pocf {

/// Synthetic grayscale ultrasound-like patterns, one directory per class:
///   bands_horizontal - bright horizontal bands with random period/phase
///   bands_vertical   - the same structure rotated 90 degrees
///   speckle          - low-frequency blobs plus strong speckle noise
/// Written as 8-bit grayscale PNGs under root/<class_name>/img_NNNN.png.
struct SynthConfig {
    int per_class = 200;
    int image_size = 224;
    int num_classes = 3;  // 2 or 3, taking the first classes of the list above
    std::uint64_t seed = 1234;
};

std::vector<std::string> synth_class_names(int num_classes = 3);

void generate_synthetic_dataset(const std::string& root, const SynthConfig& cfg);

}  // namespace pocf
