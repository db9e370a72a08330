#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pocf/tensor.hpp"

namespace pocf {

enum class GrayscalePolicy { replicate_to_rgb };

struct PreprocConfig {
    int target_size = 224;
    float std_epsilon = 1e-6f;
    GrayscalePolicy grayscale_policy = GrayscalePolicy::replicate_to_rgb;
};

/// Decodes a PNG or JPEG file (sniffed by magic, not extension) into a
/// channels-first [3 x H x W] tensor of raw 8-bit values in [0, 255].
/// Grayscale sources are replicated to three identical channels; RGB channel
/// order is preserved.
Tensor load_image(const std::string& path);

/// 8-bit grayscale PNG from a row-major W*H buffer.
void save_png_gray(const std::string& path, int width, int height, const std::vector<std::uint8_t>& pixels);

/// 8-bit interleaved RGB PNG from a row-major W*H*3 buffer.
void save_png_rgb(const std::string& path, int width, int height, const std::vector<std::uint8_t>& pixels);

/// Baseline JPEG from a row-major interleaved RGB buffer.
void save_jpeg_rgb(const std::string& path, int width, int height, const std::vector<std::uint8_t>& pixels,
                   int quality = 92);

/// Bilinear resize with half-pixel centers to [3 x target x target].
Tensor resize_bilinear(const Tensor& img, int target);

/// Maps 8-bit-origin values into [0, 1] by dividing by 255.
Tensor normalize01(const Tensor& img);

/// (x - mu) / (sigma + eps) with mu and sigma taken over all pixels and
/// channels of the single image; population (1/N) variance.
Tensor standardize(const Tensor& img, float eps = 1e-6f);

/// load -> resize -> normalize01 -> standardize.
Tensor preprocess_image(const std::string& path, const PreprocConfig& cfg = {});

}  // namespace pocf
