#include "pocf/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "pocf/error.hpp"
#include "pocf/image.hpp"
#include "pocf/rng.hpp"

namespace fs = std::filesystem;

namespace pocf {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0)); }

/// Bright bands across one axis, with mild depth attenuation and speckle.
void draw_bands(std::vector<std::uint8_t>& img, int size, bool horizontal, Rng& rng) {
    const double period = 12.0 + rng.uniform() * 14.0;
    const double phase = rng.uniform() * period;
    const double base = 20.0 + rng.uniform() * 30.0;
    const double amp = 70.0 + rng.uniform() * 60.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const int axis = horizontal ? y : x;
            const double band = 0.5 * (1.0 + std::sin(kTwoPi * (axis + phase) / period));
            const double depth = -20.0 * static_cast<double>(y) / size;
            const double noise = rng.normal() * 12.0;
            img[static_cast<std::size_t>(y) * size + x] = clamp_u8(base + amp * band + depth + noise);
        }
}

/// Low-frequency blobs with heavy speckle and no dominant band orientation.
void draw_speckle(std::vector<std::uint8_t>& img, int size, Rng& rng) {
    const double base = 40.0 + rng.uniform() * 40.0;
    double fx[3], fy[3], px[3], py[3], amp[3];
    for (int i = 0; i < 3; ++i) {
        fx[i] = 1.0 + rng.uniform() * 2.0;
        fy[i] = 1.0 + rng.uniform() * 2.0;
        px[i] = rng.uniform() * kTwoPi;
        py[i] = rng.uniform() * kTwoPi;
        amp[i] = 15.0 + rng.uniform() * 25.0;
    }
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double v = base;
            for (int i = 0; i < 3; ++i)
                v += amp[i] * std::sin(kTwoPi * fx[i] * x / size + px[i]) *
                     std::sin(kTwoPi * fy[i] * y / size + py[i]);
            v += rng.normal() * 25.0;
            img[static_cast<std::size_t>(y) * size + x] = clamp_u8(v);
        }
}

}  // namespace

std::vector<std::string> synth_class_names(int num_classes) {
    if (num_classes < 2 || num_classes > 3)
        throw contract_error("synth_class_names: supported class counts are 2 and 3");
    std::vector<std::string> names = {"bands_horizontal", "bands_vertical", "speckle"};
    names.resize(static_cast<std::size_t>(num_classes));
    return names;
}

void generate_synthetic_dataset(const std::string& root, const SynthConfig& cfg) {
    if (cfg.per_class < 1) throw contract_error("generate_synthetic_dataset: per_class must be >= 1");
    if (cfg.image_size < 8) throw contract_error("generate_synthetic_dataset: image_size must be >= 8");
    const auto names = synth_class_names(cfg.num_classes);
    Rng rng(cfg.seed);
    std::vector<std::uint8_t> img(static_cast<std::size_t>(cfg.image_size) * cfg.image_size);
    for (std::size_t c = 0; c < names.size(); ++c) {
        const fs::path dir = fs::path(root) / names[c];
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw io_error("generate_synthetic_dataset: cannot create '" + dir.string() + "'");
        for (int i = 0; i < cfg.per_class; ++i) {
            if (c == 0)
                draw_bands(img, cfg.image_size, true, rng);
            else if (c == 1)
                draw_bands(img, cfg.image_size, false, rng);
            else
                draw_speckle(img, cfg.image_size, rng);
            char name[32];
            std::snprintf(name, sizeof(name), "img_%04d.png", i);
            save_png_gray((dir / name).string(), cfg.image_size, cfg.image_size, img);
        }
    }
}

}  // namespace pocf
