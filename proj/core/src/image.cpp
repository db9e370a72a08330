#include "pocf/image.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include <jpeglib.h>
#include <png.h>

#include "pocf/error.hpp"

namespace pocf {

namespace {

Tensor rgb_to_tensor(const std::vector<std::uint8_t>& rgb, int w, int h) {
    Tensor t = Tensor::zeros({3, h, w});
    float* out = t.data();
    const std::size_t plane = static_cast<std::size_t>(w) * h;
    for (std::size_t i = 0; i < plane; ++i) {
        out[i] = static_cast<float>(rgb[i * 3 + 0]);
        out[plane + i] = static_cast<float>(rgb[i * 3 + 1]);
        out[2 * plane + i] = static_cast<float>(rgb[i * 3 + 2]);
    }
    return t;
}

Tensor load_png(const std::string& path) {
    png_image im;
    std::memset(&im, 0, sizeof(im));
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&im, path.c_str()))
        throw io_error("load_image: cannot read PNG '" + path + "': " + im.message);
    im.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(im));
    if (!png_image_finish_read(&im, nullptr, rgb.data(), 0, nullptr)) {
        const std::string msg = im.message;
        png_image_free(&im);
        throw io_error("load_image: corrupt PNG '" + path + "': " + msg);
    }
    return rgb_to_tensor(rgb, static_cast<int>(im.width), static_cast<int>(im.height));
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_trampoline(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

Tensor load_jpeg(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw io_error("load_image: cannot open '" + path + "'");

    jpeg_decompress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_trampoline;

    std::vector<std::uint8_t> rgb;
    int w = 0, h = 0;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        std::fclose(f);
        throw io_error("load_image: corrupt JPEG '" + path + "': " + jerr.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;  // grayscale sources get replicated
    jpeg_start_decompress(&cinfo);
    w = static_cast<int>(cinfo.output_width);
    h = static_cast<int>(cinfo.output_height);
    rgb.resize(static_cast<std::size_t>(w) * h * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    return rgb_to_tensor(rgb, w, h);
}

}  // namespace

Tensor load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("load_image: cannot open '" + path + "'");
    unsigned char magic[8] = {0};
    in.read(reinterpret_cast<char*>(magic), 8);
    if (in.gcount() < 3) throw io_error("load_image: truncated file '" + path + "'");
    in.close();
    if (magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G') return load_png(path);
    if (magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF) return load_jpeg(path);
    throw format_error("load_image: unsupported format (not PNG/JPEG): '" + path + "'");
}

namespace {
void save_png_impl(const std::string& path, int width, int height, const std::uint8_t* pixels,
                   std::uint32_t format, std::size_t expected, std::size_t got) {
    if (width < 1 || height < 1) throw contract_error("save_png: non-positive dimensions");
    if (got != expected)
        throw contract_error("save_png: buffer holds " + std::to_string(got) + " bytes, expected " +
                             std::to_string(expected));
    png_image im;
    std::memset(&im, 0, sizeof(im));
    im.version = PNG_IMAGE_VERSION;
    im.width = static_cast<png_uint_32>(width);
    im.height = static_cast<png_uint_32>(height);
    im.format = format;
    if (!png_image_write_to_file(&im, path.c_str(), 0, pixels, 0, nullptr))
        throw io_error("save_png: cannot write '" + path + "': " + im.message);
}
}  // namespace

void save_png_gray(const std::string& path, int width, int height, const std::vector<std::uint8_t>& pixels) {
    save_png_impl(path, width, height, pixels.data(), PNG_FORMAT_GRAY,
                  static_cast<std::size_t>(width) * height, pixels.size());
}

void save_png_rgb(const std::string& path, int width, int height, const std::vector<std::uint8_t>& pixels) {
    save_png_impl(path, width, height, pixels.data(), PNG_FORMAT_RGB,
                  static_cast<std::size_t>(width) * height * 3, pixels.size());
}

void save_jpeg_rgb(const std::string& path, int width, int height, const std::vector<std::uint8_t>& pixels,
                   int quality) {
    if (pixels.size() != static_cast<std::size_t>(width) * height * 3)
        throw contract_error("save_jpeg_rgb: buffer/dimension mismatch");
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("save_jpeg_rgb: cannot open '" + path + "'");
    jpeg_compress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_trampoline;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_compress(&cinfo);
        std::fclose(f);
        throw io_error("save_jpeg_rgb: encode failed for '" + path + "': " + jerr.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, f);
    cinfo.image_width = static_cast<JDIMENSION>(width);
    cinfo.image_height = static_cast<JDIMENSION>(height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<JSAMPROW>(pixels.data() + static_cast<std::size_t>(cinfo.next_scanline) * width * 3);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::fclose(f);
}

Tensor resize_bilinear(const Tensor& img, int target) {
    if (!img.defined() || img.ndim() != 3) throw dim_error("resize_bilinear: expected [C x H x W]");
    if (target < 1) throw contract_error("resize_bilinear: non-positive target");
    const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    if (h < 1 || w < 1) throw contract_error("resize_bilinear: empty source");
    if (h == target && w == target) return Tensor::from_data(img.shape(), img.values());
    Tensor out = Tensor::zeros({c, target, target});
    const double sy = static_cast<double>(h) / target;
    const double sx = static_cast<double>(w) / target;
    for (int ch = 0; ch < c; ++ch) {
        const float* plane = img.data() + static_cast<std::size_t>(ch) * h * w;
        float* dst = out.data() + static_cast<std::size_t>(ch) * target * target;
        for (int oy = 0; oy < target; ++oy) {
            double fy = (oy + 0.5) * sy - 0.5;
            fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
            const int y0 = static_cast<int>(fy);
            const int y1 = std::min(y0 + 1, h - 1);
            const double wy = fy - y0;
            for (int ox = 0; ox < target; ++ox) {
                double fx = (ox + 0.5) * sx - 0.5;
                fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
                const int x0 = static_cast<int>(fx);
                const int x1 = std::min(x0 + 1, w - 1);
                const double wx = fx - x0;
                const double v00 = plane[static_cast<std::size_t>(y0) * w + x0];
                const double v01 = plane[static_cast<std::size_t>(y0) * w + x1];
                const double v10 = plane[static_cast<std::size_t>(y1) * w + x0];
                const double v11 = plane[static_cast<std::size_t>(y1) * w + x1];
                dst[static_cast<std::size_t>(oy) * target + ox] = static_cast<float>(
                    (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) + wy * ((1.0 - wx) * v10 + wx * v11));
            }
        }
    }
    return out;
}

Tensor normalize01(const Tensor& img) {
    if (!img.defined()) throw contract_error("normalize01: undefined tensor");
    Tensor out = Tensor::zeros(img.shape());
    constexpr float inv = 1.0f / 255.0f;
    for (std::size_t i = 0; i < img.size(); ++i) out.data()[i] = img.data()[i] * inv;
    return out;
}

Tensor standardize(const Tensor& img, float eps) {
    if (!img.defined()) throw contract_error("standardize: undefined tensor");
    const std::size_t n = img.size();
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += img.data()[i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = img.data()[i] - mu;
        var += d * d;
    }
    var /= static_cast<double>(n);
    const double denom = std::sqrt(var) + eps;
    Tensor out = Tensor::zeros(img.shape());
    for (std::size_t i = 0; i < n; ++i)
        out.data()[i] = static_cast<float>((img.data()[i] - mu) / denom);
    return out;
}

Tensor preprocess_image(const std::string& path, const PreprocConfig& cfg) {
    Tensor t = load_image(path);
    t = resize_bilinear(t, cfg.target_size);
    t = normalize01(t);
    return standardize(t, cfg.std_epsilon);
}

}  // namespace pocf
