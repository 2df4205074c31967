#include "tryon/image_io.hpp"

#include <png.h>

#include <array>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

namespace tryon {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw ImageIoError("cannot open " + path.string());
    return f;
}

// Fixed palette for label maps; index i renders as colour i.
std::array<png_color, 256> label_palette() {
    std::array<png_color, 256> pal{};
    const std::array<std::array<uint8_t, 3>, 20> base = {{
        {0, 0, 0},       {128, 0, 0},   {254, 0, 0},   {0, 85, 0},     {170, 0, 51},
        {254, 85, 0},    {0, 0, 85},    {0, 119, 221}, {85, 85, 0},    {0, 85, 85},
        {85, 51, 0},     {52, 86, 128}, {0, 128, 0},   {0, 0, 254},    {51, 170, 221},
        {0, 254, 254},   {85, 254, 170}, {170, 254, 85}, {254, 254, 0}, {254, 170, 0},
    }};
    for (size_t i = 0; i < pal.size(); ++i) {
        const auto& c = base[i % base.size()];
        pal[i] = png_color{c[0], c[1], c[2]};
    }
    return pal;
}

enum class PngKind { Rgb, Gray, Palette };

void write_png(const std::filesystem::path& path, int width, int height, PngKind kind,
               const std::vector<uint8_t>& pixels) {
    auto file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageIoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ImageIoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageIoError("failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_compression_level(png, 6);
    const int color = kind == PngKind::Rgb    ? PNG_COLOR_TYPE_RGB
                      : kind == PngKind::Gray ? PNG_COLOR_TYPE_GRAY
                                              : PNG_COLOR_TYPE_PALETTE;
    png_set_IHDR(png, info, width, height, 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    auto palette = label_palette();
    if (kind == PngKind::Palette) png_set_PLTE(png, info, palette.data(), 256);
    png_write_info(png, info);
    const int channels = kind == PngKind::Rgb ? 3 : 1;
    for (int y = 0; y < height; ++y) {
        png_write_row(png, pixels.data() + static_cast<size_t>(y) * width * channels);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

struct DecodedPng {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<uint8_t> pixels;
};

// expand_to_rgb: palette/gray inputs are converted to RGB; otherwise raw
// single-channel values (palette indices) are returned.
DecodedPng read_png(const std::filesystem::path& path, bool expand_to_rgb) {
    auto file = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageIoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ImageIoError("png_create_info_struct failed");
    }
    DecodedPng out;
    std::vector<png_bytep> rows;  // declared before setjmp so longjmp skips no destructors
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("failed reading " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (expand_to_rgb) {
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
            png_set_gray_to_rgb(png);
        }
    } else if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError(path.string() + ": expected a single-channel PNG");
    }
    if (depth < 8) png_set_packing(png);
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    const size_t stride = png_get_rowbytes(png, info);
    out.pixels.resize(stride * out.height);
    rows.resize(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.pixels.data() + stride * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

}  // namespace

torch::Tensor to_rgb8(const torch::Tensor& image) {
    if (image.dim() != 3 || image.size(0) != 3) {
        throw std::invalid_argument("to_rgb8: expected [3, H, W]");
    }
    auto x = image.detach().to(torch::kDouble).clamp(-1.0, 1.0);
    return torch::round((x + 1.0) * 127.5).to(torch::kUInt8).permute({1, 2, 0}).contiguous();
}

torch::Tensor from_rgb8(const torch::Tensor& rgb) {
    if (rgb.dim() != 3 || rgb.size(2) != 3 || rgb.scalar_type() != torch::kUInt8) {
        throw std::invalid_argument("from_rgb8: expected uint8 [H, W, 3]");
    }
    return (rgb.permute({2, 0, 1}).to(torch::kFloat) * (2.0f / 255.0f) - 1.0f).contiguous();
}

void write_rgb_png(const std::filesystem::path& path, const torch::Tensor& image) {
    auto rgb = to_rgb8(image);
    std::vector<uint8_t> px(rgb.data_ptr<uint8_t>(), rgb.data_ptr<uint8_t>() + rgb.numel());
    write_png(path, static_cast<int>(rgb.size(1)), static_cast<int>(rgb.size(0)), PngKind::Rgb, px);
}

torch::Tensor read_rgb_png(const std::filesystem::path& path) {
    auto d = read_png(path, true);
    return from_rgb8(torch::from_blob(d.pixels.data(), {d.height, d.width, 3}, torch::kUInt8));
}

void write_mask_png(const std::filesystem::path& path, const torch::Tensor& mask) {
    if (mask.dim() != 2) throw std::invalid_argument("write_mask_png: expected [H, W]");
    auto m = torch::round(mask.detach().to(torch::kDouble).clamp(0.0, 1.0) * 255.0)
                 .to(torch::kUInt8)
                 .contiguous();
    std::vector<uint8_t> px(m.data_ptr<uint8_t>(), m.data_ptr<uint8_t>() + m.numel());
    write_png(path, static_cast<int>(m.size(1)), static_cast<int>(m.size(0)), PngKind::Gray, px);
}

torch::Tensor read_mask_png(const std::filesystem::path& path) {
    auto d = read_png(path, false);
    auto t = torch::from_blob(d.pixels.data(), {d.height, d.width}, torch::kUInt8).clone();
    return t.to(torch::kFloat) / 255.0;
}

void write_label_png(const std::filesystem::path& path, const torch::Tensor& labels) {
    if (labels.dim() != 2) throw std::invalid_argument("write_label_png: expected [H, W]");
    auto l = labels.detach().to(torch::kLong);
    if (l.numel() > 0 && (l.min().item<int64_t>() < 0 || l.max().item<int64_t>() > 255)) {
        throw std::invalid_argument("write_label_png: labels must fit in 8 bits");
    }
    auto u = l.to(torch::kUInt8).contiguous();
    std::vector<uint8_t> px(u.data_ptr<uint8_t>(), u.data_ptr<uint8_t>() + u.numel());
    write_png(path, static_cast<int>(u.size(1)), static_cast<int>(u.size(0)), PngKind::Palette, px);
}

torch::Tensor read_label_png(const std::filesystem::path& path) {
    auto d = read_png(path, false);
    return torch::from_blob(d.pixels.data(), {d.height, d.width}, torch::kUInt8)
        .to(torch::kLong)
        .clone();
}

}  // namespace tryon
