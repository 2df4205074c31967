#pragma once

// PNG encode/decode. Output is byte-reproducible: fixed zlib level, no
// time or text chunks.

#include <torch/torch.h>

#include <filesystem>
#include <stdexcept>

namespace tryon {

class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// [3, H, W] in [-1, 1] -> 8-bit RGB; v8 = round((x + 1) * 127.5).
void write_rgb_png(const std::filesystem::path& path, const torch::Tensor& image);
/// 8-bit RGB -> [3, H, W] float, x = 2 v / 255 - 1.
torch::Tensor read_rgb_png(const std::filesystem::path& path);

/// [H, W] mask in [0, 1] -> 8-bit gray (255 = 1).
void write_mask_png(const std::filesystem::path& path, const torch::Tensor& mask);
torch::Tensor read_mask_png(const std::filesystem::path& path);

/// [H, W] integer labels -> 8-bit palette PNG whose indices are the labels.
void write_label_png(const std::filesystem::path& path, const torch::Tensor& labels);
/// Raw 8-bit indices of a palette or grayscale PNG as an int64 [H, W] map.
torch::Tensor read_label_png(const std::filesystem::path& path);

/// 8-bit view of an image tensor, [H, W, 3] uint8.
torch::Tensor to_rgb8(const torch::Tensor& image);
/// Inverse of to_rgb8: uint8 [H, W, 3] -> float [3, H, W] in [-1, 1].
torch::Tensor from_rgb8(const torch::Tensor& rgb);

}  // namespace tryon
