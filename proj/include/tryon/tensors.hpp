#pragma once

// Shared data model for every pipeline stage: keypoint heatmaps, one-hot
// parsing tensors, masks and the compositing algebra built on them.
//
// Tensor shape conventions used throughout the library:
//   image    (..., 3, H, W)   values in [-1, 1]
//   parsing  (..., 20, H, W)
//   heatmap  (..., 18, H, W)  values in [0, 1]
//   mask     (..., H, W)      values in [0, 1]
// Leading batch dimensions are optional and broadcast consistently.

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <string_view>

namespace tryon {

inline constexpr int kNumJoints = 18;
inline constexpr int kNumParsingChannels = 20;
inline constexpr int kImageChannels = 3;

enum class Joint : int {
    Nose = 0,
    LeftEye,
    RightEye,
    LeftEar,
    RightEar,
    Neck,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
};

// Channels 14..19 are reserved and stay empty in synthetic data.
enum class Label : int {
    Background = 0,
    Hair = 1,
    Face = 2,
    Neck = 3,
    TopClothes = 4,
    LeftArm = 5,
    RightArm = 6,
    LeftHand = 7,
    RightHand = 8,
    Pants = 9,
    LeftLeg = 10,
    RightLeg = 11,
    LeftShoe = 12,
    RightShoe = 13,
};

inline constexpr int channel(Label l) { return static_cast<int>(l); }

std::string_view joint_name(Joint j);

struct Keypoint {
    int x = 0;  // column
    int y = 0;  // row
    bool visible = false;

    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

using KeypointSet = std::array<Keypoint, kNumJoints>;

enum class MaskGroup { Foreground, Face, Clothing };

/// Spread of the keypoint Gaussian for an image of the given size: 6 px at
/// 288x192, scaled by min(H, W) / 192.
double default_sigma(int64_t height, int64_t width);

/// Gaussian heatmap stack, one channel per joint:
///   value(p) = exp(-|p - x_k|^2 / sigma^2) for visible joints, 0 otherwise.
/// Coordinates must already be expressed in the height x width grid.
/// Returns a float64 tensor of shape [18, height, width].
torch::Tensor build_keypoint_tensor(const KeypointSet& keypoints, double sigma,
                                    int64_t height, int64_t width);

/// Per-channel argmax of an [18, H, W] heatmap stack. A joint is visible when
/// its channel maximum reaches `threshold`; ties resolve to the smallest
/// row-major index.
KeypointSet decode_keypoints(const torch::Tensor& heatmaps, double threshold);

/// Keypoints mapped onto a grid `stride` times coarser (floor division).
KeypointSet downscale_keypoints(const KeypointSet& keypoints, int stride);

/// One-hot encode an integer label map [H, W] into [n_channels, H, W] float32.
torch::Tensor one_hot_parsing(const torch::Tensor& labels,
                              int64_t n_channels = kNumParsingChannels);

/// Per-pixel argmax over the channel dimension (dim -3), as int64 labels.
torch::Tensor parsing_labels(const torch::Tensor& parsing);

/// Replace the top-clothes channel with `clothing_mask`. The result is not
/// re-normalised and can stop being one-hot.
torch::Tensor substitute_clothing_channel(const torch::Tensor& parsing,
                                          const torch::Tensor& clothing_mask);

torch::Tensor mask_image(const torch::Tensor& image, const torch::Tensor& mask);

/// foreground = 1 - background; face = max(hair, face, neck); clothing = top-clothes.
torch::Tensor select_channels(const torch::Tensor& parsing, MaskGroup group);

/// clothing * mask + image * (1 - mask)
torch::Tensor composite_refined(const torch::Tensor& refined_clothing,
                                const torch::Tensor& image,
                                const torch::Tensor& clothing_mask);

/// Source image with the top-clothes region zeroed.
torch::Tensor remove_clothing(const torch::Tensor& image, const torch::Tensor& parsing);

// Validation helpers shared by the stage modules. All throw std::invalid_argument.
void check_image(const torch::Tensor& image, std::string_view what);
void check_same_spatial(const torch::Tensor& a, const torch::Tensor& b, std::string_view what);
void check_same_shape(const torch::Tensor& a, const torch::Tensor& b, std::string_view what);

}  // namespace tryon
