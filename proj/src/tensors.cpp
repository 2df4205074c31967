#include "tryon/tensors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tryon {

namespace {

constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "nose",       "left_eye",    "right_eye",   "left_ear",   "right_ear",  "neck",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow", "left_wrist",
    "right_wrist", "left_hip",  "right_hip",   "left_knee",  "right_knee", "left_ankle",
    "right_ankle"};

std::string shape_str(const torch::Tensor& t) {
    std::ostringstream os;
    os << t.sizes();
    return os.str();
}

torch::Tensor as_channel_mask(const torch::Tensor& mask) { return mask.unsqueeze(-3); }

}  // namespace

std::string_view joint_name(Joint j) { return kJointNames.at(static_cast<size_t>(j)); }

double default_sigma(int64_t height, int64_t width) {
    return 6.0 * static_cast<double>(std::min(height, width)) / 192.0;
}

torch::Tensor build_keypoint_tensor(const KeypointSet& keypoints, double sigma,
                                    int64_t height, int64_t width) {
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("build_keypoint_tensor: sigma must be positive");
    }
    if (height <= 0 || width <= 0) {
        throw std::invalid_argument("build_keypoint_tensor: grid must be non-empty");
    }
    auto out = torch::zeros({kNumJoints, height, width}, torch::kDouble);
    auto acc = out.accessor<double, 3>();
    const double inv_s2 = 1.0 / (sigma * sigma);
    for (int k = 0; k < kNumJoints; ++k) {
        const Keypoint& kp = keypoints[k];
        if (!kp.visible) continue;
        if (kp.x < 0 || kp.x >= width || kp.y < 0 || kp.y >= height) {
            throw std::invalid_argument("build_keypoint_tensor: visible joint " +
                                        std::string(joint_name(static_cast<Joint>(k))) +
                                        " lies outside the grid");
        }
        for (int64_t y = 0; y < height; ++y) {
            const double dy = static_cast<double>(y - kp.y);
            for (int64_t x = 0; x < width; ++x) {
                const double dx = static_cast<double>(x - kp.x);
                acc[k][y][x] = std::exp(-(dx * dx + dy * dy) * inv_s2);
            }
        }
    }
    return out;
}

KeypointSet decode_keypoints(const torch::Tensor& heatmaps, double threshold) {
    if (heatmaps.dim() != 3 || heatmaps.size(0) != kNumJoints) {
        throw std::invalid_argument("decode_keypoints: expected [18, H, W], got " +
                                    shape_str(heatmaps));
    }
    auto h = heatmaps.detach().to(torch::kDouble).contiguous();
    const int64_t height = h.size(1);
    const int64_t width = h.size(2);
    auto acc = h.accessor<double, 3>();
    KeypointSet out{};
    for (int k = 0; k < kNumJoints; ++k) {
        double best = -std::numeric_limits<double>::infinity();
        int64_t best_y = 0, best_x = 0;
        for (int64_t y = 0; y < height; ++y) {
            for (int64_t x = 0; x < width; ++x) {
                // strict comparison keeps the first maximum in row-major order
                if (acc[k][y][x] > best) {
                    best = acc[k][y][x];
                    best_y = y;
                    best_x = x;
                }
            }
        }
        out[k] = Keypoint{static_cast<int>(best_x), static_cast<int>(best_y), best >= threshold};
    }
    return out;
}

KeypointSet downscale_keypoints(const KeypointSet& keypoints, int stride) {
    if (stride <= 0) throw std::invalid_argument("downscale_keypoints: stride must be positive");
    KeypointSet out = keypoints;
    for (auto& kp : out) {
        kp.x /= stride;
        kp.y /= stride;
    }
    return out;
}

torch::Tensor one_hot_parsing(const torch::Tensor& labels, int64_t n_channels) {
    if (labels.dim() != 2) {
        throw std::invalid_argument("one_hot_parsing: expected a [H, W] label map, got " +
                                    shape_str(labels));
    }
    auto l = labels.to(torch::kLong);
    if (l.numel() > 0) {
        const int64_t lo = l.min().item<int64_t>();
        const int64_t hi = l.max().item<int64_t>();
        if (lo < 0 || hi >= n_channels) {
            throw std::invalid_argument("one_hot_parsing: label " + std::to_string(lo < 0 ? lo : hi) +
                                        " outside [0, " + std::to_string(n_channels) + ")");
        }
    }
    return torch::one_hot(l, n_channels).permute({2, 0, 1}).to(torch::kFloat).contiguous();
}

torch::Tensor parsing_labels(const torch::Tensor& parsing) { return parsing.argmax(-3); }

torch::Tensor substitute_clothing_channel(const torch::Tensor& parsing,
                                          const torch::Tensor& clothing_mask) {
    if (parsing.dim() < 3 || parsing.size(-3) != kNumParsingChannels) {
        throw std::invalid_argument("substitute_clothing_channel: expected 20 channels, got " +
                                    shape_str(parsing));
    }
    check_same_spatial(parsing, clothing_mask, "substitute_clothing_channel");
    if (clothing_mask.dim() != parsing.dim() - 1) {
        throw std::invalid_argument("substitute_clothing_channel: mask rank mismatch");
    }
    auto out = parsing.clone();
    out.select(-3, channel(Label::TopClothes)).copy_(clothing_mask);
    return out;
}

torch::Tensor mask_image(const torch::Tensor& image, const torch::Tensor& mask) {
    check_same_spatial(image, mask, "mask_image");
    return image * as_channel_mask(mask);
}

torch::Tensor select_channels(const torch::Tensor& parsing, MaskGroup group) {
    switch (group) {
        case MaskGroup::Foreground:
            return 1.0 - parsing.select(-3, channel(Label::Background));
        case MaskGroup::Face:
            return torch::maximum(torch::maximum(parsing.select(-3, channel(Label::Hair)),
                                                 parsing.select(-3, channel(Label::Face))),
                                  parsing.select(-3, channel(Label::Neck)));
        case MaskGroup::Clothing:
            return parsing.select(-3, channel(Label::TopClothes));
    }
    throw std::invalid_argument("select_channels: unknown group");
}

torch::Tensor composite_refined(const torch::Tensor& refined_clothing, const torch::Tensor& image,
                                const torch::Tensor& clothing_mask) {
    check_same_shape(refined_clothing, image, "composite_refined");
    check_same_spatial(image, clothing_mask, "composite_refined");
    auto m = as_channel_mask(clothing_mask);
    return refined_clothing * m + image * (1.0 - m);
}

torch::Tensor remove_clothing(const torch::Tensor& image, const torch::Tensor& parsing) {
    check_same_spatial(image, parsing, "remove_clothing");
    return mask_image(image, 1.0 - select_channels(parsing, MaskGroup::Clothing));
}

void check_image(const torch::Tensor& image, std::string_view what) {
    if (image.dim() < 3 || image.size(-3) != kImageChannels) {
        throw std::invalid_argument(std::string(what) + ": expected a 3-channel image, got " +
                                    shape_str(image));
    }
    const int64_t h = image.size(-2), w = image.size(-1);
    if (h < 8 || w < 8 || h % 8 != 0 || w % 8 != 0) {
        throw std::invalid_argument(std::string(what) +
                                    ": image dims must be >= 8 and divisible by 8, got " +
                                    shape_str(image));
    }
}

void check_same_spatial(const torch::Tensor& a, const torch::Tensor& b, std::string_view what) {
    if (a.dim() < 2 || b.dim() < 2 || a.size(-1) != b.size(-1) || a.size(-2) != b.size(-2)) {
        throw std::invalid_argument(std::string(what) + ": spatial shape mismatch " + shape_str(a) +
                                    " vs " + shape_str(b));
    }
}

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b, std::string_view what) {
    if (a.sizes() != b.sizes()) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str(a) +
                                    " vs " + shape_str(b));
    }
}

}  // namespace tryon
