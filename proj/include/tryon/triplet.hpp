#pragma once

#include "tryon/tensors.hpp"

#include <torch/torch.h>

#include <string>

namespace tryon {

enum class TextureStyle : int { Solid = 0, Stripes = 1, Plaid = 2, Logo = 3 };
inline constexpr int kNumTextureStyles = 4;

struct PersonRecord {
    torch::Tensor image;    // [3, H, W] float in [-1, 1]
    KeypointSet keypoints;
    torch::Tensor parsing;  // [H, W] int64 labels
};

/// One garment and the same figure wearing it in two poses.
struct Triplet {
    std::string id;
    torch::Tensor clothing;       // C_t, [3, H, W]
    torch::Tensor clothing_mask;  // M_c, [H, W] in {0, 1}
    PersonRecord source;
    PersonRecord target;
    // Texture class of the garment; -1 when unknown (e.g. loaded from disk
    // without metadata).
    int style = -1;
};

}  // namespace tryon
