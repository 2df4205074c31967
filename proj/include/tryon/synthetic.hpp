#pragma once

// Procedural stand-in for a photographed try-on dataset: an articulated
// stick figure (capsule limbs, elliptical head) rendered in two poses with
// analytic parsing labels and keypoints, wearing a textured top whose flat
// rendering is the in-shop clothing image.

#include "tryon/triplet.hpp"

#include <cstdint>
#include <optional>

namespace tryon {

/// Deterministic in `seed`. Height and width must be multiples of 16 with
/// height >= 64; otherwise std::invalid_argument. When `style` is empty it
/// is drawn from the seed. The target pose is drawn around a canonical pose
/// of the garment's texture style, so clothing carries pose information.
Triplet generate_synthetic_triplet(uint64_t seed, int64_t height, int64_t width,
                                   std::optional<TextureStyle> style = std::nullopt);

/// Label groups a joint may legitimately land on after rendering.
bool joint_label_allowed(Joint joint, Label label);

}  // namespace tryon
