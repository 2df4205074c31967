#pragma once

// Nearest-neighbour pose retrieval in clothing-feature space.

#include "tryon/cloth2pose.hpp"

#include <torch/torch.h>

#include <vector>

namespace tryon {

struct RetrievalEntry {
    torch::Tensor features;  // any shape; compared flattened
    int64_t pose_id = 0;
};

struct RetrievalHit {
    size_t index = 0;  // position in the database
    int64_t pose_id = 0;
    double distance = 0;  // L2
};

/// Top-k database entries by ascending L2 distance to `query`, ties in
/// database order. k larger than the database returns it all. Throws
/// std::invalid_argument for k <= 0 or a feature size mismatch.
std::vector<RetrievalHit> retrieve_poses(const torch::Tensor& query, const std::vector<RetrievalEntry>& database,
                                         int64_t k);

/// Clothing features from the c2p trunk, flattened per image.
torch::Tensor clothing_features(Cloth2Pose& model, const torch::Tensor& clothing);

}  // namespace tryon
