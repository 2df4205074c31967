#pragma once

// Loss primitives. Every tensor passed here carries a leading batch
// dimension; reconstruction terms are plain sums over all non-batch
// elements (no pixel averaging), then averaged over the batch.

#include <torch/torch.h>

namespace tryon {

/// Every log argument is clamped to [kLogClamp, 1 - kLogClamp].
inline constexpr double kLogClamp = 1e-7;

/// Sum over non-batch dims, mean over the batch.
torch::Tensor batch_sum(const torch::Tensor& t);

/// batch_sum(|a - b|)
torch::Tensor l1_sum(const torch::Tensor& a, const torch::Tensor& b);

/// batch_sum((a - b)^2)
torch::Tensor squared_l2_sum(const torch::Tensor& a, const torch::Tensor& b);

/// Binary cross-entropy of discriminator probabilities [B, 1] against a
/// constant target (0 or 1), averaged over the batch.
torch::Tensor bce_against(const torch::Tensor& probability, double target);

/// -batch_sum(t log p + (1 - t) log(1 - p)) with clamped logs.
torch::Tensor pixel_bce_sum(const torch::Tensor& probability, const torch::Tensor& target);

}  // namespace tryon
