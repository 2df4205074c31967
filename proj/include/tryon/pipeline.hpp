#pragma once

// End-to-end inference: clothing -> pose -> target parsing -> coarse try-on
// image -> facial and clothing refinement -> composite.

#include "tryon/checkpoint.hpp"
#include "tryon/training.hpp"

#include <optional>

namespace tryon {

struct PipelineCheckpoints {
    std::optional<StageCheckpoint> c2p;
    std::optional<StageCheckpoint> translator;
    std::optional<StageCheckpoint> coloring;
    std::optional<StageCheckpoint> facial;
    std::optional<StageCheckpoint> clothing;
};

struct PipelineResult {
    torch::Tensor pose;       // P, stride-8 heatmaps (or the override as given)
    torch::Tensor parsing;    // M_g, soft
    torch::Tensor generated;  // I_g
    torch::Tensor residual;   // d
    torch::Tensor refined;    // C_r
    torch::Tensor final;      // refined clothing composited over the face-corrected I_g
};

class Pipeline {
public:
    /// Throws ConfigError naming the first missing checkpoint. The c2p
    /// checkpoint may be absent when every call passes a pose override.
    explicit Pipeline(const PipelineCheckpoints& checkpoints, bool require_c2p = true);

    /// Inputs are unbatched ([3, H, W], [H, W], [20, H, W]) or carry a
    /// matching leading batch dimension; outputs follow the same convention.
    /// With `pose_override` Stage I is skipped and the override is returned
    /// unchanged as `pose`.
    PipelineResult run(const torch::Tensor& clothing, const torch::Tensor& clothing_mask,
                       const torch::Tensor& source, const torch::Tensor& source_parsing,
                       const std::optional<torch::Tensor>& pose_override = std::nullopt);

private:
    std::optional<StageNetworks> c2p_;
    StageNetworks translator_, coloring_, facial_, clothing_;
};

PipelineResult infer_pipeline(const PipelineCheckpoints& checkpoints, const torch::Tensor& clothing,
                              const torch::Tensor& clothing_mask, const torch::Tensor& source,
                              const torch::Tensor& source_parsing,
                              const std::optional<torch::Tensor>& pose_override = std::nullopt);

/// Checkpoints named c2p.ckpt, translator.ckpt, coloring.ckpt, facial.ckpt,
/// clothing.ckpt inside `dir`; missing files stay empty.
PipelineCheckpoints load_pipeline_checkpoints(const std::filesystem::path& dir);

}  // namespace tryon
