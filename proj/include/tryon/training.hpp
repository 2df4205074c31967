#pragma once

// Stage-wise training. Each stage trains its generator (and discriminator,
// where it has one) with Adam; generator and discriminator alternate one
// step each. Runs are deterministic in the config seed.

#include "tryon/checkpoint.hpp"
#include "tryon/cloth2pose.hpp"
#include "tryon/coloring.hpp"
#include "tryon/config.hpp"
#include "tryon/refinement.hpp"
#include "tryon/translator.hpp"
#include "tryon/triplet.hpp"

#include <optional>
#include <vector>

namespace tryon {

/// The trainable networks of one stage, built from a config.
struct StageNetworks {
    TrainConfig config;
    Cloth2Pose c2p{nullptr};
    TranslatorGenerator translator{nullptr};
    UNetGenerator unet{nullptr};  // coloring or facial generator
    ClothingRefiner refiner{nullptr};
    PairDiscriminator pair_discriminator{nullptr};
    ContextDiscriminator context_discriminator{nullptr};

    std::shared_ptr<torch::nn::Module> generator() const;
    std::shared_ptr<torch::nn::Module> discriminator() const;  // null for c2p
    void train(bool on);
};

/// Seeds torch's generator with config.seed, then builds the stage networks.
StageNetworks build_networks(const TrainConfig& config);

/// Parameters and buffers under "generator." / "discriminator." prefixes.
std::vector<NamedTensor> export_parameters(const StageNetworks& networks);
/// Throws CheckpointError when names or shapes disagree.
void import_parameters(StageNetworks& networks, const std::vector<NamedTensor>& parameters);

/// Config stored in a checkpoint.
TrainConfig checkpoint_config(const StageCheckpoint& checkpoint);
/// Networks rebuilt from a checkpoint's config and loaded with its parameters.
StageNetworks networks_from_checkpoint(const StageCheckpoint& checkpoint);

/// Keypoint target of a pose at stride 8: [18, H/8, W/8] float.
torch::Tensor pose_target(const KeypointSet& keypoints, int64_t height, int64_t width);

/// Coarse stand-in for a Stage-III output, used to train the refinement
/// stages when no coloring checkpoint is supplied: the target blurred by a
/// 2x box down/up-sampling.
torch::Tensor degrade_image(const torch::Tensor& images);

struct LossRecord {
    int64_t step = 0;
    double generator = 0;      // full generator objective
    double discriminator = 0;  // 0 for c2p
    double reconstruction = 0; // the stage's reconstruction component
};

struct TrainResult {
    StageCheckpoint checkpoint;
    std::vector<LossRecord> trace;
    // Reconstruction component evaluated over the whole training set before
    // the first and after the last step.
    double initial_reconstruction = 0;
    double final_reconstruction = 0;
};

/// Errors: ConfigError for invalid configs, a stage mismatch with `init`,
/// or a missing upstream checkpoint when teacher forcing is off;
/// std::invalid_argument for an empty dataset or mismatched triplet dims.
/// steps = 0 returns `init` unchanged (or the freshly initialised networks).
TrainResult train_stage(const TrainConfig& config, const std::vector<Triplet>& data,
                        const std::optional<StageCheckpoint>& init = std::nullopt);

}  // namespace tryon
