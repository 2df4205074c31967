#pragma once

// Stage I: regress a try-on pose (stride-8 keypoint heatmaps) directly from
// an in-shop clothing image.

#include <torch/torch.h>

#include <filesystem>
#include <vector>

namespace tryon {

inline constexpr int kFeatureStride = 8;

struct Cloth2PoseOptions {
    int blocks = 4;             // number of refinement blocks
    int block_width = 128;      // internal channels of every refinement block
    int trunk_base_width = 64;  // VGG's 64; the desk presets shrink it
    double lambda_sparsity = 0.00008;
};

/// VGG-19 convolution trunk cut after its first ten convolutions
/// (conv1_1 .. conv4_2, three max pools, stride 8).
class VggTrunkImpl : public torch::nn::Module {
public:
    explicit VggTrunkImpl(int base_width);
    torch::Tensor forward(const torch::Tensor& image);
    int64_t out_channels() const { return out_channels_; }

private:
    torch::nn::Sequential layers_{nullptr};
    int64_t out_channels_ = 0;
};
TORCH_MODULE(VggTrunk);

/// Five 7x7 and two 1x1 convolutions. ReLU follows every layer but the last,
/// which emits the 18 heatmap channels.
class RefinementBlockImpl : public torch::nn::Module {
public:
    RefinementBlockImpl(int64_t in_channels, int64_t width, int64_t out_channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Sequential layers_{nullptr};
};
TORCH_MODULE(RefinementBlock);

class Cloth2PoseImpl : public torch::nn::Module {
public:
    explicit Cloth2PoseImpl(Cloth2PoseOptions options = {});

    /// Clothing feature map F, [B, C_f, H/8, W/8]. Throws std::invalid_argument
    /// when H or W is not a multiple of 8.
    torch::Tensor extract(const torch::Tensor& clothing);

    /// P^1 .. P^N from the feature map; block 1 sees F only, later blocks see
    /// concat(F, P^{i-1}).
    std::vector<torch::Tensor> predict(const torch::Tensor& features);

    std::vector<torch::Tensor> forward(const torch::Tensor& clothing);

    /// Load trunk weights from a file written with torch::save of the trunk.
    void load_trunk(const std::filesystem::path& path);

    const Cloth2PoseOptions& options() const { return options_; }
    VggTrunk trunk() const { return trunk_; }

private:
    Cloth2PoseOptions options_;
    VggTrunk trunk_{nullptr};
    std::vector<RefinementBlock> blocks_;
};
TORCH_MODULE(Cloth2Pose);

/// sum_i |P^i - P|^2 + lambda |P^N|_1, sums over all elements (batch-averaged).
torch::Tensor c2p_loss(const std::vector<torch::Tensor>& predictions, const torch::Tensor& target,
                       double lambda_sparsity);

}  // namespace tryon
