#pragma once

// Building blocks shared by the stage networks.

#include <torch/torch.h>

#include <vector>

namespace tryon {

/// Same-padded conv with He-normal (fan-in, ReLU gain) weights and zero bias.
torch::nn::Conv2d make_conv(int64_t in, int64_t out, int64_t kernel, int64_t stride = 1);

/// x + conv(relu(conv(x))) followed by ReLU; channel count preserved.
class ResidualBlockImpl : public torch::nn::Module {
public:
    explicit ResidualBlockImpl(int64_t channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Two 3x3 convolutions whose output is concatenated with the block input
/// and fused back to `channels` by a 1x1 convolution.
class HighwayBlockImpl : public torch::nn::Module {
public:
    explicit HighwayBlockImpl(int64_t channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, fuse_{nullptr};
    torch::nn::InstanceNorm2d norm1_{nullptr}, norm2_{nullptr};
};
TORCH_MODULE(HighwayBlock);

/// Conditional real/fake classifier over a channel-concatenated pair:
/// four two-stride 5x5 convolutions, global average, one sigmoid unit.
class PairDiscriminatorImpl : public torch::nn::Module {
public:
    PairDiscriminatorImpl(int64_t in_channels, int64_t width);
    torch::Tensor logits(const torch::Tensor& candidate, const torch::Tensor& condition);
    /// Probability in (0, 1), shape [B, 1].
    torch::Tensor forward(const torch::Tensor& candidate, const torch::Tensor& condition);

private:
    torch::nn::Sequential body_{nullptr};
    torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(PairDiscriminator);

/// Zero every parameter of a module (weights and biases).
void zero_parameters(torch::nn::Module& module);

/// Flattened copy of all parameters, for equality checks and fingerprints.
torch::Tensor flat_parameters(const torch::nn::Module& module);

}  // namespace tryon
