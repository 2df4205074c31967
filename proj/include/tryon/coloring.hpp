#pragma once

// Stage III: segmentation region coloring. Renders the person's appearance
// and the garment texture into the generated parsing.

#include "tryon/layers.hpp"

#include <torch/torch.h>

#include <vector>

namespace tryon {

inline constexpr int64_t kColoringInputChannels = 3 + 3 + 20;

struct UNetOptions {
    int64_t in_channels = kColoringInputChannels;
    int64_t out_channels = 3;
    int64_t width = 16;     // level-k blocks carry width * k channels
    int levels = 3;         // encoder blocks with downsampling (decoder mirrors them)
    int64_t fc_dim = 256;   // 0 disables the fully connected bottleneck
    int64_t height = 96;    // needed to size the fully connected layer
    int64_t image_width = 64;
    bool zero_init_output = false;
};

/// Encoder/decoder with residual blocks and highway (skip) connections.
/// Encoder level k: residual block, then a two-stride 3x3 downsampling conv.
/// Decoder level k: nearest x2 upsample, 3x3 conv over concat(upsampled,
/// encoder skip), residual block. Output passes through tanh.
class UNetGeneratorImpl : public torch::nn::Module {
public:
    explicit UNetGeneratorImpl(UNetOptions options);
    torch::Tensor forward(const torch::Tensor& x);
    const UNetOptions& options() const { return options_; }

private:
    UNetOptions options_;
    torch::nn::Conv2d stem_{nullptr};
    std::vector<ResidualBlock> enc_blocks_;
    std::vector<torch::nn::Conv2d> downs_;
    torch::nn::Linear fc_in_{nullptr}, fc_out_{nullptr};
    std::vector<torch::nn::Conv2d> ups_;
    std::vector<ResidualBlock> dec_blocks_;
    torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(UNetGenerator);

struct ColoringOptions {
    int64_t width = 16;
    int64_t fc_dim = 256;
    int64_t disc_width = 16;
    double lambda_l1 = 10.0;
};

UNetGenerator make_coloring_generator(const ColoringOptions& options, int64_t height,
                                      int64_t width);

/// D_c over the 6-channel pair (candidate image, source image).
PairDiscriminator make_coloring_discriminator(const ColoringOptions& options);

/// I_g = G_c(C_t, I'_s, M_g). Throws std::invalid_argument on size mismatch.
torch::Tensor coloring_forward(UNetGenerator& generator, const torch::Tensor& clothing,
                               const torch::Tensor& source_without_clothes,
                               const torch::Tensor& parsing);

/// sum |I_g * fg_g - I_t * fg_t| over pixels and channels.
torch::Tensor coloring_l1_loss(const torch::Tensor& generated, const torch::Tensor& generated_fg,
                               const torch::Tensor& target, const torch::Tensor& target_fg);

struct ColoringGanLosses {
    torch::Tensor generator;
    torch::Tensor discriminator;
};

/// generator = BCE(D(I_g, I_s), 1); discriminator = BCE(D(I_g, I_s), 0) + BCE(D(I_t, I_s), 1).
ColoringGanLosses coloring_gan_losses(PairDiscriminator& discriminator,
                                      const torch::Tensor& generated, const torch::Tensor& target,
                                      const torch::Tensor& source);

torch::Tensor coloring_objective(const torch::Tensor& gan_generator, const torch::Tensor& l1,
                                 double lambda_l1);

}  // namespace tryon
