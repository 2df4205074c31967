#pragma once

// Stage II: pose-guided parsing translator. Maps
//   M_in = concat(source parsing with substituted clothing channel,
//                 target pose heatmaps at image resolution,
//                 in-shop clothing mask)
// to a soft 20-channel target parsing.

#include "tryon/layers.hpp"

#include <torch/torch.h>

namespace tryon {

inline constexpr int64_t kTranslatorInputChannels = 20 + 18 + 1;

struct TranslatorOptions {
    int width = 16;  // channels after the stem; doubled by each downsampling
    int res_blocks = 9;
    int disc_width = 16;
    double lambda_bce = 10.0;
};

class TranslatorGeneratorImpl : public torch::nn::Module {
public:
    explicit TranslatorGeneratorImpl(TranslatorOptions options = {});
    /// Pre-sigmoid scores, [B, 20, H, W].
    torch::Tensor logits(const torch::Tensor& m_in);
    /// Per-channel sigmoid of the logits.
    torch::Tensor forward(const torch::Tensor& m_in);

private:
    torch::nn::Sequential net_{nullptr};
};
TORCH_MODULE(TranslatorGenerator);

/// D_t over concat(M_in, parsing): 39 + 20 input channels.
PairDiscriminator make_translator_discriminator(const TranslatorOptions& options);

/// Assemble M_in. `pose` may be at stride-8 resolution; it is bilinearly
/// resized to the parsing resolution before concatenation.
torch::Tensor translator_input(const torch::Tensor& source_parsing, const torch::Tensor& pose,
                               const torch::Tensor& clothing_mask);

struct GanLosses {
    torch::Tensor generator;
    torch::Tensor discriminator;
};

/// generator = -log D(M_in, G(M_in));
/// discriminator = -log D(M_in, M_t) - log(1 - D(M_in, G(M_in))).
/// `generated` is G(M_in), passed in so callers reuse one forward pass.
GanLosses translator_gan_loss(PairDiscriminator& discriminator, const torch::Tensor& m_in,
                              const torch::Tensor& generated, const torch::Tensor& target);

/// Pixel-wise binary cross-entropy summed over channels and pixels.
torch::Tensor translator_bce_loss(const torch::Tensor& generated, const torch::Tensor& target);

torch::Tensor translator_objective(const torch::Tensor& gan_generator, const torch::Tensor& bce,
                                   double lambda_bce);

}  // namespace tryon
