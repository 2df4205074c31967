#include "tryon/translator.hpp"

#include "tryon/losses.hpp"
#include "tryon/tensors.hpp"

#include <stdexcept>

namespace tryon {

namespace F = torch::nn::functional;

namespace {

torch::nn::InstanceNorm2d instance_norm(int64_t c) {
    return torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(c).affine(true));
}

}  // namespace

TranslatorGeneratorImpl::TranslatorGeneratorImpl(TranslatorOptions options) {
    const int64_t w = options.width;
    net_ = torch::nn::Sequential();
    net_->push_back(make_conv(kTranslatorInputChannels, w, 7));
    net_->push_back(instance_norm(w));
    net_->push_back(torch::nn::ReLU());
    // two downsampling layers
    net_->push_back(make_conv(w, 2 * w, 3, 2));
    net_->push_back(instance_norm(2 * w));
    net_->push_back(torch::nn::ReLU());
    net_->push_back(make_conv(2 * w, 4 * w, 3, 2));
    net_->push_back(instance_norm(4 * w));
    net_->push_back(torch::nn::ReLU());
    for (int i = 0; i < options.res_blocks; ++i) net_->push_back(HighwayBlock(4 * w));
    // two upsampling layers (nearest x2 then 3x3 conv)
    for (int64_t c : {4 * w, 2 * w}) {
        net_->push_back(torch::nn::Upsample(
            torch::nn::UpsampleOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest)));
        net_->push_back(make_conv(c, c / 2, 3));
        net_->push_back(instance_norm(c / 2));
        net_->push_back(torch::nn::ReLU());
    }
    net_->push_back(make_conv(w, kNumParsingChannels, 7));
    register_module("net", net_);
}

torch::Tensor TranslatorGeneratorImpl::logits(const torch::Tensor& m_in) {
    if (m_in.dim() != 4 || m_in.size(1) != kTranslatorInputChannels) {
        throw std::invalid_argument("translator: expected [B, 39, H, W] input");
    }
    if (m_in.size(2) % 4 != 0 || m_in.size(3) % 4 != 0) {
        throw std::invalid_argument("translator: spatial dims must be divisible by 4");
    }
    return net_->forward(m_in);
}

torch::Tensor TranslatorGeneratorImpl::forward(const torch::Tensor& m_in) {
    return torch::sigmoid(logits(m_in));
}

PairDiscriminator make_translator_discriminator(const TranslatorOptions& options) {
    return PairDiscriminator(kTranslatorInputChannels + kNumParsingChannels, options.disc_width);
}

torch::Tensor translator_input(const torch::Tensor& source_parsing, const torch::Tensor& pose,
                               const torch::Tensor& clothing_mask) {
    if (source_parsing.dim() != 4 || source_parsing.size(1) != kNumParsingChannels) {
        throw std::invalid_argument("translator_input: expected parsing [B, 20, H, W]");
    }
    if (pose.dim() != 4 || pose.size(1) != kNumJoints) {
        throw std::invalid_argument("translator_input: expected pose [B, 18, h, w]");
    }
    auto p = pose;
    if (pose.size(2) != source_parsing.size(2) || pose.size(3) != source_parsing.size(3)) {
        p = F::interpolate(pose, F::InterpolateFuncOptions()
                                     .size(std::vector<int64_t>{source_parsing.size(2),
                                                                source_parsing.size(3)})
                                     .mode(torch::kBilinear)
                                     .align_corners(false));
    }
    auto substituted = substitute_clothing_channel(source_parsing, clothing_mask);
    return torch::cat({substituted, p.to(source_parsing.dtype()), clothing_mask.unsqueeze(1)}, 1);
}

GanLosses translator_gan_loss(PairDiscriminator& discriminator, const torch::Tensor& m_in,
                              const torch::Tensor& generated, const torch::Tensor& target) {
    auto fake_for_g = discriminator(generated, m_in);
    auto fake_for_d = discriminator(generated.detach(), m_in);
    auto real = discriminator(target, m_in);
    return {bce_against(fake_for_g, 1.0), bce_against(real, 1.0) + bce_against(fake_for_d, 0.0)};
}

torch::Tensor translator_bce_loss(const torch::Tensor& generated, const torch::Tensor& target) {
    return pixel_bce_sum(generated, target);
}

torch::Tensor translator_objective(const torch::Tensor& gan_generator, const torch::Tensor& bce,
                                   double lambda_bce) {
    return gan_generator + lambda_bce * bce;
}

}  // namespace tryon
