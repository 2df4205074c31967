#include "tryon/coloring.hpp"

#include "tryon/losses.hpp"
#include "tryon/tensors.hpp"

#include <stdexcept>

namespace tryon {

namespace F = torch::nn::functional;

UNetGeneratorImpl::UNetGeneratorImpl(UNetOptions options) : options_(options) {
    if (options_.levels < 1) throw std::invalid_argument("UNet: need at least one level");
    const int64_t scale = int64_t{1} << options_.levels;
    if (options_.height % scale != 0 || options_.image_width % scale != 0) {
        throw std::invalid_argument("UNet: image dims must be divisible by 2^levels");
    }
    const int64_t w = options_.width;
    stem_ = register_module("stem", make_conv(options_.in_channels, w, 3));
    for (int k = 0; k < options_.levels; ++k) {
        const int64_t c = w * (k + 1);
        enc_blocks_.push_back(register_module("enc" + std::to_string(k), ResidualBlock(c)));
        downs_.push_back(register_module("down" + std::to_string(k), make_conv(c, c + w, 3, 2)));
    }
    const int64_t bottom = w * (options_.levels + 1);
    if (options_.fc_dim > 0) {
        const int64_t flat = bottom * (options_.height / scale) * (options_.image_width / scale);
        fc_in_ = register_module("fc_in", torch::nn::Linear(flat, options_.fc_dim));
        fc_out_ = register_module("fc_out", torch::nn::Linear(options_.fc_dim, flat));
    }
    for (int k = options_.levels - 1; k >= 0; --k) {
        const int64_t c = w * (k + 1);
        ups_.push_back(register_module("up" + std::to_string(k), make_conv(c + w + c, c, 3)));
        dec_blocks_.push_back(register_module("dec" + std::to_string(k), ResidualBlock(c)));
    }
    out_ = register_module("out", make_conv(w, options_.out_channels, 3));
    if (options_.zero_init_output) zero_parameters(*out_);
}

torch::Tensor UNetGeneratorImpl::forward(const torch::Tensor& x) {
    if (x.dim() != 4 || x.size(1) != options_.in_channels) {
        throw std::invalid_argument("UNet: expected [B, " + std::to_string(options_.in_channels) +
                                    ", H, W] input");
    }
    if (x.size(2) != options_.height || x.size(3) != options_.image_width) {
        throw std::invalid_argument("UNet: input dims differ from the configured image size");
    }
    auto h = torch::relu(stem_(x));
    std::vector<torch::Tensor> skips;
    for (int k = 0; k < options_.levels; ++k) {
        h = enc_blocks_[k](h);
        skips.push_back(h);
        h = torch::relu(downs_[k](h));
    }
    if (fc_in_) {
        auto flat = h.flatten(1);
        h = h + fc_out_(torch::relu(fc_in_(flat))).view(h.sizes());
    }
    for (int i = 0; i < options_.levels; ++i) {
        const auto& skip = skips[options_.levels - 1 - i];
        h = F::interpolate(h, F::InterpolateFuncOptions()
                                  .size(std::vector<int64_t>{skip.size(2), skip.size(3)})
                                  .mode(torch::kNearest));
        h = torch::relu(ups_[i](torch::cat({h, skip}, 1)));
        h = dec_blocks_[i](h);
    }
    return torch::tanh(out_(h));
}

UNetGenerator make_coloring_generator(const ColoringOptions& options, int64_t height,
                                      int64_t width) {
    UNetOptions u;
    u.in_channels = kColoringInputChannels;
    u.out_channels = kImageChannels;
    u.width = options.width;
    u.levels = 3;
    u.fc_dim = options.fc_dim;
    u.height = height;
    u.image_width = width;
    return UNetGenerator(u);
}

PairDiscriminator make_coloring_discriminator(const ColoringOptions& options) {
    return PairDiscriminator(2 * kImageChannels, options.disc_width);
}

torch::Tensor coloring_forward(UNetGenerator& generator, const torch::Tensor& clothing,
                               const torch::Tensor& source_without_clothes,
                               const torch::Tensor& parsing) {
    check_same_shape(clothing, source_without_clothes, "coloring_forward");
    check_same_spatial(clothing, parsing, "coloring_forward");
    if (parsing.dim() != 4 || parsing.size(1) != kNumParsingChannels) {
        throw std::invalid_argument("coloring_forward: expected parsing [B, 20, H, W]");
    }
    return generator(torch::cat({clothing, source_without_clothes, parsing.to(clothing.dtype())}, 1));
}

torch::Tensor coloring_l1_loss(const torch::Tensor& generated, const torch::Tensor& generated_fg,
                               const torch::Tensor& target, const torch::Tensor& target_fg) {
    check_same_shape(generated, target, "coloring_l1_loss");
    return l1_sum(mask_image(generated, generated_fg), mask_image(target, target_fg));
}

ColoringGanLosses coloring_gan_losses(PairDiscriminator& discriminator,
                                      const torch::Tensor& generated, const torch::Tensor& target,
                                      const torch::Tensor& source) {
    auto fake_for_g = discriminator(generated, source);
    auto fake_for_d = discriminator(generated.detach(), source);
    auto real = discriminator(target, source);
    return {bce_against(fake_for_g, 1.0), bce_against(fake_for_d, 0.0) + bce_against(real, 1.0)};
}

torch::Tensor coloring_objective(const torch::Tensor& gan_generator, const torch::Tensor& l1,
                                 double lambda_l1) {
    return gan_generator + lambda_l1 * l1;
}

}  // namespace tryon
