#include "tryon/refinement.hpp"

#include "tryon/losses.hpp"
#include "tryon/tensors.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <random>

namespace tryon {

namespace F = torch::nn::functional;

namespace {

torch::nn::InstanceNorm2d instance_norm(int64_t c) {
    return torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(c).affine(true));
}

torch::nn::LeakyReLU leaky() {
    return torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2));
}

torch::nn::Conv2d down_conv(int64_t in, int64_t out) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 4).stride(2).padding(1));
}

torch::nn::Sequential down_unit(int64_t in, int64_t out) {
    return torch::nn::Sequential(down_conv(in, out), instance_norm(out), leaky());
}

torch::nn::Sequential flat_unit(int64_t in, int64_t out) {
    return torch::nn::Sequential(make_conv(in, out, 3), instance_norm(out), leaky());
}

void push_down_unit(torch::nn::Sequential& seq, int64_t in, int64_t out) {
    seq->push_back(down_conv(in, out));
    seq->push_back(instance_norm(out));
    seq->push_back(leaky());
}

void push_flat_unit(torch::nn::Sequential& seq, int64_t in, int64_t out) {
    seq->push_back(make_conv(in, out, 3));
    seq->push_back(instance_norm(out));
    seq->push_back(leaky());
}

torch::Tensor resize(const torch::Tensor& x, int64_t h, int64_t w) {
    return F::interpolate(x, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{h, w})
                                 .mode(torch::kBilinear)
                                 .align_corners(false));
}

}  // namespace

// ---------------------------------------------------------------- FacialGAN

UNetGenerator make_facial_generator(const FacialOptions& options, int64_t height, int64_t width) {
    UNetOptions u;
    u.in_channels = 2 * kImageChannels;
    u.out_channels = kImageChannels;
    u.width = options.width;
    u.levels = 4;
    u.fc_dim = 0;
    u.height = height;
    u.image_width = width;
    u.zero_init_output = true;
    return UNetGenerator(u);
}

PairDiscriminator make_facial_discriminator(const FacialOptions& options) {
    return PairDiscriminator(2 * kImageChannels, options.disc_width);
}

torch::Tensor facial_forward(UNetGenerator& generator, const torch::Tensor& face_generated,
                             const torch::Tensor& face_source) {
    check_same_shape(face_generated, face_source, "facial_forward");
    return generator(torch::cat({face_generated, face_source}, 1));
}

torch::Tensor apply_facial_residual(const torch::Tensor& residual, const torch::Tensor& generated,
                                    const torch::Tensor& face_mask) {
    check_same_shape(residual, generated, "apply_facial_residual");
    return generated + mask_image(residual, face_mask);
}

// -------------------------------------------------------- perceptual metric

PerceptualExtractor PerceptualExtractor::vgg19(int base_width, uint64_t seed, double tap_weight) {
    const std::vector<std::pair<int, int>> plan = {{2, 1}, {2, 2}, {4, 4}, {4, 8}, {4, 8}};
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    std::vector<torch::nn::Sequential> stages;
    int64_t c = kImageChannels;
    for (size_t s = 0; s < plan.size(); ++s) {
        torch::nn::Sequential stage;
        if (s > 0) {
            stage->push_back(torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(2).ceil_mode(true)));
        }
        const int64_t out = static_cast<int64_t>(base_width) * plan[s].second;
        for (int i = 0; i < plan[s].first; ++i) {
            auto conv = make_conv(c, out, 3);
            {
                torch::NoGradGuard no_grad;
                const double std = std::sqrt(2.0 / static_cast<double>(c * 9));
                conv->weight.normal_(0.0, std, gen);
                conv->bias.zero_();
            }
            stage->push_back(conv);
            stage->push_back(torch::nn::ReLU());
            c = out;
        }
        stages.push_back(stage);
    }
    return PerceptualExtractor(std::move(stages), std::vector<double>(plan.size(), tap_weight));
}

PerceptualExtractor::PerceptualExtractor(std::vector<torch::nn::Sequential> stages,
                                         std::vector<double> weights)
    : stages_(std::move(stages)), weights_(std::move(weights)) {
    if (stages_.empty() || stages_.size() != weights_.size()) {
        throw std::invalid_argument("PerceptualExtractor: need one weight per stage");
    }
    for (auto& s : stages_) {
        s->eval();
        for (auto& p : s->parameters()) p.set_requires_grad(false);
    }
}

std::vector<torch::Tensor> PerceptualExtractor::features(const torch::Tensor& image) const {
    std::vector<torch::Tensor> taps;
    auto h = image;
    for (torch::nn::Sequential s : stages_) {
        h = s->forward(h);
        taps.push_back(h);
    }
    return taps;
}

void PerceptualExtractor::to(torch::Dtype dtype) {
    for (auto& s : stages_) s->to(dtype);
}

void PerceptualExtractor::load(const std::filesystem::path& path) {
    torch::serialize::InputArchive archive;
    archive.load_from(path.string());
    for (size_t i = 0; i < stages_.size(); ++i) {
        torch::serialize::InputArchive sub;
        archive.read("stage" + std::to_string(i), sub);
        stages_[i]->load(sub);
        for (auto& p : stages_[i]->parameters()) p.set_requires_grad(false);
    }
}

torch::Tensor perceptual_loss(const torch::Tensor& a, const torch::Tensor& b,
                              const PerceptualExtractor& extractor) {
    check_same_shape(a, b, "perceptual_loss");
    auto fa = extractor.features(a);
    auto fb = extractor.features(b);
    auto loss = torch::zeros({}, a.options());
    for (size_t i = 0; i < fa.size(); ++i) {
        loss = loss + extractor.weights()[i] * l1_sum(fa[i], fb[i]);
    }
    return loss;
}

FacialTerms facial_objective(const torch::Tensor& residual, const torch::Tensor& generated,
                             const torch::Tensor& target, const torch::Tensor& source,
                             const FacialMasks& masks, const std::array<double, 4>& lambdas,
                             PairDiscriminator& discriminator,
                             const PerceptualExtractor& extractor) {
    auto refined = apply_facial_residual(residual, generated, masks.face_generated);
    auto face_refined = mask_image(refined, masks.face_generated);
    auto face_target = mask_image(target, masks.face_generated);
    auto face_source = mask_image(source, masks.face_source);

    FacialTerms t;
    t.gan = bce_against(discriminator(face_refined, face_source), 1.0);
    t.discriminator = bce_against(discriminator(face_refined.detach(), face_source), 0.0) +
                      bce_against(discriminator(face_target, face_source), 1.0);
    t.perceptual = perceptual_loss(face_refined, face_target, extractor);
    t.face_l1 = l1_sum(face_refined, face_target);
    t.fg_l1 = l1_sum(mask_image(refined, masks.fg_generated), mask_image(target, masks.fg_target));
    t.total = lambdas[0] * t.gan + lambdas[1] * t.perceptual + lambdas[2] * t.face_l1 +
              lambdas[3] * t.fg_l1;
    return t;
}

// ------------------------------------------------------------- ClothingGAN

ClothingRefinerImpl::ClothingRefinerImpl(ClothingOptions options) : options_(options) {
    set_gamma(options_.gamma);
    const int64_t w = options_.width;
    const std::array<int64_t, 4> widths = {w, 2 * w, 4 * w, 8 * w};

    detail_ = torch::nn::Sequential();
    int64_t c = kImageChannels;
    for (int64_t out : widths) {
        push_down_unit(detail_, c, out);
        c = out;
    }
    for (int i = 0; i < 3; ++i) push_flat_unit(detail_, c, c);
    register_module("detail_encoder", detail_);

    c = kImageChannels;
    for (size_t i = 0; i < widths.size(); ++i) {
        warped_stages_.push_back(
            register_module("warped_down" + std::to_string(i), down_unit(c, widths[i])));
        c = widths[i];
    }
    warped_tail_ = register_module("warped_tail", flat_unit(c, c));

    const int64_t code_channels = options_.fusion == ClothingFusion::Concat ? 2 * c : c;
    fuse_ = register_module("fuse", torch::nn::Sequential(make_conv(code_channels, c, 3),
                                                          instance_norm(c), torch::nn::ReLU()));
    // highway from E_W stage (1/16, 1/8, 1/4, 1/2), then bicubic x2, 3x3 conv, IN, ReLU
    const std::array<int64_t, 4> outs = {4 * w, 2 * w, w, w};
    int64_t h = c;
    for (size_t i = 0; i < outs.size(); ++i) {
        const int64_t skip = widths[widths.size() - 1 - i];
        up_stages_.push_back(register_module(
            "up" + std::to_string(i),
            torch::nn::Sequential(
                torch::nn::Upsample(torch::nn::UpsampleOptions()
                                        .scale_factor(std::vector<double>{2.0, 2.0})
                                        .mode(torch::kBicubic)
                                        .align_corners(false)),
                make_conv(h + skip, outs[i], 3), instance_norm(outs[i]), torch::nn::ReLU())));
        h = outs[i];
    }
    out_ = register_module("out", make_conv(h, kImageChannels, 3));
    if (options_.zero_init_output) zero_parameters(*out_);
}

void ClothingRefinerImpl::set_gamma(double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw std::invalid_argument("ClothingRefiner: gamma must lie in [0, 1]");
    }
    options_.gamma = gamma;
}

torch::Tensor ClothingRefinerImpl::encode_detail(const torch::Tensor& clothing) {
    return detail_->forward(clothing);
}

WarpedFeatures ClothingRefinerImpl::encode_warped(const torch::Tensor& warped) {
    WarpedFeatures f;
    auto h = warped;
    for (auto& stage : warped_stages_) {
        h = stage->forward(h);
        f.stages.push_back(h);
    }
    f.code = warped_tail_->forward(h);
    return f;
}

torch::Tensor ClothingRefinerImpl::decode(const torch::Tensor& code, const WarpedFeatures& warped) {
    auto h = fuse_->forward(code);
    for (size_t i = 0; i < up_stages_.size(); ++i) {
        const auto& skip = warped.stages[warped.stages.size() - 1 - i];
        h = up_stages_[i]->forward(torch::cat({h, skip}, 1));
    }
    return torch::tanh(out_(h));
}

torch::Tensor ClothingRefinerImpl::forward(const torch::Tensor& clothing,
                                           const torch::Tensor& warped) {
    check_same_shape(clothing, warped, "clothing refiner");
    if (clothing.dim() != 4 || clothing.size(1) != kImageChannels) {
        throw std::invalid_argument("clothing refiner: expected [B, 3, H, W] inputs");
    }
    if (clothing.size(2) % 16 != 0 || clothing.size(3) % 16 != 0) {
        throw std::invalid_argument("clothing refiner: dims must be divisible by 16");
    }
    auto detail = encode_detail(clothing);
    auto w = encode_warped(warped);
    if (options_.fusion == ClothingFusion::Concat) {
        return decode(torch::cat({detail, w.code}, 1), w);
    }
    return decode(blend_adain(w.code, detail, options_.gamma), w);
}

torch::Tensor clothing_forward(ClothingRefiner& refiner, const torch::Tensor& clothing,
                               const torch::Tensor& warped) {
    if (refiner->options().fusion != ClothingFusion::Concat) {
        throw std::invalid_argument("clothing_forward: refiner uses AdaIN fusion");
    }
    return refiner(clothing, warped);
}

torch::Tensor clothing_forward_adain(ClothingRefiner& refiner, const torch::Tensor& clothing,
                                     const torch::Tensor& warped, double gamma) {
    if (refiner->options().fusion != ClothingFusion::AdaIN) {
        throw std::invalid_argument("clothing_forward_adain: refiner uses concat fusion");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw std::invalid_argument("clothing_forward_adain: gamma must lie in [0, 1]");
    }
    const double saved = refiner->options().gamma;
    refiner->set_gamma(gamma);
    auto out = refiner(clothing, warped);
    refiner->set_gamma(saved);
    return out;
}

torch::Tensor adain(const torch::Tensor& content, const torch::Tensor& style, double epsilon) {
    if (content.dim() != 4 || style.dim() != 4 || content.size(0) != style.size(0) ||
        content.size(1) != style.size(1)) {
        throw std::invalid_argument("adain: expected [B, C, H, W] tensors with matching B and C");
    }
    auto mu_x = content.mean({2, 3}, true);
    auto mu_y = style.mean({2, 3}, true);
    auto sd_x = torch::sqrt(content.var({2, 3}, /*unbiased=*/false, true) + epsilon);
    auto sd_y = torch::sqrt(style.var({2, 3}, /*unbiased=*/false, true) + epsilon);
    return sd_y * ((content - mu_x) / sd_x) + mu_y;
}

torch::Tensor blend_adain(const torch::Tensor& content, const torch::Tensor& style, double gamma) {
    if (gamma == 0.0) return content;
    if (gamma == 1.0) return adain(content, style);
    return (1.0 - gamma) * content + gamma * adain(content, style);
}

// ----------------------------------------------------- context discriminator

BoundingBox mask_bounding_box(const torch::Tensor& mask) {
    if (mask.dim() != 2) throw std::invalid_argument("mask_bounding_box: expected [H, W] mask");
    auto nz = (mask.detach() > 0.5).nonzero();
    if (nz.size(0) == 0) throw DegenerateInputError("mask_bounding_box: mask is empty");
    auto rows = nz.select(1, 0);
    auto cols = nz.select(1, 1);
    return {rows.min().item<int64_t>(), cols.min().item<int64_t>(), rows.max().item<int64_t>(),
            cols.max().item<int64_t>()};
}

ContextDiscriminatorImpl::ContextDiscriminatorImpl(int64_t width) {
    const int64_t w = width;
    global_convs_ = torch::nn::Sequential();
    int64_t c = kImageChannels;
    for (int64_t out : {w, 2 * w, 4 * w, 8 * w, 8 * w}) {
        global_convs_->push_back(make_conv(c, out, 5, 2));
        global_convs_->push_back(leaky());
        c = out;
    }
    register_module("global_convs", global_convs_);
    const int64_t global_side = kGlobalInput >> 5;
    global_fc_ = register_module("global_fc",
                                 torch::nn::Linear(c * global_side * global_side, kBranchDim));

    local_convs_ = torch::nn::Sequential();
    c = kImageChannels;
    for (int64_t out : {w, 2 * w, 4 * w}) {
        local_convs_->push_back(make_conv(c, out, 5, 2));
        local_convs_->push_back(leaky());
        c = out;
    }
    for (int64_t out : {8 * w, 8 * w}) {
        local_convs_->push_back(make_conv(c, out, 3, 1));
        local_convs_->push_back(leaky());
        c = out;
    }
    register_module("local_convs", local_convs_);
    const int64_t local_side = kLocalInput >> 3;
    local_fc_ = register_module("local_fc",
                                torch::nn::Linear(c * local_side * local_side, kBranchDim));
    head_ = register_module("head", torch::nn::Linear(2 * kBranchDim, 1));
}

torch::Tensor ContextDiscriminatorImpl::global_features(const torch::Tensor& global_view) {
    return torch::leaky_relu(global_fc_(global_convs_->forward(global_view).flatten(1)), 0.2);
}

torch::Tensor ContextDiscriminatorImpl::local_features(const torch::Tensor& local_view) {
    return torch::leaky_relu(local_fc_(local_convs_->forward(local_view).flatten(1)), 0.2);
}

torch::Tensor ContextDiscriminatorImpl::forward(const torch::Tensor& local_view,
                                                const torch::Tensor& global_view) {
    auto joint = torch::cat({local_features(local_view), global_features(global_view)}, 1);
    return torch::sigmoid(head_(joint));
}

ContextViews context_views(const torch::Tensor& image, const torch::Tensor& mask, uint64_t seed) {
    if (image.dim() != 4 || mask.dim() != 3 || image.size(0) != mask.size(0)) {
        throw std::invalid_argument("context_views: expected image [B, 3, H, W] and mask [B, H, W]");
    }
    check_same_spatial(image, mask, "context_views");
    std::mt19937_64 rng(seed);
    ContextViews v;
    std::vector<torch::Tensor> globals, locals;
    const int64_t span = kGlobalInput - kLocalCrop + 1;
    for (int64_t b = 0; b < image.size(0); ++b) {
        CropRecord rec;
        rec.box = mask_bounding_box(mask[b]);
        auto box = image.slice(0, b, b + 1)
                       .slice(2, rec.box.top, rec.box.bottom + 1)
                       .slice(3, rec.box.left, rec.box.right + 1);
        auto global = resize(box, kGlobalInput, kGlobalInput);
        rec.row = static_cast<int64_t>(rng() % static_cast<uint64_t>(span));
        rec.col = static_cast<int64_t>(rng() % static_cast<uint64_t>(span));
        auto local = resize(global.slice(2, rec.row, rec.row + kLocalCrop)
                                .slice(3, rec.col, rec.col + kLocalCrop),
                            kLocalInput, kLocalInput);
        const double sy = static_cast<double>(rec.box.height()) / kGlobalInput;
        const double sx = static_cast<double>(rec.box.width()) / kGlobalInput;
        rec.image_top = rec.box.top + rec.row * sy;
        rec.image_left = rec.box.left + rec.col * sx;
        rec.image_bottom = rec.box.top + (rec.row + kLocalCrop) * sy;
        rec.image_right = rec.box.left + (rec.col + kLocalCrop) * sx;
        globals.push_back(global);
        locals.push_back(local);
        v.crops.push_back(rec);
    }
    v.global_view = torch::cat(globals, 0);
    v.local_view = torch::cat(locals, 0);
    return v;
}

ContextResult context_discriminate(ContextDiscriminator& discriminator, const torch::Tensor& image,
                                   const torch::Tensor& mask, uint64_t seed) {
    auto views = context_views(image, mask, seed);
    return {discriminator(views.local_view, views.global_view), std::move(views.crops)};
}

ClothingTerms clothing_objective(const torch::Tensor& refined, const torch::Tensor& target,
                                 const torch::Tensor& generated, const ClothingMasks& masks,
                                 const std::array<double, 4>& lambdas,
                                 ContextDiscriminator& discriminator,
                                 const PerceptualExtractor& extractor, uint64_t seed) {
    check_same_shape(refined, target, "clothing_objective");
    check_same_shape(refined, generated, "clothing_objective");
    auto target_clothing = mask_image(target, masks.clothing_target);

    ClothingTerms t;
    t.perceptual = perceptual_loss(refined, target_clothing, extractor);
    t.l1 = l1_sum(refined, target_clothing);
    t.fullbody = l1_sum(composite_refined(refined, generated, masks.clothing_generated), target);

    auto fake = context_views(mask_image(refined, masks.clothing_generated),
                              masks.clothing_generated, seed);
    auto real = context_views(target_clothing, masks.clothing_target, seed);
    t.gan = bce_against(discriminator(fake.local_view, fake.global_view), 1.0);
    t.discriminator =
        bce_against(discriminator(fake.local_view.detach(), fake.global_view.detach()), 0.0) +
        bce_against(discriminator(real.local_view, real.global_view), 1.0);
    t.total = lambdas[0] * t.perceptual + lambdas[1] * t.l1 + lambdas[2] * t.fullbody +
              lambdas[3] * t.gan;
    return t;
}

}  // namespace tryon
