#pragma once

// Stage IV: salient region refinement.
//  - FacialGAN predicts a residual d that sharpens the head region of I_g.
//  - ClothingGAN re-synthesises the clothing region from a detail encoder on
//    the in-shop garment and a warped-clothing encoder on I_g's clothing,
//    judged by a global/local context discriminator.

#include "tryon/coloring.hpp"
#include "tryon/layers.hpp"

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace tryon {

class DegenerateInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- FacialGAN

struct FacialOptions {
    int64_t width = 16;
    int64_t disc_width = 16;
    std::array<double, 4> lambdas = {1.0, 1.0, 1.0, 1.0};  // GAN, perceptual, face L1, fg L1
};

/// G_rf: the coloring topology without the fully connected layer, four
/// encoder and four decoder levels, zero-initialised output layer so d = 0
/// before training.
UNetGenerator make_facial_generator(const FacialOptions& options, int64_t height, int64_t width);

PairDiscriminator make_facial_discriminator(const FacialOptions& options);

/// d = G_rf(I_g^face, I_s^face).
torch::Tensor facial_forward(UNetGenerator& generator, const torch::Tensor& face_generated,
                             const torch::Tensor& face_source);

/// I_g + d restricted to the generated face mask.
torch::Tensor apply_facial_residual(const torch::Tensor& residual, const torch::Tensor& generated,
                                    const torch::Tensor& face_mask);

// -------------------------------------------------------- perceptual metric

/// Multi-tap feature extractor; tap i is the output of stage i applied to
/// the output of stage i - 1. Parameters are frozen.
class PerceptualExtractor {
public:
    /// VGG-19 topology (2, 2, 4, 4, 4 convolutions per stage, pools between
    /// stages), taps at the end of each stage, deterministic random weights.
    static PerceptualExtractor vgg19(int base_width, uint64_t seed, double tap_weight = 0.2);

    PerceptualExtractor(std::vector<torch::nn::Sequential> stages, std::vector<double> weights);

    std::vector<torch::Tensor> features(const torch::Tensor& image) const;
    const std::vector<double>& weights() const { return weights_; }
    void to(torch::Dtype dtype);
    void load(const std::filesystem::path& path);

private:
    std::vector<torch::nn::Sequential> stages_;
    std::vector<double> weights_;
};

/// sum_i lambda_i |phi_i(a) - phi_i(b)|_1
torch::Tensor perceptual_loss(const torch::Tensor& a, const torch::Tensor& b,
                              const PerceptualExtractor& extractor);

struct FacialMasks {
    torch::Tensor face_generated;  // M^face_g
    torch::Tensor face_source;     // M^face_s
    torch::Tensor fg_generated;    // M^fg_g
    torch::Tensor fg_target;       // M^fg_t
};

struct FacialTerms {
    torch::Tensor gan;
    torch::Tensor perceptual;
    torch::Tensor face_l1;
    torch::Tensor fg_l1;
    torch::Tensor total;
    torch::Tensor discriminator;
};

/// Weighted FacialGAN objective: GAN + perceptual + face L1 + foreground L1.
FacialTerms facial_objective(const torch::Tensor& residual, const torch::Tensor& generated,
                             const torch::Tensor& target, const torch::Tensor& source,
                             const FacialMasks& masks, const std::array<double, 4>& lambdas,
                             PairDiscriminator& discriminator,
                             const PerceptualExtractor& extractor);

// ------------------------------------------------------------- ClothingGAN

enum class ClothingFusion { Concat, AdaIN };

struct ClothingOptions {
    int64_t width = 8;
    ClothingFusion fusion = ClothingFusion::Concat;
    double gamma = 0.5;  // content/style trade-off, AdaIN fusion only
    bool zero_init_output = false;
    int64_t disc_width = 8;
    std::array<double, 4> lambdas = {1.0, 1.0, 1.0, 0.1};  // perceptual, L1, full body, GAN
};

struct WarpedFeatures {
    std::vector<torch::Tensor> stages;  // encoder outputs at 1/2, 1/4, 1/8, 1/16
    torch::Tensor code;                 // C_w
};

class ClothingRefinerImpl : public torch::nn::Module {
public:
    explicit ClothingRefinerImpl(ClothingOptions options = {});

    torch::Tensor encode_detail(const torch::Tensor& clothing);        // C_d = E_D(C_t)
    WarpedFeatures encode_warped(const torch::Tensor& warped);         // E_W(I_g^clothing)
    /// Dec over `code`, with highway connections from the E_W stages. The
    /// code is concat(C_d, C_w) for concat fusion and the blended E_W code
    /// for AdaIN fusion.
    torch::Tensor decode(const torch::Tensor& code, const WarpedFeatures& warped);

    /// C_r = Dec(E_D(C_t), E_W(I_g^clothing)) for concat fusion, or
    /// Dec((1 - gamma) E_W + gamma AdaIN(E_W, E_D)) for AdaIN fusion
    /// (using options().gamma).
    torch::Tensor forward(const torch::Tensor& clothing, const torch::Tensor& warped);

    const ClothingOptions& options() const { return options_; }
    void set_gamma(double gamma);

private:
    ClothingOptions options_;
    torch::nn::Sequential detail_{nullptr};
    std::vector<torch::nn::Sequential> warped_stages_;
    torch::nn::Sequential warped_tail_{nullptr};
    torch::nn::Sequential fuse_{nullptr};
    std::vector<torch::nn::Sequential> up_stages_;
    torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(ClothingRefiner);

/// C_r for concat fusion. Dims must agree and be divisible by 16.
torch::Tensor clothing_forward(ClothingRefiner& refiner, const torch::Tensor& clothing,
                               const torch::Tensor& warped);

/// C_r for AdaIN fusion at the given gamma. Requires a refiner built with
/// ClothingFusion::AdaIN; gamma outside [0, 1] is rejected.
torch::Tensor clothing_forward_adain(ClothingRefiner& refiner, const torch::Tensor& clothing,
                                     const torch::Tensor& warped, double gamma);

/// sigma(y) (x - mu(x)) / sigma(x) + mu(y), statistics per sample and channel
/// over the spatial dims; sigma(t) = sqrt(var(t) + epsilon).
torch::Tensor adain(const torch::Tensor& content, const torch::Tensor& style,
                    double epsilon = 1e-5);

/// (1 - gamma) content + gamma AdaIN(content, style)
torch::Tensor blend_adain(const torch::Tensor& content, const torch::Tensor& style, double gamma);

// ----------------------------------------------------- context discriminator

inline constexpr int64_t kGlobalInput = 128;
inline constexpr int64_t kLocalInput = 64;
inline constexpr int64_t kLocalCrop = 16;
inline constexpr int64_t kBranchDim = 1024;

struct BoundingBox {
    int64_t top = 0, left = 0, bottom = 0, right = 0;  // inclusive
    int64_t height() const { return bottom - top + 1; }
    int64_t width() const { return right - left + 1; }
};

struct CropRecord {
    BoundingBox box;         // tight mask box in image pixels
    int64_t row = 0;         // crop origin in the 128x128 resized box
    int64_t col = 0;
    double image_top = 0;    // crop window mapped back to image pixels
    double image_left = 0;
    double image_bottom = 0;
    double image_right = 0;
};

/// Tight box around mask > 0.5. Throws DegenerateInputError for an empty mask.
BoundingBox mask_bounding_box(const torch::Tensor& mask);

class ContextDiscriminatorImpl : public torch::nn::Module {
public:
    explicit ContextDiscriminatorImpl(int64_t width = 8);

    torch::Tensor global_features(const torch::Tensor& global_view);  // [B, 1024]
    torch::Tensor local_features(const torch::Tensor& local_view);    // [B, 1024]
    torch::Tensor forward(const torch::Tensor& local_view, const torch::Tensor& global_view);

    int64_t head_inputs() const { return head_->options.in_features(); }

private:
    torch::nn::Sequential global_convs_{nullptr}, local_convs_{nullptr};
    torch::nn::Linear global_fc_{nullptr}, local_fc_{nullptr}, head_{nullptr};
};
TORCH_MODULE(ContextDiscriminator);

struct ContextViews {
    torch::Tensor local_view;   // [B, 3, 64, 64]
    torch::Tensor global_view;  // [B, 3, 128, 128]
    std::vector<CropRecord> crops;
};

/// Global view = mask bounding box resized to 128x128; local view = seeded
/// random 16x16 window of the resized box, resized to 64x64 (bilinear).
ContextViews context_views(const torch::Tensor& image, const torch::Tensor& mask, uint64_t seed);

struct ContextResult {
    torch::Tensor probability;  // [B, 1]
    std::vector<CropRecord> crops;
};

ContextResult context_discriminate(ContextDiscriminator& discriminator, const torch::Tensor& image,
                                   const torch::Tensor& mask, uint64_t seed);

struct ClothingMasks {
    torch::Tensor clothing_generated;  // M^clothing_g
    torch::Tensor clothing_target;     // M^clothing_t
};

struct ClothingTerms {
    torch::Tensor perceptual;
    torch::Tensor l1;
    torch::Tensor fullbody;
    torch::Tensor gan;
    torch::Tensor total;
    torch::Tensor discriminator;
};

/// Weighted ClothingGAN objective and the context discriminator loss.
ClothingTerms clothing_objective(const torch::Tensor& refined, const torch::Tensor& target,
                                 const torch::Tensor& generated, const ClothingMasks& masks,
                                 const std::array<double, 4>& lambdas,
                                 ContextDiscriminator& discriminator,
                                 const PerceptualExtractor& extractor, uint64_t seed);

}  // namespace tryon
