#pragma once

// Image quality metrics and qualitative grids.

#include "tryon/triplet.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <vector>

namespace tryon {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Normalised 11-tap Gaussian (sigma 1.5), float64.
torch::Tensor ssim_kernel_1d();

/// Mean SSIM over all valid 11x11 windows of two [H, W] maps in [0, 1].
double ssim_map_mean(const torch::Tensor& x, const torch::Tensor& y);

/// RGB image in [-1, 1] ([3, H, W] or [B, 3, H, W]) to [0, 1] luminance
/// (Rec. 601 weights), float64.
torch::Tensor luminance(const torch::Tensor& image);

/// SSIM of two images on their luminance; batched inputs average over the
/// batch. Throws std::invalid_argument for mismatched dims or images
/// smaller than the window.
double ssim(const torch::Tensor& a, const torch::Tensor& b);

struct ScoreStats {
    double mean = 0;
    double std = 0;
};

/// Inception score from an [N, C] table of class probabilities: per split,
/// exp(mean_x KL(p(y|x) || p(y))), then mean and population std over splits.
/// Splits are contiguous, balanced chunks. Throws std::invalid_argument for
/// empty input, splits < 1 or splits > N.
ScoreStats inception_score(const torch::Tensor& probabilities, int splits);

/// Maps images to class probability vectors.
class ClassifierInterface {
public:
    virtual ~ClassifierInterface() = default;
    virtual int64_t num_classes() const = 0;
    /// [B, 3, H, W] -> [B, C]; each row sums to 1.
    virtual torch::Tensor probabilities(const torch::Tensor& images) = 0;
};

ScoreStats inception_score(const std::vector<torch::Tensor>& images, ClassifierInterface& classifier,
                           int splits);

/// Small convolutional texture-style classifier.
class TextureClassifierImpl : public torch::nn::Module {
public:
    explicit TextureClassifierImpl(int64_t width = 8, int64_t classes = kNumTextureStyles);
    torch::Tensor forward(const torch::Tensor& images);  // logits

private:
    torch::nn::Sequential body_{nullptr};
    torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(TextureClassifier);

class TextureClassifierAdapter : public ClassifierInterface {
public:
    explicit TextureClassifierAdapter(TextureClassifier model) : model_(std::move(model)) {}
    int64_t num_classes() const override;
    torch::Tensor probabilities(const torch::Tensor& images) override;

private:
    TextureClassifier model_;
};

/// Trains the classifier on person images of freshly generated synthetic
/// triplets labelled by their texture style. Deterministic in `seed`.
TextureClassifier train_texture_classifier(uint64_t seed, int64_t height, int64_t width, int samples = 64,
                                           int steps = 150);

struct MetricReport {
    double ssim = 0;
    double is_mean = 0;
    double is_std = 0;
    int64_t n = 0;
    int splits = 0;
};

/// `ssim=<f> is_mean=<f> is_std=<f> n=<i> splits=<i>`
std::string format_report(const MetricReport& report);

/// Tiles images row-major with a 2-pixel white gutter between tiles.
/// Throws std::invalid_argument for ragged rows, no images, or unequal dims.
torch::Tensor image_grid(const std::vector<std::vector<torch::Tensor>>& rows);
void emit_image_grid(const std::vector<std::vector<torch::Tensor>>& rows, const std::filesystem::path& path);

}  // namespace tryon
