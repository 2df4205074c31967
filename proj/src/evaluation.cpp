#include "tryon/evaluation.hpp"

#include "tryon/image_io.hpp"
#include "tryon/synthetic.hpp"

#include <cmath>
#include <cstdio>

namespace tryon {

namespace F = torch::nn::functional;

torch::Tensor ssim_kernel_1d() {
    auto x = torch::arange(kSsimWindow, torch::kDouble) - (kSsimWindow - 1) / 2.0;
    auto g = torch::exp(-(x * x) / (2.0 * kSsimSigma * kSsimSigma));
    return g / g.sum();
}

double ssim_map_mean(const torch::Tensor& x, const torch::Tensor& y) {
    if (x.dim() != 2 || !x.sizes().equals(y.sizes())) {
        throw std::invalid_argument("ssim: expected two [H, W] maps of equal size");
    }
    if (x.size(0) < kSsimWindow || x.size(1) < kSsimWindow) {
        throw std::invalid_argument("ssim: images must be at least 11x11");
    }
    const auto g = ssim_kernel_1d();
    const auto kv = g.view({1, 1, kSsimWindow, 1});
    const auto kh = g.view({1, 1, 1, kSsimWindow});
    auto filter = [&](const torch::Tensor& t) {
        return F::conv2d(F::conv2d(t.view({1, 1, t.size(0), t.size(1)}), kv), kh);
    };
    auto a = x.to(torch::kDouble), b = y.to(torch::kDouble);
    auto mu_a = filter(a), mu_b = filter(b);
    auto var_a = filter(a * a) - mu_a * mu_a;
    auto var_b = filter(b * b) - mu_b * mu_b;
    auto cov = filter(a * b) - mu_a * mu_b;
    auto num = (2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2);
    auto den = (mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2);
    return (num / den).mean().item<double>();
}

torch::Tensor luminance(const torch::Tensor& image) {
    check_image(image, "luminance");
    auto x = (image.to(torch::kDouble) + 1.0) / 2.0;
    return 0.299 * x.select(-3, 0) + 0.587 * x.select(-3, 1) + 0.114 * x.select(-3, 2);
}

double ssim(const torch::Tensor& a, const torch::Tensor& b) {
    if (!a.sizes().equals(b.sizes())) throw std::invalid_argument("ssim: image dims differ");
    if (a.dim() != 3 && a.dim() != 4) throw std::invalid_argument("ssim: expected [3, H, W] or [B, 3, H, W]");
    if (a.size(-3) != kImageChannels) throw std::invalid_argument("ssim: expected 3-channel images");
    auto la = luminance(a), lb = luminance(b);
    if (la.dim() == 2) return ssim_map_mean(la, lb);
    double total = 0;
    for (int64_t i = 0; i < la.size(0); ++i) total += ssim_map_mean(la[i], lb[i]);
    return total / static_cast<double>(la.size(0));
}

ScoreStats inception_score(const torch::Tensor& probabilities, int splits) {
    if (probabilities.dim() != 2 || probabilities.size(0) == 0 || probabilities.size(1) == 0) {
        throw std::invalid_argument("inception_score: expected a non-empty [N, C] probability table");
    }
    const int64_t n = probabilities.size(0);
    if (splits < 1 || splits > n) {
        throw std::invalid_argument("inception_score: splits must lie in [1, N], got " + std::to_string(splits));
    }
    auto p = probabilities.to(torch::kDouble);
    std::vector<double> scores;
    for (int k = 0; k < splits; ++k) {
        const int64_t lo = k * n / splits, hi = (k + 1) * n / splits;
        auto part = p.slice(0, lo, hi);
        auto marginal = part.mean(0, true);
        // p log(p / q) with 0 log 0 = 0
        auto ratio = torch::where(part > 0, part / marginal, torch::ones_like(part));
        auto kl = (part * torch::log(ratio)).sum(1);
        scores.push_back(std::exp(kl.mean().item<double>()));
    }
    double mean = 0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    double var = 0;
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= static_cast<double>(scores.size());
    return {mean, std::sqrt(var)};
}

ScoreStats inception_score(const std::vector<torch::Tensor>& images, ClassifierInterface& classifier, int splits) {
    if (images.empty()) throw std::invalid_argument("inception_score: no images");
    std::vector<torch::Tensor> rows;
    for (const auto& img : images) {
        rows.push_back(classifier.probabilities(img.dim() == 3 ? img.unsqueeze(0) : img));
    }
    return inception_score(torch::cat(rows), splits);
}

TextureClassifierImpl::TextureClassifierImpl(int64_t width, int64_t classes) {
    namespace nn = torch::nn;
    body_ = nn::Sequential(nn::Conv2d(nn::Conv2dOptions(3, width, 3).stride(2).padding(1)), nn::ReLU(),
                           nn::Conv2d(nn::Conv2dOptions(width, 2 * width, 3).stride(2).padding(1)), nn::ReLU(),
                           nn::Conv2d(nn::Conv2dOptions(2 * width, 2 * width, 3).stride(2).padding(1)),
                           nn::ReLU());
    head_ = nn::Linear(2 * width, classes);
    register_module("body", body_);
    register_module("head", head_);
}

torch::Tensor TextureClassifierImpl::forward(const torch::Tensor& images) {
    return head_(body_->forward(images).mean({2, 3}));
}

int64_t TextureClassifierAdapter::num_classes() const { return model_->named_parameters()["head.bias"].size(0); }

torch::Tensor TextureClassifierAdapter::probabilities(const torch::Tensor& images) {
    torch::NoGradGuard guard;
    model_->eval();
    return torch::softmax(model_->forward(images.to(torch::kFloat)).to(torch::kDouble), 1);
}

TextureClassifier train_texture_classifier(uint64_t seed, int64_t height, int64_t width, int samples, int steps) {
    torch::manual_seed(seed);
    TextureClassifier model;
    std::vector<torch::Tensor> images;
    std::vector<int64_t> labels;
    for (int i = 0; i < samples; ++i) {
        const auto style = static_cast<TextureStyle>(i % kNumTextureStyles);
        auto t = generate_synthetic_triplet(seed * 7919 + static_cast<uint64_t>(i), height, width, style);
        images.push_back(i % 2 ? t.source.image : t.target.image);
        labels.push_back(static_cast<int64_t>(style));
    }
    auto x = torch::stack(images);
    auto y = torch::tensor(labels, torch::kLong);
    torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(3e-3));
    model->train();
    for (int s = 0; s < steps; ++s) {
        opt.zero_grad();
        auto loss = F::cross_entropy(model->forward(x), y);
        loss.backward();
        opt.step();
    }
    model->eval();
    return model;
}

std::string format_report(const MetricReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "ssim=%.6f is_mean=%.6f is_std=%.6f n=%lld splits=%d", r.ssim, r.is_mean,
                  r.is_std, static_cast<long long>(r.n), r.splits);
    return buf;
}

torch::Tensor image_grid(const std::vector<std::vector<torch::Tensor>>& rows) {
    constexpr int64_t gutter = 2;
    if (rows.empty() || rows.front().empty()) throw std::invalid_argument("image_grid: no images");
    const size_t cols = rows.front().size();
    const auto& first = rows.front().front();
    check_image(first, "image_grid");
    if (first.dim() != 3) throw std::invalid_argument("image_grid: expected [3, H, W] images");
    const int64_t h = first.size(1), w = first.size(2);
    for (const auto& row : rows) {
        if (row.size() != cols) throw std::invalid_argument("image_grid: ragged rows");
        for (const auto& img : row) {
            if (!img.sizes().equals(first.sizes())) throw std::invalid_argument("image_grid: image dims differ");
        }
    }
    const auto r = static_cast<int64_t>(rows.size()), c = static_cast<int64_t>(cols);
    auto grid = torch::ones({3, r * h + (r - 1) * gutter, c * w + (c - 1) * gutter}, first.options());
    for (int64_t i = 0; i < r; ++i) {
        for (int64_t j = 0; j < c; ++j) {
            grid.slice(1, i * (h + gutter), i * (h + gutter) + h)
                .slice(2, j * (w + gutter), j * (w + gutter) + w)
                .copy_(rows[i][j]);
        }
    }
    return grid;
}

void emit_image_grid(const std::vector<std::vector<torch::Tensor>>& rows, const std::filesystem::path& path) {
    write_rgb_png(path, image_grid(rows));
}

}  // namespace tryon
