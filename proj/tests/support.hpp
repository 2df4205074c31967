#pragma once

#include <torch/torch.h>

// Torch's logging CHECK would otherwise shadow the test framework's macro.
#undef CHECK

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <functional>
#include <vector>

namespace testing_support {

struct GradCheck {
    double max_relative_error = 0;
    int checked = 0;
};

// Central finite differences against autograd for selected elements of `x`
// (a float64 leaf with requires_grad). Checks the `top` elements with the
// largest analytic gradient plus `strided` evenly spaced ones. The relative
// error denominator is floored at `floor` so vanishing gradients compare
// absolutely.
inline GradCheck check_gradient(const std::function<torch::Tensor()>& loss, torch::Tensor x, int top = 12,
                                int strided = 8, double h = 1e-4, double floor = 1e-5) {
    if (x.grad().defined()) x.mutable_grad().zero_();
    loss().backward();
    auto analytic = x.grad().detach().clone().reshape({-1});
    const int64_t n = analytic.numel();

    std::vector<int64_t> picks;
    auto order = analytic.abs().argsort(0, true);
    for (int64_t i = 0; i < std::min<int64_t>(top, n); ++i) picks.push_back(order[i].item<int64_t>());
    for (int i = 0; i < strided && n > 0; ++i) picks.push_back((static_cast<int64_t>(i) * n) / strided);
    std::sort(picks.begin(), picks.end());
    picks.erase(std::unique(picks.begin(), picks.end()), picks.end());

    GradCheck out;
    torch::NoGradGuard guard;
    auto flat = x.detach().view({-1});
    for (int64_t i : picks) {
        const double orig = flat[i].item<double>();
        flat[i] = orig + h;
        const double up = loss().item<double>();
        flat[i] = orig - h;
        const double down = loss().item<double>();
        flat[i] = orig;
        const double numeric = (up - down) / (2 * h);
        const double a = analytic[i].item<double>();
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
        out.max_relative_error = std::max(out.max_relative_error, rel);
        ++out.checked;
    }
    return out;
}

inline torch::Tensor leaf(torch::Tensor t) { return t.to(torch::kDouble).detach().requires_grad_(true); }

// Random [-1, 1] image batch.
inline torch::Tensor random_image(int64_t b, int64_t h, int64_t w, torch::Dtype dtype = torch::kFloat) {
    return (torch::rand({b, 3, h, w}, torch::TensorOptions().dtype(dtype)) * 2 - 1);
}

inline torch::Tensor random_labels(int64_t h, int64_t w, int64_t classes = 14) {
    return torch::randint(0, classes, {h, w}, torch::kLong);
}

// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("tryon_test_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing_support
