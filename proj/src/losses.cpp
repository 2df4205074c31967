#include "tryon/losses.hpp"

#include "tryon/tensors.hpp"

#include <stdexcept>

namespace tryon {

namespace {

torch::Tensor clamped_log(const torch::Tensor& p) {
    return torch::log(p.clamp(kLogClamp, 1.0 - kLogClamp));
}

}  // namespace

torch::Tensor batch_sum(const torch::Tensor& t) {
    if (t.dim() == 0) throw std::invalid_argument("batch_sum: expected a batched tensor");
    return t.sum() / static_cast<double>(t.size(0));
}

torch::Tensor l1_sum(const torch::Tensor& a, const torch::Tensor& b) {
    check_same_shape(a, b, "l1_sum");
    return batch_sum((a - b).abs());
}

torch::Tensor squared_l2_sum(const torch::Tensor& a, const torch::Tensor& b) {
    check_same_shape(a, b, "squared_l2_sum");
    return batch_sum((a - b).square());
}

torch::Tensor bce_against(const torch::Tensor& probability, double target) {
    if (target == 1.0) return -clamped_log(probability).mean();
    if (target == 0.0) return -clamped_log(1.0 - probability).mean();
    return -(target * clamped_log(probability) + (1.0 - target) * clamped_log(1.0 - probability))
                .mean();
}

torch::Tensor pixel_bce_sum(const torch::Tensor& probability, const torch::Tensor& target) {
    check_same_shape(probability, target, "pixel_bce_sum");
    return -batch_sum(target * clamped_log(probability) +
                      (1.0 - target) * clamped_log(1.0 - probability));
}

}  // namespace tryon
