#include "tryon/cloth2pose.hpp"

#include "tryon/layers.hpp"
#include "tryon/losses.hpp"
#include "tryon/tensors.hpp"

#include <stdexcept>

namespace tryon {

VggTrunkImpl::VggTrunkImpl(int base_width) {
    if (base_width <= 0) throw std::invalid_argument("VggTrunk: base width must be positive");
    // 0 marks a 2x2 max pool
    const std::vector<int> plan = {1, 1, 0, 2, 2, 0, 4, 4, 4, 4, 0, 8, 8};
    layers_ = torch::nn::Sequential();
    int64_t c = kImageChannels;
    for (int entry : plan) {
        if (entry == 0) {
            layers_->push_back(torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(2)));
            continue;
        }
        const int64_t out = static_cast<int64_t>(base_width) * entry;
        layers_->push_back(make_conv(c, out, 3));
        layers_->push_back(torch::nn::ReLU());
        c = out;
    }
    out_channels_ = c;
    register_module("layers", layers_);
}

torch::Tensor VggTrunkImpl::forward(const torch::Tensor& image) { return layers_->forward(image); }

RefinementBlockImpl::RefinementBlockImpl(int64_t in_channels, int64_t width, int64_t out_channels) {
    layers_ = torch::nn::Sequential();
    int64_t c = in_channels;
    for (int i = 0; i < 5; ++i) {
        layers_->push_back(make_conv(c, width, 7));
        layers_->push_back(torch::nn::ReLU());
        c = width;
    }
    layers_->push_back(make_conv(width, width, 1));
    layers_->push_back(torch::nn::ReLU());
    layers_->push_back(make_conv(width, out_channels, 1));
    register_module("layers", layers_);
}

torch::Tensor RefinementBlockImpl::forward(const torch::Tensor& x) { return layers_->forward(x); }

Cloth2PoseImpl::Cloth2PoseImpl(Cloth2PoseOptions options) : options_(options) {
    if (options_.blocks < 1) throw std::invalid_argument("Cloth2Pose: need at least one block");
    trunk_ = register_module("trunk", VggTrunk(options_.trunk_base_width));
    const int64_t cf = trunk_->out_channels();
    for (int i = 0; i < options_.blocks; ++i) {
        const int64_t in = i == 0 ? cf : cf + kNumJoints;
        blocks_.push_back(register_module("block" + std::to_string(i + 1),
                                          RefinementBlock(in, options_.block_width, kNumJoints)));
    }
}

torch::Tensor Cloth2PoseImpl::extract(const torch::Tensor& clothing) {
    if (clothing.dim() != 4 || clothing.size(1) != kImageChannels) {
        throw std::invalid_argument("cloth2pose: expected clothing batch [B, 3, H, W]");
    }
    if (clothing.size(2) % kFeatureStride != 0 || clothing.size(3) % kFeatureStride != 0) {
        throw std::invalid_argument("cloth2pose: clothing dims must be divisible by 8");
    }
    return trunk_(clothing);
}

std::vector<torch::Tensor> Cloth2PoseImpl::predict(const torch::Tensor& features) {
    std::vector<torch::Tensor> out;
    out.reserve(blocks_.size());
    for (size_t i = 0; i < blocks_.size(); ++i) {
        auto in = i == 0 ? features : torch::cat({features, out.back()}, 1);
        out.push_back(blocks_[i](in));
    }
    return out;
}

std::vector<torch::Tensor> Cloth2PoseImpl::forward(const torch::Tensor& clothing) {
    return predict(extract(clothing));
}

void Cloth2PoseImpl::load_trunk(const std::filesystem::path& path) {
    torch::load(trunk_, path.string());
}

torch::Tensor c2p_loss(const std::vector<torch::Tensor>& predictions, const torch::Tensor& target,
                       double lambda_sparsity) {
    if (predictions.empty()) throw std::invalid_argument("c2p_loss: no predictions");
    auto loss = torch::zeros({}, target.options());
    for (const auto& p : predictions) {
        check_same_shape(p, target, "c2p_loss");
        loss = loss + squared_l2_sum(p, target);
    }
    return loss + lambda_sparsity * batch_sum(predictions.back().abs());
}

}  // namespace tryon
