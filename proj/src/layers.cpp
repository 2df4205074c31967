#include "tryon/layers.hpp"

namespace tryon {

namespace F = torch::nn::functional;

torch::nn::Conv2d make_conv(int64_t in, int64_t out, int64_t kernel, int64_t stride) {
    torch::nn::Conv2d conv(torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2));
    torch::NoGradGuard guard;
    torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanIn, torch::kReLU);
    conv->bias.zero_();
    return conv;
}

ResidualBlockImpl::ResidualBlockImpl(int64_t channels)
    : conv1_(register_module("conv1", make_conv(channels, channels, 3))),
      conv2_(register_module("conv2", make_conv(channels, channels, 3))) {}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
    return torch::relu(x + conv2_(torch::relu(conv1_(x))));
}

HighwayBlockImpl::HighwayBlockImpl(int64_t channels)
    : conv1_(register_module("conv1", make_conv(channels, channels, 3))),
      conv2_(register_module("conv2", make_conv(channels, channels, 3))),
      fuse_(register_module("fuse", make_conv(2 * channels, channels, 1))),
      norm1_(register_module("norm1", torch::nn::InstanceNorm2d(
                                          torch::nn::InstanceNorm2dOptions(channels).affine(true)))),
      norm2_(register_module("norm2", torch::nn::InstanceNorm2d(
                                          torch::nn::InstanceNorm2dOptions(channels).affine(true)))) {}

torch::Tensor HighwayBlockImpl::forward(const torch::Tensor& x) {
    auto h = torch::relu(norm1_(conv1_(x)));
    h = norm2_(conv2_(h));
    return torch::relu(fuse_(torch::cat({x, h}, 1)));
}

PairDiscriminatorImpl::PairDiscriminatorImpl(int64_t in_channels, int64_t width) {
    body_ = torch::nn::Sequential();
    int64_t c = in_channels;
    for (int i = 0; i < 4; ++i) {
        const int64_t out = width << i;
        body_->push_back(make_conv(c, out, 5, 2));
        body_->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
        c = out;
    }
    register_module("body", body_);
    head_ = register_module("head", torch::nn::Linear(c, 1));
}

torch::Tensor PairDiscriminatorImpl::logits(const torch::Tensor& candidate,
                                            const torch::Tensor& condition) {
    auto h = body_->forward(torch::cat({candidate, condition}, 1));
    return head_(h.mean({2, 3}));
}

torch::Tensor PairDiscriminatorImpl::forward(const torch::Tensor& candidate,
                                             const torch::Tensor& condition) {
    return torch::sigmoid(logits(candidate, condition));
}

void zero_parameters(torch::nn::Module& module) {
    torch::NoGradGuard no_grad;
    for (auto& p : module.parameters()) p.zero_();
}

torch::Tensor flat_parameters(const torch::nn::Module& module) {
    std::vector<torch::Tensor> flat;
    for (const auto& p : module.parameters()) flat.push_back(p.detach().flatten().to(torch::kDouble));
    if (flat.empty()) return torch::zeros({0}, torch::kDouble);
    return torch::cat(flat);
}

}  // namespace tryon
