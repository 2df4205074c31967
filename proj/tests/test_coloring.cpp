#include "support.hpp"

#include "tryon/coloring.hpp"
#include "tryon/layers.hpp"
#include "tryon/losses.hpp"
#include "tryon/tensors.hpp"

#include <cmath>

#include "doctest.h"

using namespace tryon;

namespace {

ColoringOptions small_options() {
    ColoringOptions o;
    o.width = 4;
    o.fc_dim = 8;
    o.disc_width = 4;
    return o;
}

torch::Tensor random_parsing(int64_t b, int64_t h, int64_t w) {
    std::vector<torch::Tensor> maps;
    for (int64_t i = 0; i < b; ++i) maps.push_back(one_hot_parsing(testing_support::random_labels(h, w)));
    return torch::stack(maps);
}

}  // namespace

TEST_CASE("coloring output shape and tanh range") {
    torch::manual_seed(0);
    auto g = make_coloring_generator(small_options(), 32, 16);
    auto out = coloring_forward(g, testing_support::random_image(2, 32, 16), testing_support::random_image(2, 32, 16),
                                random_parsing(2, 32, 16));
    CHECK(out.sizes() == torch::IntArrayRef({2, 3, 32, 16}));
    CHECK(out.min().item<double>() >= -1.0);
    CHECK(out.max().item<double>() <= 1.0);
    CHECK_THROWS_AS(coloring_forward(g, testing_support::random_image(1, 32, 16),
                                     testing_support::random_image(1, 16, 16), random_parsing(1, 32, 16)),
                    std::invalid_argument);
    CHECK_THROWS_AS(coloring_forward(g, testing_support::random_image(1, 32, 16),
                                     testing_support::random_image(1, 32, 16), random_parsing(1, 16, 16)),
                    std::invalid_argument);
}

TEST_CASE("coloring generator is deterministic under a fixed seed") {
    auto c = testing_support::random_image(1, 32, 16);
    auto s = testing_support::random_image(1, 32, 16);
    auto m = random_parsing(1, 32, 16);
    torch::manual_seed(9);
    auto a = make_coloring_generator(small_options(), 32, 16);
    torch::manual_seed(9);
    auto b = make_coloring_generator(small_options(), 32, 16);
    CHECK(torch::equal(coloring_forward(a, c, s, m), coloring_forward(b, c, s, m)));
}

TEST_CASE("coloring L1 closed forms") {
    auto img = testing_support::random_image(1, 4, 4);
    auto fg = (torch::rand({1, 4, 4}) > 0.5).to(torch::kFloat);
    CHECK(coloring_l1_loss(img, fg, img, fg).item<double>() == 0.0);

    auto zero = torch::zeros({1, 4, 4});
    CHECK(coloring_l1_loss(img, zero, testing_support::random_image(1, 4, 4), zero).item<double>() == 0.0);

    auto a = torch::full({1, 3, 1, 1}, 0.25, torch::kDouble);
    auto b = torch::full({1, 3, 1, 1}, 0.75, torch::kDouble);
    auto one = torch::ones({1, 1, 1}, torch::kDouble);
    CHECK(coloring_l1_loss(a, one, b, one).item<double>() == doctest::Approx(1.5).epsilon(1e-12));
    CHECK_THROWS_AS(coloring_l1_loss(img, fg, img.slice(2, 0, 2), fg), std::invalid_argument);
}

TEST_CASE("coloring L1 ignores target pixels outside the target foreground") {
    auto generated = testing_support::random_image(2, 8, 8);
    auto target = testing_support::random_image(2, 8, 8);
    auto fg_g = (torch::rand({2, 8, 8}) > 0.5).to(torch::kFloat);
    auto fg_t = (torch::rand({2, 8, 8}) > 0.5).to(torch::kFloat);
    auto changed = target + (1 - fg_t).unsqueeze(1) * torch::randn({2, 3, 8, 8});
    CHECK(coloring_l1_loss(generated, fg_g, target, fg_t).item<double>() ==
          coloring_l1_loss(generated, fg_g, changed, fg_t).item<double>());
}

TEST_CASE("constant one-half coloring discriminator gives ln 2 and 2 ln 2") {
    auto d = make_coloring_discriminator(small_options());
    zero_parameters(*d);
    auto losses = coloring_gan_losses(d, testing_support::random_image(2, 16, 16),
                                      testing_support::random_image(2, 16, 16),
                                      testing_support::random_image(2, 16, 16));
    CHECK(losses.generator.item<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    CHECK(losses.discriminator.item<double>() == doctest::Approx(2 * std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("perfect coloring discriminator limits") {
    auto real = torch::ones({1, 1}, torch::kDouble);
    auto fake = torch::full({1, 1}, 1e-7, torch::kDouble);
    CHECK((bce_against(fake, 0.0) + bce_against(real, 1.0)).item<double>() < 1e-6);
    CHECK(bce_against(fake, 1.0).item<double>() == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));
    CHECK(bce_against(torch::zeros({1, 1}, torch::kDouble), 1.0).item<double>() ==
          doctest::Approx(-std::log(kLogClamp)).epsilon(1e-9));
}

TEST_CASE("coloring objective arithmetic") {
    auto gan = torch::tensor(0.5, torch::kDouble);
    CHECK(coloring_objective(gan, torch::tensor(3.0, torch::kDouble), 10.0).item<double>() == doctest::Approx(30.5));
    CHECK(coloring_objective(gan, torch::tensor(3.0, torch::kDouble), 0.0).item<double>() == doctest::Approx(0.5));
    const double a = coloring_objective(gan, torch::tensor(1.0, torch::kDouble), 10.0).item<double>();
    const double b = coloring_objective(gan, torch::tensor(2.0, torch::kDouble), 10.0).item<double>();
    CHECK(b - a == doctest::Approx(10.0));
}

TEST_CASE("coloring gradients match finite differences on a toy") {
    torch::manual_seed(2);
    auto g = make_coloring_generator(small_options(), 8, 8);
    auto d = make_coloring_discriminator(small_options());
    g->to(torch::kDouble);
    d->to(torch::kDouble);
    auto c = testing_support::random_image(1, 8, 8, torch::kDouble);
    auto s = testing_support::random_image(1, 8, 8, torch::kDouble);
    auto t = testing_support::random_image(1, 8, 8, torch::kDouble);
    auto m = random_parsing(1, 8, 8).to(torch::kDouble);
    auto fg = select_channels(m, MaskGroup::Foreground);
    auto objective = [&] {
        auto out = coloring_forward(g, c, s, m);
        auto gan = coloring_gan_losses(d, out, t, s);
        return coloring_objective(gan.generator, coloring_l1_loss(out, fg, t, fg), 10.0);
    };
    auto params = g->parameters();
    CHECK(testing_support::check_gradient(objective, params.front()).max_relative_error < 1e-3);
    CHECK(testing_support::check_gradient(objective, params[params.size() - 2]).max_relative_error < 1e-3);

    // Discriminator loss w.r.t. a generated image at 4x4.
    auto image = testing_support::leaf(testing_support::random_image(1, 4, 4));
    auto t4 = testing_support::random_image(1, 4, 4, torch::kDouble);
    auto s4 = testing_support::random_image(1, 4, 4, torch::kDouble);
    auto g_loss = [&] { return coloring_gan_losses(d, image, t4, s4).generator; };
    CHECK(testing_support::check_gradient(g_loss, image).max_relative_error < 1e-3);
    auto d_param = d->parameters().front();
    auto d_loss = [&] { return coloring_gan_losses(d, image, t4, s4).discriminator; };
    CHECK(testing_support::check_gradient(d_loss, d_param).max_relative_error < 1e-3);
}
