#include "oracles.hpp"
#include "support.hpp"

#include "tryon/evaluation.hpp"
#include "tryon/image_io.hpp"
#include "tryon/retrieval.hpp"

#include <cmath>

#include "doctest.h"

using namespace tryon;

namespace {

torch::Tensor vec(std::initializer_list<double> v) { return torch::tensor(std::vector<double>(v), torch::kDouble); }

std::vector<RetrievalEntry> to_entries(const std::vector<std::vector<double>>& db) {
    std::vector<RetrievalEntry> out;
    for (size_t i = 0; i < db.size(); ++i)
        out.push_back({torch::tensor(db[i], torch::kDouble), static_cast<int64_t>(100 + i)});
    return out;
}

std::vector<size_t> indices(const std::vector<RetrievalHit>& hits) {
    std::vector<size_t> out;
    for (const auto& h : hits) out.push_back(h.index);
    return out;
}

class UniformClassifier : public ClassifierInterface {
public:
    int64_t num_classes() const override { return 5; }
    torch::Tensor probabilities(const torch::Tensor& images) override {
        return torch::full({images.size(0), 5}, 0.2, torch::kDouble);
    }
};

}  // namespace

// ------------------------------------------------------------------- SSIM

TEST_CASE("SSIM of an image with itself is one") {
    for (int i = 0; i < 5; ++i) {
        auto x = testing_support::random_image(1, 24, 16)[0];
        CHECK(std::abs(ssim(x, x) - 1.0) < 1e-9);
    }
    auto flat = torch::full({3, 16, 16}, 0.2f);
    CHECK(std::abs(ssim(flat, flat) - 1.0) < 1e-9);
}

TEST_CASE("SSIM of two uniform images") {
    auto a = torch::full({16, 16}, 0.2, torch::kDouble);
    auto b = torch::full({16, 16}, 0.4, torch::kDouble);
    const double expected = (2 * 0.08 + 1e-4) / (0.2 * 0.2 + 0.4 * 0.4 + 1e-4);
    CHECK(ssim_map_mean(a, b) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(expected == doctest::Approx(0.8001).epsilon(1e-3));
}

TEST_CASE("SSIM matches the brute-force windowed oracle") {
    for (int i = 0; i < 20; ++i) {
        auto x = torch::rand({32, 32}, torch::kDouble);
        auto y = (x + 0.3 * torch::randn({32, 32}, torch::kDouble)).clamp(0, 1);
        CHECK(std::abs(ssim_map_mean(x, y) - oracles::ssim_windows(x, y)) < 1e-6);
    }
    auto a = testing_support::random_image(1, 32, 32)[0];
    auto b = testing_support::random_image(1, 32, 32)[0];
    CHECK(std::abs(ssim(a, b) - oracles::ssim_windows(oracles::luminance(a), oracles::luminance(b))) < 1e-6);
}

TEST_CASE("SSIM properties and errors") {
    auto a = testing_support::random_image(3, 16, 16);
    auto b = testing_support::random_image(3, 16, 16);
    CHECK(std::abs(ssim(a, b) - ssim(b, a)) < 1e-12);
    const double s = ssim(a, b);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
    double batch_mean = 0;
    for (int i = 0; i < 3; ++i) batch_mean += ssim(a[i], b[i]) / 3;
    CHECK(s == doctest::Approx(batch_mean).epsilon(1e-12));
    CHECK_THROWS_AS(ssim(a, b.slice(3, 0, 8)), std::invalid_argument);
    CHECK_THROWS_AS(ssim(torch::zeros({3, 8, 8}), torch::zeros({3, 8, 8})), std::invalid_argument);
    auto k = ssim_kernel_1d();
    CHECK(k.numel() == 11);
    CHECK(k.sum().item<double>() == doctest::Approx(1.0).epsilon(1e-12));
}

// --------------------------------------------------------- Inception score

TEST_CASE("inception score closed forms") {
    auto uniform = torch::full({12, 7}, 1.0 / 7, torch::kDouble);
    CHECK(std::abs(inception_score(uniform, 1).mean - 1.0) < 1e-9);
    CHECK(std::abs(inception_score(uniform, 3).mean - 1.0) < 1e-9);

    auto one_hot = torch::zeros({8, 4}, torch::kDouble);
    for (int i = 0; i < 8; ++i) one_hot[i][i % 4] = 1.0;
    auto s = inception_score(one_hot, 1);
    CHECK(std::abs(s.mean - 4.0) < 1e-6);
    CHECK(s.std == 0.0);

    UniformClassifier classifier;
    std::vector<torch::Tensor> images(6, torch::zeros({3, 16, 16}));
    CHECK(std::abs(inception_score(images, classifier, 2).mean - 1.0) < 1e-9);
}

TEST_CASE("inception score matches the double-loop oracle") {
    for (int i = 0; i < 10; ++i) {
        auto p = torch::softmax(torch::randn({30, 6}, torch::kDouble) * 2, 1);
        CHECK(std::abs(inception_score(p, 1).mean - oracles::inception_score(oracles::to_table(p))) < 1e-9);
    }
}

TEST_CASE("inception score splits") {
    auto p = torch::softmax(torch::randn({10, 4}, torch::kDouble), 1);
    auto s = inception_score(p, 2);
    const double a = oracles::inception_score(oracles::to_table(p.slice(0, 0, 5)));
    const double b = oracles::inception_score(oracles::to_table(p.slice(0, 5, 10)));
    CHECK(s.mean == doctest::Approx((a + b) / 2).epsilon(1e-12));
    CHECK(s.std == doctest::Approx(std::abs(a - b) / 2).epsilon(1e-9));
    CHECK(s.mean >= 1.0 - 1e-12);
    CHECK_THROWS_AS(inception_score(p, 0), std::invalid_argument);
    CHECK_THROWS_AS(inception_score(p, 11), std::invalid_argument);
    CHECK_THROWS_AS(inception_score(torch::zeros({0, 4}), 1), std::invalid_argument);
    UniformClassifier classifier;
    CHECK_THROWS_AS(inception_score(std::vector<torch::Tensor>{}, classifier, 1), std::invalid_argument);
}

TEST_CASE("inception score is invariant to image order") {
    auto p = torch::softmax(torch::randn({25, 5}, torch::kDouble), 1);
    auto perm = torch::randperm(25);
    CHECK(std::abs(inception_score(p, 1).mean - inception_score(p.index_select(0, perm), 1).mean) < 1e-12);
}

TEST_CASE("texture classifier outputs probabilities") {
    auto model = train_texture_classifier(1, 64, 32, 8, 3);
    TextureClassifierAdapter adapter(model);
    CHECK(adapter.num_classes() == 4);
    auto p = adapter.probabilities(testing_support::random_image(5, 64, 32));
    CHECK(p.sizes() == torch::IntArrayRef({5, 4}));
    CHECK((p.sum(1) - 1).abs().max().item<double>() < 1e-6);
    auto again = TextureClassifierAdapter(train_texture_classifier(1, 64, 32, 8, 3));
    auto x = testing_support::random_image(2, 64, 32);
    CHECK(torch::equal(adapter.probabilities(x), again.probabilities(x)));
}

TEST_CASE("metric report format") {
    CHECK(format_report({1.0, 2.5, 0.125, 8, 2}) == "ssim=1.000000 is_mean=2.500000 is_std=0.125000 n=8 splits=2");
}

// --------------------------------------------------------------- retrieval

TEST_CASE("retrieval on a hand-computed toy database") {
    std::vector<std::vector<double>> db = {{0, 0}, {3, 4}, {1, 1}, {-2, 0}, {0.5, -0.5}};
    auto hits = retrieve_poses(vec({0, 0}), to_entries(db), 5);
    // Distances: 0, 5, sqrt 2, 2, sqrt 0.5.
    CHECK((indices(hits) == std::vector<size_t>{0, 4, 2, 3, 1}));
    CHECK(hits[1].distance == doctest::Approx(std::sqrt(0.5)));
    CHECK(hits[4].distance == doctest::Approx(5.0));
    CHECK(hits[4].pose_id == 101);
    CHECK(indices(hits) == oracles::exhaustive_ranking(db, {0, 0}));
}

TEST_CASE("retrieval matches exhaustive sorting on 50-item databases") {
    for (int trial = 0; trial < 10; ++trial) {
        auto feats = torch::randn({50, 16}, torch::kDouble);
        auto q = torch::randn({16}, torch::kDouble);
        auto db = oracles::to_table(feats);
        auto query = oracles::to_table(q.unsqueeze(0))[0];
        auto hits = retrieve_poses(q, to_entries(db), 50);
        CHECK(indices(hits) == oracles::exhaustive_ranking(db, query));
        for (size_t i = 1; i < hits.size(); ++i) CHECK(hits[i - 1].distance <= hits[i].distance);
        auto top = retrieve_poses(q, to_entries(db), 7);
        const auto ranked = indices(hits);
        CHECK(indices(top) == std::vector<size_t>(ranked.begin(), ranked.begin() + 7));
    }
}

TEST_CASE("retrieval properties") {
    auto feats = torch::randn({20, 8}, torch::kDouble);
    auto entries = to_entries(oracles::to_table(feats));
    auto hits = retrieve_poses(feats[6], entries, 3);
    CHECK(hits[0].index == 6);
    CHECK(hits[0].distance == 0.0);

    std::vector<RetrievalEntry> scaled;
    for (const auto& e : entries) scaled.push_back({e.features * 3.7, e.pose_id});
    auto q = torch::randn({8}, torch::kDouble);
    CHECK(indices(retrieve_poses(q, entries, 20)) == indices(retrieve_poses(q * 3.7, scaled, 20)));

    CHECK(retrieve_poses(q, entries, 100).size() == 20);
    std::vector<RetrievalEntry> ties = {{vec({1, 0}), 1}, {vec({0, 1}), 2}, {vec({-1, 0}), 3}};
    CHECK((indices(retrieve_poses(vec({0, 0}), ties, 3)) == std::vector<size_t>{0, 1, 2}));
    CHECK_THROWS_AS(retrieve_poses(q, entries, 0), std::invalid_argument);
    CHECK_THROWS_AS(retrieve_poses(q, entries, -2), std::invalid_argument);
    CHECK_THROWS_AS(retrieve_poses(vec({1, 2}), entries, 1), std::invalid_argument);
}

// -------------------------------------------------------------------- grids

TEST_CASE("image grid dimensions and gutter") {
    std::vector<std::vector<torch::Tensor>> rows(2);
    for (auto& row : rows)
        for (int j = 0; j < 3; ++j) row.push_back(testing_support::random_image(1, 64, 48)[0]);
    auto g = image_grid(rows);
    CHECK(g.sizes() == torch::IntArrayRef({3, 130, 148}));
    CHECK(g.select(1, 64).min().item<float>() == 1.0f);
    CHECK(g.select(2, 49).min().item<float>() == 1.0f);
    CHECK(torch::equal(g.slice(1, 66, 130).slice(2, 50, 98), rows[1][1]));

    auto single = testing_support::random_image(1, 16, 24)[0];
    CHECK(image_grid({{single}}).sizes() == single.sizes());

    CHECK_THROWS_AS(image_grid({{single, single}, {single}}), std::invalid_argument);
    CHECK_THROWS_AS(image_grid({}), std::invalid_argument);
    CHECK_THROWS_AS(image_grid({{single, testing_support::random_image(1, 16, 16)[0]}}), std::invalid_argument);
}

TEST_CASE("emitted grid reads back exactly") {
    testing_support::TempDir dir;
    std::vector<std::vector<torch::Tensor>> rows(2);
    for (auto& row : rows)
        for (int j = 0; j < 2; ++j) row.push_back(from_rgb8(to_rgb8(testing_support::random_image(1, 16, 8)[0])));
    emit_image_grid(rows, dir / "g.png");
    auto back = read_rgb_png(dir / "g.png");
    CHECK(back.sizes() == torch::IntArrayRef({3, 34, 18}));
    CHECK(torch::equal(back.slice(1, 18, 34).slice(2, 10, 18), rows[1][1]));
    CHECK(torch::equal(back.slice(1, 0, 16).slice(2, 0, 8), rows[0][0]));
}
