#include "support.hpp"

#include "tryon/dataset.hpp"
#include "tryon/image_io.hpp"
#include "tryon/synthetic.hpp"

#include <filesystem>

#include "doctest.h"

using namespace tryon;
namespace fs = std::filesystem;

namespace {

bool same_person(const PersonRecord& a, const PersonRecord& b) {
    return torch::equal(a.image, b.image) && torch::equal(a.parsing, b.parsing) && a.keypoints == b.keypoints;
}

int containment_violations(const PersonRecord& p) {
    int bad = 0;
    for (int j = 0; j < kNumJoints; ++j) {
        const auto& k = p.keypoints[j];
        if (!k.visible) continue;
        const auto label = static_cast<Label>(p.parsing[k.y][k.x].item<int64_t>());
        if (label == Label::Background || !joint_label_allowed(static_cast<Joint>(j), label)) ++bad;
    }
    return bad;
}

}  // namespace

TEST_CASE("synthetic triplets are deterministic in the seed") {
    auto a = generate_synthetic_triplet(17, 96, 64);
    auto b = generate_synthetic_triplet(17, 96, 64);
    CHECK(a.id == b.id);
    CHECK(a.style == b.style);
    CHECK(torch::equal(a.clothing, b.clothing));
    CHECK(torch::equal(a.clothing_mask, b.clothing_mask));
    CHECK(same_person(a.source, b.source));
    CHECK(same_person(a.target, b.target));
    auto c = generate_synthetic_triplet(18, 96, 64);
    CHECK_FALSE(torch::equal(a.source.image, c.source.image));
}

TEST_CASE("synthetic triplet shapes and ranges") {
    auto t = generate_synthetic_triplet(3, 96, 64, TextureStyle::Plaid);
    CHECK(t.style == static_cast<int>(TextureStyle::Plaid));
    CHECK(t.clothing.sizes() == torch::IntArrayRef({3, 96, 64}));
    CHECK(t.clothing_mask.sizes() == torch::IntArrayRef({96, 64}));
    CHECK(t.source.parsing.sizes() == torch::IntArrayRef({96, 64}));
    CHECK(t.target.image.min().item<double>() >= -1.0);
    CHECK(t.target.image.max().item<double>() <= 1.0);
    CHECK(t.source.parsing.max().item<int64_t>() < 14);
    auto mask_values = std::get<0>(torch::_unique(t.clothing_mask));
    CHECK(mask_values.numel() == 2);
}

TEST_CASE("visible joints lie inside their limb group over 100 seeds") {
    int violations = 0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        auto t = generate_synthetic_triplet(seed, 96, 64);
        violations += containment_violations(t.source) + containment_violations(t.target);
    }
    CHECK(violations == 0);
}

TEST_CASE("clothing and face regions are never empty") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        auto t = generate_synthetic_triplet(seed, 64, 48);
        CHECK(t.clothing_mask.sum().item<double>() > 0);
        for (const auto* p : {&t.source, &t.target}) {
            CHECK((p->parsing == channel(Label::Face)).sum().item<int64_t>() > 0);
            CHECK((p->parsing == channel(Label::TopClothes)).sum().item<int64_t>() > 0);
        }
    }
}

TEST_CASE("invalid synthetic dims are rejected") {
    CHECK_THROWS_AS(generate_synthetic_triplet(0, 48, 32), std::invalid_argument);
    CHECK_THROWS_AS(generate_synthetic_triplet(0, 96, 60), std::invalid_argument);
    CHECK_THROWS_AS(generate_synthetic_triplet(0, 100, 64), std::invalid_argument);
    CHECK_NOTHROW(generate_synthetic_triplet(0, 64, 16));
}

TEST_CASE("dataset write then read stays within 8-bit quantization") {
    testing_support::TempDir dir;
    auto t = generate_synthetic_triplet(5, 96, 64);
    save_triplet(dir.path(), t);
    auto ds = load_dataset(dir.path());
    REQUIRE(ds.size() == 1);
    CHECK(ds.ids()[0] == t.id);
    auto back = ds.load(0);
    CHECK(back.id == t.id);
    CHECK(back.style == t.style);
    const double bound = 1.0 / 127.5 + 1e-6;
    CHECK((back.clothing - t.clothing).abs().max().item<double>() <= bound);
    CHECK((back.source.image - t.source.image).abs().max().item<double>() <= bound);
    CHECK((back.target.image - t.target.image).abs().max().item<double>() <= bound);
    CHECK(torch::equal(back.clothing_mask, t.clothing_mask));
    CHECK(torch::equal(back.source.parsing, t.source.parsing));
    CHECK(torch::equal(back.target.parsing, t.target.parsing));
    CHECK(back.source.keypoints == t.source.keypoints);
    CHECK(back.target.keypoints == t.target.keypoints);
}

TEST_CASE("PNG images round trip losslessly after quantization") {
    testing_support::TempDir dir;
    auto img = testing_support::random_image(1, 16, 8)[0];
    auto q = from_rgb8(to_rgb8(img));
    write_rgb_png(dir / "a.png", q);
    CHECK(torch::equal(read_rgb_png(dir / "a.png"), q));
    write_rgb_png(dir / "b.png", q);
    CHECK(testing_support::read_bytes(dir / "a.png") == testing_support::read_bytes(dir / "b.png"));
}

TEST_CASE("missing triplet file names the triplet and the file") {
    testing_support::TempDir dir;
    auto t = generate_synthetic_triplet(6, 64, 32);
    save_triplet(dir.path(), t);
    fs::remove(dir.path() / t.id / "parsing_b.png");
    auto ds = load_dataset(dir.path());
    try {
        ds.load(0);
        FAIL("expected DatasetError");
    } catch (const DatasetError& e) {
        const std::string msg = e.what();
        CHECK(msg.find(t.id) != std::string::npos);
        CHECK(msg.find("parsing_b.png") != std::string::npos);
    }
}

TEST_CASE("dataset ordering and empty roots") {
    testing_support::TempDir dir;
    CHECK(load_dataset(dir.path()).empty());
    CHECK_THROWS_AS(load_dataset(dir / "missing"), DatasetError);
    for (uint64_t seed : {30, 4, 200}) save_triplet(dir.path(), generate_synthetic_triplet(seed, 64, 32));
    auto ds = load_dataset(dir.path());
    REQUIRE(ds.size() == 3);
    CHECK(std::is_sorted(ds.ids().begin(), ds.ids().end()));
    CHECK(load_all(ds).size() == 3);
}

TEST_CASE("keypoint JSON round trip") {
    testing_support::TempDir dir;
    KeypointSet k{};
    k[0] = {3, 4, true};
    k[17] = {0, 9, true};
    write_keypoints_json(dir / "k.json", k);
    CHECK(read_keypoints_json(dir / "k.json") == k);
}

TEST_CASE("default split fractions") {
    auto full = split_indices(11283);
    CHECK(full.train.size() == 9590);
    CHECK(full.test.size() == 1693);
    CHECK(full.train.front() == 0);
    CHECK(full.test.front() == 9590);
    auto small = split_indices(8);
    CHECK(small.train.size() + small.test.size() == 8);
    CHECK(small.train.size() == 7);
    CHECK(split_indices(0).train.empty());
}
