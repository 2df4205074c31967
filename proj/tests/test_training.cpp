#include "support.hpp"

#include "tryon/checkpoint.hpp"
#include "tryon/pipeline.hpp"
#include "tryon/synthetic.hpp"
#include "tryon/training.hpp"

#include <cmath>

#include "doctest.h"

using namespace tryon;

namespace {

TrainConfig tiny_config(Stage stage, int64_t steps) {
    TrainConfig c;
    c.stage = stage;
    c.steps = steps;
    c.batch = 2;
    c.seed = 3;
    c.height = 64;
    c.width = 32;
    c.c2p = {2, 8, 4, 0.00008};
    c.translator.width = 4;
    c.translator.res_blocks = 2;
    c.translator.disc_width = 4;
    c.coloring.width = 4;
    c.coloring.fc_dim = 16;
    c.coloring.disc_width = 4;
    c.facial.width = 4;
    c.facial.disc_width = 4;
    c.clothing.width = 4;
    c.clothing.disc_width = 2;
    c.perceptual_width = 2;
    return c;
}

std::vector<Triplet> tiny_data(int n = 3) {
    std::vector<Triplet> data;
    for (int i = 0; i < n; ++i) data.push_back(generate_synthetic_triplet(100 + i, 64, 32));
    return data;
}

bool finite_trace(const std::vector<LossRecord>& trace) {
    for (const auto& r : trace) {
        if (!std::isfinite(r.generator) || !std::isfinite(r.discriminator) || !std::isfinite(r.reconstruction))
            return false;
    }
    return true;
}

PipelineCheckpoints tiny_checkpoints(const std::vector<Triplet>& data) {
    PipelineCheckpoints ck;
    ck.c2p = train_stage(tiny_config(Stage::C2P, 1), data).checkpoint;
    ck.translator = train_stage(tiny_config(Stage::Translator, 1), data).checkpoint;
    ck.coloring = train_stage(tiny_config(Stage::Coloring, 1), data).checkpoint;
    ck.facial = train_stage(tiny_config(Stage::Facial, 1), data).checkpoint;
    ck.clothing = train_stage(tiny_config(Stage::Clothing, 1), data).checkpoint;
    return ck;
}

}  // namespace

TEST_CASE("stride-8 pose target") {
    KeypointSet k{};
    k[2] = {17, 40, true};
    auto p = pose_target(k, 64, 32);
    CHECK(p.sizes() == torch::IntArrayRef({18, 8, 4}));
    CHECK(p.dtype() == torch::kFloat);
    CHECK(p[2][5][2].item<float>() == 1.0f);
    CHECK((decode_keypoints(p.to(torch::kDouble), 0.5)[2] == Keypoint{2, 5, true}));
}

TEST_CASE("degraded image keeps shape and loses detail") {
    auto img = testing_support::random_image(2, 16, 16);
    auto d = degrade_image(img);
    CHECK(d.sizes() == img.sizes());
    CHECK_FALSE(torch::equal(d, img));
    auto flat = torch::full({1, 3, 16, 16}, 0.3f);
    CHECK(torch::allclose(degrade_image(flat), flat));
}

TEST_CASE("zero steps returns the initial checkpoint unchanged") {
    auto data = tiny_data(2);
    for (Stage s : {Stage::C2P, Stage::Translator, Stage::Coloring, Stage::Facial, Stage::Clothing}) {
        auto first = train_stage(tiny_config(s, 2), data).checkpoint;
        auto again = train_stage(tiny_config(s, 0), data, first);
        CHECK(same_checkpoint(first, again.checkpoint));
    }
}

TEST_CASE("identical configs train to identical checkpoints") {
    auto data = tiny_data();
    for (Stage s : {Stage::C2P, Stage::Translator, Stage::Coloring, Stage::Facial, Stage::Clothing}) {
        auto a = train_stage(tiny_config(s, 3), data);
        auto b = train_stage(tiny_config(s, 3), data);
        CHECK(same_checkpoint(a.checkpoint, b.checkpoint));
        CHECK(encode_checkpoint(a.checkpoint) == encode_checkpoint(b.checkpoint));
        CHECK(a.trace.size() == 3);
        CHECK(finite_trace(a.trace));
        CHECK(a.checkpoint.step == 3);
        CHECK(a.checkpoint.stage == s);
    }
}

TEST_CASE("resuming continues from the stored step") {
    auto data = tiny_data();
    auto full = train_stage(tiny_config(Stage::Coloring, 4), data);
    auto half = train_stage(tiny_config(Stage::Coloring, 2), data);
    auto rest = train_stage(tiny_config(Stage::Coloring, 2), data, half.checkpoint);
    CHECK(rest.checkpoint.step == 4);
    auto resumed = rest.checkpoint;
    resumed.config = full.checkpoint.config;
    resumed.fingerprint = full.checkpoint.fingerprint;
    CHECK(same_checkpoint(full.checkpoint, resumed));
}

TEST_CASE("training configuration errors") {
    auto data = tiny_data(1);
    auto chained = tiny_config(Stage::Coloring, 1);
    chained.teacher_forcing = false;
    CHECK_THROWS_AS(train_stage(chained, data), ConfigError);
    auto c2p = train_stage(tiny_config(Stage::C2P, 1), data).checkpoint;
    CHECK_THROWS_AS(train_stage(tiny_config(Stage::Translator, 1), data, c2p), ConfigError);
    CHECK_THROWS_AS(train_stage(tiny_config(Stage::C2P, 1), {}), std::invalid_argument);
    auto bad = tiny_config(Stage::C2P, 1);
    bad.height = 72;
    CHECK_THROWS_AS(train_stage(bad, data), ConfigError);
}

TEST_CASE("chained refinement training reads the coloring checkpoint") {
    testing_support::TempDir dir;
    auto data = tiny_data(2);
    save_checkpoint(dir / "coloring.ckpt", train_stage(tiny_config(Stage::Coloring, 1), data).checkpoint);
    auto cfg = tiny_config(Stage::Facial, 2);
    cfg.upstream = (dir / "coloring.ckpt").string();
    auto forced = train_stage(cfg, data);
    CHECK(finite_trace(forced.trace));
    cfg.teacher_forcing = false;
    auto chained = train_stage(cfg, data);
    CHECK(finite_trace(chained.trace));
    CHECK(chained.checkpoint.fingerprint != forced.checkpoint.fingerprint);
}

TEST_CASE("loss traces stay finite over longer runs") {
    auto data = tiny_data(2);
    auto cfg = tiny_config(Stage::Translator, 60);
    cfg.lr = 1e-2;
    CHECK(finite_trace(train_stage(cfg, data).trace));
}

TEST_CASE("pipeline outputs and pose override") {
    auto data = tiny_data(2);
    auto ck = tiny_checkpoints(data);
    const auto& t = data[0];
    auto parsing = one_hot_parsing(t.source.parsing);
    auto synthesized = infer_pipeline(ck, t.clothing, t.clothing_mask, t.source.image, parsing);
    CHECK(synthesized.final.sizes() == torch::IntArrayRef({3, 64, 32}));
    CHECK(synthesized.pose.sizes() == torch::IntArrayRef({18, 8, 4}));
    CHECK(synthesized.parsing.sizes() == torch::IntArrayRef({20, 64, 32}));

    auto override_pose = pose_target(t.target.keypoints, 64, 32);
    auto overridden = infer_pipeline(ck, t.clothing, t.clothing_mask, t.source.image, parsing, override_pose);
    CHECK(overridden.final.sizes() == torch::IntArrayRef({3, 64, 32}));
    CHECK(torch::equal(overridden.pose, override_pose));

    // Outside the generated clothing mask the final image equals the face-corrected I_g.
    auto clothing_g = (parsing_labels(overridden.parsing) == channel(Label::TopClothes));
    auto outside = clothing_g.logical_not().unsqueeze(0).expand({3, 64, 32});
    auto face_g = (parsing_labels(overridden.parsing) == channel(Label::Face)) |
                  (parsing_labels(overridden.parsing) == channel(Label::Hair)) |
                  (parsing_labels(overridden.parsing) == channel(Label::Neck));
    auto plain = outside & face_g.logical_not().unsqueeze(0).expand({3, 64, 32});
    CHECK(torch::equal(overridden.final.masked_select(plain), overridden.generated.masked_select(plain)));

    PipelineCheckpoints missing = ck;
    missing.coloring.reset();
    CHECK_THROWS_AS(Pipeline{missing}, ConfigError);
    PipelineCheckpoints no_c2p = ck;
    no_c2p.c2p.reset();
    CHECK_THROWS_AS(Pipeline{no_c2p}, ConfigError);
    Pipeline override_only(no_c2p, false);
    CHECK(torch::equal(override_only.run(t.clothing, t.clothing_mask, t.source.image, parsing, override_pose).final,
                       overridden.final));
}
