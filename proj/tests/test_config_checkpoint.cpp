#include "support.hpp"

#include "tryon/checkpoint.hpp"
#include "tryon/config.hpp"

#include <fstream>

#include "doctest.h"

using namespace tryon;

TEST_CASE("config text parsing") {
    auto c = parse_config(
        "# stage setup\n"
        "stage = translator\n"
        "\n"
        "steps=12   # trailing comment\n"
        "  lr = 2e-5\n"
        "teacher_forcing = false\n"
        "upstream = c2p.ckpt\n");
    CHECK(c.stage == Stage::Translator);
    CHECK(c.steps == 12);
    REQUIRE(c.lr.has_value());
    CHECK(*c.lr == 2e-5);
    CHECK_FALSE(c.teacher_forcing);
    CHECK(c.upstream == "c2p.ckpt");
    CHECK(c.batch == 4);
}

TEST_CASE("config defaults") {
    TrainConfig c;
    CHECK(c.adam_beta1 == 0.5);
    CHECK(c.adam_beta2 == 0.999);
    CHECK(c.effective_lr() == 2e-5);
    c.stage = Stage::Translator;
    CHECK(c.effective_lr() == 2e-4);
    CHECK(c.c2p.lambda_sparsity == 0.00008);
    CHECK(c.height == 96);
    CHECK(c.width == 64);
}

TEST_CASE("config errors name the offending key") {
    try {
        parse_config("stage = c2p\nlearning_rate = 1\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("steps = many\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("stage = c3p\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("just words\n"), ConfigError);
    auto bad_lr = parse_config("lr = -1\n");
    CHECK_THROWS_AS(bad_lr.validate(), ConfigError);
    auto bad_dims = parse_config("height = 100\n");
    CHECK_THROWS_AS(bad_dims.validate(), ConfigError);
}

TEST_CASE("overrides replace file values") {
    auto c = parse_config("lr = 1e-3\nseed = 4\n");
    apply_override(c, "lr=2e-5");
    apply_override(c, "clothing_fusion=adain");
    CHECK(*c.lr == 2e-5);
    CHECK(c.seed == 4);
    CHECK(c.clothing.fusion == ClothingFusion::AdaIN);
    CHECK_THROWS_AS(apply_override(c, "nope=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "lr"), ConfigError);
}

TEST_CASE("canonical text round trips and keys are all settable") {
    TrainConfig c;
    c.stage = Stage::Clothing;
    c.seed = 77;
    auto again = parse_config(c.canonical());
    CHECK(again.canonical() == c.canonical());
    CHECK(again.fingerprint() == c.fingerprint());
    for (const auto& key : config_keys()) {
        CHECK(is_config_key(key));
        TrainConfig copy = c;
        CHECK_NOTHROW(copy.set(key, c.get(key)));
    }
    CHECK(std::is_sorted(config_keys().begin(), config_keys().end()));
}

TEST_CASE("fingerprint tracks every setting including teacher forcing") {
    TrainConfig a;
    TrainConfig b = a;
    CHECK(a.fingerprint() == b.fingerprint());
    b.teacher_forcing = false;
    CHECK(a.fingerprint() != b.fingerprint());
    TrainConfig c = a;
    c.seed = 1;
    CHECK(a.fingerprint() != c.fingerprint());
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
}

namespace {

StageCheckpoint sample_checkpoint() {
    StageCheckpoint ck;
    ck.stage = Stage::Coloring;
    ck.step = 42;
    TrainConfig cfg;
    cfg.stage = Stage::Coloring;
    ck.config = cfg.canonical();
    ck.fingerprint = cfg.fingerprint();
    ck.parameters.push_back({"generator.w", torch::randn({3, 2, 2})});
    ck.parameters.push_back({"generator.b", torch::randn({5}, torch::kDouble)});
    ck.parameters.push_back({"scalar", torch::tensor(3.5f)});
    ck.optimizer.push_back({"generator.w.step", torch::tensor(int64_t{7})});
    return ck;
}

}  // namespace

TEST_CASE("checkpoint save load save reproduces identical bytes") {
    testing_support::TempDir dir;
    auto ck = sample_checkpoint();
    save_checkpoint(dir / "a.ckpt", ck);
    auto loaded = load_checkpoint(dir / "a.ckpt");
    CHECK(same_checkpoint(ck, loaded));
    save_checkpoint(dir / "b.ckpt", loaded);
    auto a = testing_support::read_bytes(dir / "a.ckpt");
    CHECK(a == testing_support::read_bytes(dir / "b.ckpt"));
    CHECK(a.substr(0, 8) == "TFTISCK1");
    CHECK(loaded.step == 42);
    CHECK(loaded.stage == Stage::Coloring);
    REQUIRE(loaded.find_parameter("generator.b") != nullptr);
    CHECK(loaded.find_parameter("generator.b")->dtype() == torch::kDouble);
    CHECK(loaded.find_parameter("missing") == nullptr);
}

TEST_CASE("corrupt checkpoints are rejected") {
    auto bytes = encode_checkpoint(sample_checkpoint());
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad_magic), CheckpointError);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
    CHECK_THROWS_AS(decode_checkpoint(""), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.ckpt"), CheckpointError);
}
