#include "tryon/pipeline.hpp"

#include "tryon/tensors.hpp"

namespace tryon {

namespace {

StageNetworks require(const std::optional<StageCheckpoint>& ck, Stage stage) {
    if (!ck) throw ConfigError(std::string("missing ") + std::string(stage_name(stage)) + " checkpoint");
    if (ck->stage != stage) {
        throw ConfigError("expected a " + std::string(stage_name(stage)) + " checkpoint, got " +
                          std::string(stage_name(ck->stage)));
    }
    auto net = networks_from_checkpoint(*ck);
    net.train(false);
    return net;
}

torch::Tensor batched(const torch::Tensor& t, int64_t unbatched_dim) {
    return t.dim() == unbatched_dim ? t.unsqueeze(0) : t;
}

}  // namespace

Pipeline::Pipeline(const PipelineCheckpoints& ck, bool require_c2p)
    : translator_(require(ck.translator, Stage::Translator)),
      coloring_(require(ck.coloring, Stage::Coloring)),
      facial_(require(ck.facial, Stage::Facial)),
      clothing_(require(ck.clothing, Stage::Clothing)) {
    if (ck.c2p || require_c2p) c2p_ = require(ck.c2p, Stage::C2P);
}

PipelineResult Pipeline::run(const torch::Tensor& clothing, const torch::Tensor& clothing_mask,
                             const torch::Tensor& source, const torch::Tensor& source_parsing,
                             const std::optional<torch::Tensor>& pose_override) {
    torch::NoGradGuard guard;
    check_image(clothing, "infer_pipeline clothing");
    check_same_shape(clothing, source, "infer_pipeline");
    check_same_spatial(clothing, clothing_mask, "infer_pipeline");
    check_same_spatial(clothing, source_parsing, "infer_pipeline");
    const bool unbatched = clothing.dim() == 3;
    auto c_t = batched(clothing, 3);
    auto m_c = batched(clothing_mask, 2).to(torch::kFloat);
    auto i_s = batched(source, 3);
    auto m_s = batched(source_parsing, 3).to(torch::kFloat);

    PipelineResult r;
    torch::Tensor pose;
    if (pose_override) {
        r.pose = *pose_override;
        pose = batched(*pose_override, 3).to(torch::kFloat);
    } else {
        if (!c2p_) throw ConfigError("missing c2p checkpoint");
        pose = c2p_->c2p->forward(c_t).back();
        r.pose = unbatched ? pose.squeeze(0) : pose;
    }

    auto m_g = translator_.translator->forward(translator_input(m_s, pose, m_c));
    auto hard = torch::one_hot(parsing_labels(m_g), kNumParsingChannels).permute({0, 3, 1, 2}).to(torch::kFloat);
    auto i_g = coloring_forward(coloring_.unet, c_t, remove_clothing(i_s, m_s), hard);

    auto face_g = select_channels(hard, MaskGroup::Face);
    auto clothing_g = select_channels(hard, MaskGroup::Clothing);
    auto d = facial_forward(facial_.unet, mask_image(i_g, face_g),
                            mask_image(i_s, select_channels(m_s, MaskGroup::Face)));
    auto c_r = clothing_.refiner->forward(c_t, mask_image(i_g, clothing_g));
    auto face_fixed = apply_facial_residual(d, i_g, face_g).clamp(-1.0, 1.0);
    auto final = composite_refined(c_r, face_fixed, clothing_g);

    auto out = [&](const torch::Tensor& t) { return unbatched ? t.squeeze(0) : t; };
    r.parsing = out(m_g);
    r.generated = out(i_g);
    r.residual = out(d);
    r.refined = out(c_r);
    r.final = out(final);
    return r;
}

PipelineResult infer_pipeline(const PipelineCheckpoints& checkpoints, const torch::Tensor& clothing,
                              const torch::Tensor& clothing_mask, const torch::Tensor& source,
                              const torch::Tensor& source_parsing,
                              const std::optional<torch::Tensor>& pose_override) {
    Pipeline p(checkpoints, !pose_override.has_value());
    return p.run(clothing, clothing_mask, source, source_parsing, pose_override);
}

PipelineCheckpoints load_pipeline_checkpoints(const std::filesystem::path& dir) {
    PipelineCheckpoints ck;
    auto maybe = [&](const char* name, std::optional<StageCheckpoint>& slot) {
        const auto path = dir / name;
        if (std::filesystem::exists(path)) slot = load_checkpoint(path);
    };
    maybe("c2p.ckpt", ck.c2p);
    maybe("translator.ckpt", ck.translator);
    maybe("coloring.ckpt", ck.coloring);
    maybe("facial.ckpt", ck.facial);
    maybe("clothing.ckpt", ck.clothing);
    return ck;
}

}  // namespace tryon
