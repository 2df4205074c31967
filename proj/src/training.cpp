#include "tryon/training.hpp"

#include "tryon/losses.hpp"
#include "tryon/tensors.hpp"

#include <random>

namespace tryon {

namespace {

namespace F = torch::nn::functional;

std::optional<Stage> upstream_stage(Stage stage) {
    switch (stage) {
        case Stage::C2P: return std::nullopt;
        case Stage::Translator: return Stage::C2P;
        case Stage::Coloring: return Stage::Translator;
        case Stage::Facial:
        case Stage::Clothing: return Stage::Coloring;
    }
    return std::nullopt;
}

void append_module(std::vector<NamedTensor>& out, const std::string& prefix, const torch::nn::Module& m) {
    for (const auto& p : m.named_parameters()) out.push_back({prefix + p.key(), p.value().detach().clone()});
    for (const auto& b : m.named_buffers()) out.push_back({prefix + b.key(), b.value().detach().clone()});
}

void import_module(torch::nn::Module& m, const std::string& prefix,
                   const std::vector<NamedTensor>& params, size_t& used) {
    torch::NoGradGuard guard;
    auto assign = [&](const std::string& name, torch::Tensor& dst) {
        const std::string full = prefix + name;
        for (const auto& p : params) {
            if (p.name != full) continue;
            if (!p.value.sizes().equals(dst.sizes()) || p.value.scalar_type() != dst.scalar_type()) {
                throw CheckpointError("checkpoint tensor '" + full + "' has the wrong shape or dtype");
            }
            dst.copy_(p.value);
            ++used;
            return;
        }
        throw CheckpointError("checkpoint lacks tensor '" + full + "'");
    };
    for (auto& p : m.named_parameters()) assign(p.key(), p.value());
    for (auto& b : m.named_buffers()) assign(b.key(), b.value());
}

torch::optim::Adam make_adam(const std::shared_ptr<torch::nn::Module>& m, const TrainConfig& c) {
    return torch::optim::Adam(m->parameters(), torch::optim::AdamOptions(c.effective_lr())
                                                   .betas({c.adam_beta1, c.adam_beta2}));
}

void export_adam(std::vector<NamedTensor>& out, const std::string& prefix, const torch::nn::Module& m,
                 torch::optim::Adam& opt) {
    auto& state = opt.state();
    for (const auto& p : m.named_parameters()) {
        auto it = state.find(p.value().unsafeGetTensorImpl());
        if (it == state.end()) continue;
        const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
        const std::string base = prefix + p.key();
        out.push_back({base + ".step", torch::tensor(s.step(), torch::kLong)});
        out.push_back({base + ".exp_avg", s.exp_avg().detach().clone()});
        out.push_back({base + ".exp_avg_sq", s.exp_avg_sq().detach().clone()});
    }
}

void import_adam(const std::vector<NamedTensor>& blob, const std::string& prefix, const torch::nn::Module& m,
                 torch::optim::Adam& opt) {
    auto find = [&](const std::string& name) -> const torch::Tensor* {
        for (const auto& t : blob) {
            if (t.name == name) return &t.value;
        }
        return nullptr;
    };
    for (const auto& p : m.named_parameters()) {
        const std::string base = prefix + p.key();
        const auto* step = find(base + ".step");
        if (!step) continue;
        const auto* avg = find(base + ".exp_avg");
        const auto* sq = find(base + ".exp_avg_sq");
        if (!avg || !sq || !avg->sizes().equals(p.value().sizes()) || !sq->sizes().equals(p.value().sizes())) {
            throw CheckpointError("optimizer state for '" + base + "' is incomplete or mis-shaped");
        }
        auto s = std::make_unique<torch::optim::AdamParamState>();
        s->step(step->item<int64_t>());
        s->exp_avg(avg->clone());
        s->exp_avg_sq(sq->clone());
        opt.state()[p.value().unsafeGetTensorImpl()] = std::move(s);
    }
}

// Epoch-wise shuffled index stream with a portable shuffle.
class Batcher {
public:
    Batcher(size_t n, uint64_t seed) : n_(n), engine_(seed ^ 0x5851f42d4c957f2dULL) {}

    torch::Tensor next(int64_t batch) {
        std::vector<int64_t> idx;
        for (int64_t i = 0; i < batch; ++i) {
            if (pos_ == order_.size()) reshuffle();
            idx.push_back(order_[pos_++]);
        }
        return torch::tensor(idx, torch::kLong);
    }

    void skip(int64_t steps, int64_t batch) {
        for (int64_t s = 0; s < steps; ++s) next(batch);
    }

private:
    void reshuffle() {
        order_.resize(n_);
        for (size_t i = 0; i < n_; ++i) order_[i] = static_cast<int64_t>(i);
        for (size_t i = n_; i > 1; --i) std::swap(order_[i - 1], order_[engine_() % i]);
        pos_ = 0;
    }

    size_t n_;
    std::mt19937_64 engine_;
    std::vector<int64_t> order_;
    size_t pos_ = 0;
};

// Whole-dataset tensors, stacked along a leading batch dimension.
struct Inputs {
    torch::Tensor clothing, clothing_mask;
    torch::Tensor source, target;
    torch::Tensor source_parsing, target_parsing;  // one-hot
    torch::Tensor target_pose;                     // stride-8 heatmaps
    torch::Tensor source_without_clothes;
    torch::Tensor pose_input;     // translator: pose fed to M_in
    torch::Tensor parsing_input;  // coloring: M_g
    torch::Tensor generated;      // refinement: I_g
};

Inputs stack_inputs(const std::vector<Triplet>& data, const TrainConfig& c) {
    std::vector<torch::Tensor> cl, cm, src, tgt, sp, tp, pose;
    for (const auto& t : data) {
        if (t.clothing.size(1) != c.height || t.clothing.size(2) != c.width) {
            throw std::invalid_argument("triplet " + t.id + " is " + std::to_string(t.clothing.size(1)) + "x" +
                                        std::to_string(t.clothing.size(2)) + ", config expects " +
                                        std::to_string(c.height) + "x" + std::to_string(c.width));
        }
        cl.push_back(t.clothing);
        cm.push_back(t.clothing_mask.to(torch::kFloat));
        src.push_back(t.source.image);
        tgt.push_back(t.target.image);
        sp.push_back(one_hot_parsing(t.source.parsing));
        tp.push_back(one_hot_parsing(t.target.parsing));
        pose.push_back(pose_target(t.target.keypoints, c.height, c.width));
    }
    Inputs in;
    in.clothing = torch::stack(cl);
    in.clothing_mask = torch::stack(cm);
    in.source = torch::stack(src);
    in.target = torch::stack(tgt);
    in.source_parsing = torch::stack(sp);
    in.target_parsing = torch::stack(tp);
    in.target_pose = torch::stack(pose);
    in.source_without_clothes = remove_clothing(in.source, in.source_parsing);
    in.pose_input = in.target_pose;
    in.parsing_input = in.target_parsing;
    return in;
}

// Runs `fn` over the dataset in chunks without gradients and concatenates.
template <class Fn>
torch::Tensor chunked(int64_t n, int64_t chunk, Fn fn) {
    torch::NoGradGuard guard;
    std::vector<torch::Tensor> parts;
    for (int64_t i = 0; i < n; i += chunk) {
        parts.push_back(fn(torch::arange(i, std::min(n, i + chunk), torch::kLong)));
    }
    return torch::cat(parts);
}

torch::Tensor hard_parsing(const torch::Tensor& soft) {
    return torch::one_hot(parsing_labels(soft), kNumParsingChannels)
        .permute({0, 3, 1, 2})
        .to(torch::kFloat)
        .contiguous();
}

// Feeds upstream outputs into `in` according to the teacher-forcing mode.
void attach_upstream(Inputs& in, const TrainConfig& c) {
    const auto up = upstream_stage(c.stage);
    if (!up) return;
    if (c.upstream.empty()) {
        if (!c.teacher_forcing) {
            throw ConfigError(std::string("stage ") + std::string(stage_name(c.stage)) +
                              " without teacher forcing needs an upstream " + std::string(stage_name(*up)) +
                              " checkpoint (set upstream = <path>)");
        }
        if (c.stage == Stage::Facial || c.stage == Stage::Clothing) in.generated = degrade_image(in.target);
        return;
    }
    StageCheckpoint ck;
    try {
        ck = load_checkpoint(c.upstream);
    } catch (const CheckpointError& e) {
        throw ConfigError(std::string("cannot load upstream checkpoint: ") + e.what());
    }
    if (ck.stage != *up) {
        throw ConfigError("upstream checkpoint " + c.upstream + " is a " + std::string(stage_name(ck.stage)) +
                          " checkpoint; " + std::string(stage_name(c.stage)) + " needs " +
                          std::string(stage_name(*up)));
    }
    auto net = networks_from_checkpoint(ck);
    net.train(false);
    const int64_t n = in.clothing.size(0);
    const int64_t chunk = std::max<int64_t>(1, c.batch);
    switch (c.stage) {
        case Stage::Translator:
            if (!c.teacher_forcing) {
                in.pose_input = chunked(n, chunk, [&](const torch::Tensor& i) {
                    return net.c2p->forward(in.clothing.index_select(0, i)).back();
                });
            }
            break;
        case Stage::Coloring:
            if (!c.teacher_forcing) {
                in.parsing_input = chunked(n, chunk, [&](const torch::Tensor& i) {
                    auto m_in = translator_input(in.source_parsing.index_select(0, i),
                                                 in.target_pose.index_select(0, i),
                                                 in.clothing_mask.index_select(0, i));
                    return hard_parsing(net.translator->forward(m_in));
                });
            }
            break;
        case Stage::Facial:
        case Stage::Clothing:
            in.generated = chunked(n, chunk, [&](const torch::Tensor& i) {
                return coloring_forward(net.unet, in.clothing.index_select(0, i),
                                        in.source_without_clothes.index_select(0, i),
                                        in.target_parsing.index_select(0, i));
            });
            break;
        case Stage::C2P: break;
    }
}

struct StepTerms {
    torch::Tensor generator;
    torch::Tensor discriminator;  // undefined for c2p
    torch::Tensor reconstruction;
};

class StageRunner {
public:
    StageRunner(StageNetworks& net, const Inputs& in)
        : net_(net), in_(in), c_(net.config),
          extractor_(PerceptualExtractor::vgg19(static_cast<int>(c_.perceptual_width), c_.perceptual_seed)) {}

    StepTerms run(const torch::Tensor& idx, uint64_t step_seed) {
        auto sel = [&](const torch::Tensor& t) { return t.index_select(0, idx); };
        StepTerms out;
        switch (c_.stage) {
            case Stage::C2P: {
                auto preds = net_.c2p->forward(sel(in_.clothing));
                auto target = sel(in_.target_pose);
                out.generator = c2p_loss(preds, target, c_.c2p.lambda_sparsity);
                out.reconstruction = c2p_loss(preds, target, 0.0);
                break;
            }
            case Stage::Translator: {
                auto m_in = translator_input(sel(in_.source_parsing), sel(in_.pose_input), sel(in_.clothing_mask));
                auto target = sel(in_.target_parsing);
                auto generated = net_.translator->forward(m_in);
                auto gan = translator_gan_loss(net_.pair_discriminator, m_in, generated, target);
                out.reconstruction = translator_bce_loss(generated, target);
                out.generator = translator_objective(gan.generator, out.reconstruction, c_.translator.lambda_bce);
                out.discriminator = gan.discriminator;
                break;
            }
            case Stage::Coloring: {
                auto parsing = sel(in_.parsing_input);
                auto target = sel(in_.target);
                auto generated =
                    coloring_forward(net_.unet, sel(in_.clothing), sel(in_.source_without_clothes), parsing);
                auto gan = coloring_gan_losses(net_.pair_discriminator, generated, target, sel(in_.source));
                out.reconstruction =
                    coloring_l1_loss(generated, select_channels(parsing, MaskGroup::Foreground), target,
                                     select_channels(sel(in_.target_parsing), MaskGroup::Foreground));
                out.generator = coloring_objective(gan.generator, out.reconstruction, c_.coloring.lambda_l1);
                out.discriminator = gan.discriminator;
                break;
            }
            case Stage::Facial: {
                auto target_parsing = sel(in_.target_parsing);
                auto source_parsing = sel(in_.source_parsing);
                FacialMasks masks{select_channels(target_parsing, MaskGroup::Face),
                                  select_channels(source_parsing, MaskGroup::Face),
                                  select_channels(target_parsing, MaskGroup::Foreground),
                                  select_channels(target_parsing, MaskGroup::Foreground)};
                auto generated = sel(in_.generated);
                auto source = sel(in_.source);
                auto residual = facial_forward(net_.unet, mask_image(generated, masks.face_generated),
                                               mask_image(source, masks.face_source));
                auto t = facial_objective(residual, generated, sel(in_.target), source, masks, c_.facial.lambdas,
                                          net_.pair_discriminator, extractor_);
                out.generator = t.total;
                out.discriminator = t.discriminator;
                out.reconstruction = t.face_l1;
                break;
            }
            case Stage::Clothing: {
                auto clothing_mask = select_channels(sel(in_.target_parsing), MaskGroup::Clothing);
                auto generated = sel(in_.generated);
                auto refined = net_.refiner->forward(sel(in_.clothing), mask_image(generated, clothing_mask));
                auto t = clothing_objective(refined, sel(in_.target), generated, {clothing_mask, clothing_mask},
                                            c_.clothing.lambdas, net_.context_discriminator, extractor_,
                                            step_seed);
                out.generator = t.total;
                out.discriminator = t.discriminator;
                out.reconstruction = t.l1;
                break;
            }
        }
        return out;
    }

    double mean_reconstruction() {
        torch::NoGradGuard guard;
        const int64_t n = in_.clothing.size(0);
        const int64_t chunk = std::max<int64_t>(1, c_.batch);
        double total = 0;
        for (int64_t i = 0; i < n; i += chunk) {
            auto idx = torch::arange(i, std::min(n, i + chunk), torch::kLong);
            total += run(idx, c_.seed).reconstruction.item<double>() * static_cast<double>(idx.size(0));
        }
        return total / static_cast<double>(n);
    }

private:
    StageNetworks& net_;
    const Inputs& in_;
    const TrainConfig& c_;
    PerceptualExtractor extractor_;
};

}  // namespace

std::shared_ptr<torch::nn::Module> StageNetworks::generator() const {
    switch (config.stage) {
        case Stage::C2P: return c2p.ptr();
        case Stage::Translator: return translator.ptr();
        case Stage::Coloring:
        case Stage::Facial: return unet.ptr();
        case Stage::Clothing: return refiner.ptr();
    }
    return nullptr;
}

std::shared_ptr<torch::nn::Module> StageNetworks::discriminator() const {
    switch (config.stage) {
        case Stage::C2P: return nullptr;
        case Stage::Translator:
        case Stage::Coloring:
        case Stage::Facial: return pair_discriminator.ptr();
        case Stage::Clothing: return context_discriminator.ptr();
    }
    return nullptr;
}

void StageNetworks::train(bool on) {
    generator()->train(on);
    if (auto d = discriminator()) d->train(on);
}

StageNetworks build_networks(const TrainConfig& config) {
    config.validate();
    torch::manual_seed(config.seed);
    StageNetworks n;
    n.config = config;
    switch (config.stage) {
        case Stage::C2P:
            n.c2p = Cloth2Pose(config.c2p);
            break;
        case Stage::Translator:
            n.translator = TranslatorGenerator(config.translator);
            n.pair_discriminator = make_translator_discriminator(config.translator);
            break;
        case Stage::Coloring:
            n.unet = make_coloring_generator(config.coloring, config.height, config.width);
            n.pair_discriminator = make_coloring_discriminator(config.coloring);
            break;
        case Stage::Facial:
            n.unet = make_facial_generator(config.facial, config.height, config.width);
            n.pair_discriminator = make_facial_discriminator(config.facial);
            break;
        case Stage::Clothing:
            n.refiner = ClothingRefiner(config.clothing);
            n.context_discriminator = ContextDiscriminator(config.clothing.disc_width);
            break;
    }
    return n;
}

std::vector<NamedTensor> export_parameters(const StageNetworks& n) {
    std::vector<NamedTensor> out;
    append_module(out, "generator.", *n.generator());
    if (auto d = n.discriminator()) append_module(out, "discriminator.", *d);
    return out;
}

void import_parameters(StageNetworks& n, const std::vector<NamedTensor>& params) {
    size_t used = 0;
    import_module(*n.generator(), "generator.", params, used);
    if (auto d = n.discriminator()) import_module(*d, "discriminator.", params, used);
    if (used != params.size()) throw CheckpointError("checkpoint holds tensors the networks do not have");
}

TrainConfig checkpoint_config(const StageCheckpoint& ck) {
    TrainConfig c = parse_config(ck.config);
    if (c.stage != ck.stage) throw CheckpointError("checkpoint manifest and config disagree on the stage");
    return c;
}

StageNetworks networks_from_checkpoint(const StageCheckpoint& ck) {
    auto net = build_networks(checkpoint_config(ck));
    import_parameters(net, ck.parameters);
    return net;
}

torch::Tensor pose_target(const KeypointSet& keypoints, int64_t height, int64_t width) {
    const auto coarse = downscale_keypoints(keypoints, kFeatureStride);
    return build_keypoint_tensor(coarse, default_sigma(height, width) / kFeatureStride, height / kFeatureStride,
                                 width / kFeatureStride)
        .to(torch::kFloat);
}

torch::Tensor degrade_image(const torch::Tensor& images) {
    auto small = F::avg_pool2d(images, F::AvgPool2dFuncOptions(2));
    return F::interpolate(small, F::InterpolateFuncOptions()
                                     .size(std::vector<int64_t>{images.size(-2), images.size(-1)})
                                     .mode(torch::kBilinear)
                                     .align_corners(false));
}

TrainResult train_stage(const TrainConfig& config, const std::vector<Triplet>& data,
                        const std::optional<StageCheckpoint>& init) {
    config.validate();
    if (init && init->stage != config.stage) {
        throw ConfigError("initial checkpoint is for stage " + std::string(stage_name(init->stage)) +
                          ", config trains " + std::string(stage_name(config.stage)));
    }
    TrainResult result;
    if (config.steps == 0 && init) {
        result.checkpoint = *init;
        return result;
    }
    if (data.empty()) throw std::invalid_argument("train_stage: empty dataset");

    Inputs in = stack_inputs(data, config);
    attach_upstream(in, config);

    auto net = build_networks(config);
    auto gen = net.generator();
    auto disc = net.discriminator();
    auto opt_g = make_adam(gen, config);
    std::optional<torch::optim::Adam> opt_d;
    if (disc) opt_d.emplace(make_adam(disc, config));

    int64_t start = 0;
    if (init) {
        import_parameters(net, init->parameters);
        import_adam(init->optimizer, "generator.", *gen, opt_g);
        if (disc) import_adam(init->optimizer, "discriminator.", *disc, *opt_d);
        start = init->step;
    }

    StageRunner runner(net, in);
    Batcher batcher(data.size(), config.seed);
    batcher.skip(start, config.batch);
    net.train(true);
    result.initial_reconstruction = runner.mean_reconstruction();

    for (int64_t s = 0; s < config.steps; ++s) {
        const int64_t step = start + s;
        auto idx = batcher.next(config.batch);
        const uint64_t step_seed = config.seed * 0x9e3779b97f4a7c15ULL + static_cast<uint64_t>(step);
        auto terms = runner.run(idx, step_seed);

        opt_g.zero_grad();
        if (opt_d) opt_d->zero_grad();
        terms.generator.backward();
        if (opt_d) {
            opt_d->zero_grad();
            terms.discriminator.backward();
        }
        opt_g.step();
        if (opt_d) opt_d->step();

        LossRecord rec;
        rec.step = step;
        rec.generator = terms.generator.item<double>();
        rec.discriminator = terms.discriminator.defined() ? terms.discriminator.item<double>() : 0.0;
        rec.reconstruction = terms.reconstruction.item<double>();
        result.trace.push_back(rec);
    }
    result.final_reconstruction = runner.mean_reconstruction();

    StageCheckpoint& ck = result.checkpoint;
    ck.stage = config.stage;
    ck.step = start + config.steps;
    ck.fingerprint = config.fingerprint();
    ck.config = config.canonical();
    ck.parameters = export_parameters(net);
    export_adam(ck.optimizer, "generator.", *gen, opt_g);
    if (disc) export_adam(ck.optimizer, "discriminator.", *disc, *opt_d);
    return result;
}

}  // namespace tryon
