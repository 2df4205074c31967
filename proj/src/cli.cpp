#include "tryon/cli.hpp"

#include "tryon/checkpoint.hpp"
#include "tryon/config.hpp"
#include "tryon/dataset.hpp"
#include "tryon/evaluation.hpp"
#include "tryon/image_io.hpp"
#include "tryon/pipeline.hpp"
#include "tryon/retrieval.hpp"
#include "tryon/synthetic.hpp"
#include "tryon/training.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tryon {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<std::string_view, Verb>, 6> kVerbs = {{{"gen-data", Verb::GenData},
                                                                     {"train", Verb::Train},
                                                                     {"infer", Verb::Infer},
                                                                     {"eval", Verb::Eval},
                                                                     {"retrieve", Verb::Retrieve},
                                                                     {"grid", Verb::Grid}}};

class HelpRequested : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

const char* kUsage =
    "usage: tryon <verb> [options]\n"
    "verbs: gen-data, train, infer, eval, retrieve, grid\n"
    "run 'tryon <verb> --help' for the options of a verb\n";

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string padded_id(int64_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(i));
    return buf;
}

std::vector<Triplet> select_triplets(const Dataset& ds, const std::string& id) {
    if (id.empty()) return load_all(ds);
    const auto& ids = ds.ids();
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw UsageError("no triplet '" + id + "' in " + ds.root().string());
    return {ds.load(static_cast<size_t>(it - ids.begin()))};
}

int run_gen_data(const CommandPlan& p, std::ostream& out, std::ostream& log) {
    if (p.count < 0) throw UsageError("--count must be >= 0");
    const uint64_t seed = p.seed.value_or(0);
    fs::create_directories(p.out);
    for (int64_t i = 0; i < p.count; ++i) {
        auto t = generate_synthetic_triplet(seed * 1000003ULL + static_cast<uint64_t>(i), p.height, p.width);
        t.id = padded_id(i);
        save_triplet(p.out, t);
    }
    log << "generated " << p.count << " triplets in " << p.out << "\n";
    out << p.count << "\n";
    return 0;
}

int run_train(const CommandPlan& p, std::ostream& out, std::ostream& log) {
    TrainConfig config = p.config_path.empty() ? TrainConfig{} : load_config(p.config_path);
    for (const auto& [k, v] : p.overrides) config.set(k, v);
    if (p.seed) config.seed = *p.seed;
    config.validate();
    const auto data = load_all(load_dataset(p.data));
    std::optional<StageCheckpoint> init;
    if (!p.init.empty()) init = load_checkpoint(p.init);
    log << "training " << stage_name(config.stage) << " for " << config.steps << " steps on " << data.size()
        << " triplets\n";
    auto result = train_stage(config, data, init);
    save_checkpoint(p.out, result.checkpoint);
    if (!p.trace.empty()) {
        std::ofstream tr(p.trace, std::ios::binary);
        if (!tr) throw UsageError("cannot write " + p.trace);
        tr << "step,generator,discriminator,reconstruction\n";
        char buf[128];
        for (const auto& r : result.trace) {
            std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g\n", static_cast<long long>(r.step), r.generator,
                          r.discriminator, r.reconstruction);
            tr << buf;
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "stage=%s step=%lld reconstruction_start=%.6g reconstruction_end=%.6g",
                  std::string(stage_name(config.stage)).c_str(), static_cast<long long>(result.checkpoint.step),
                  result.initial_reconstruction, result.final_reconstruction);
    out << buf << "\n";
    return 0;
}

void write_pose_json(const fs::path& path, const torch::Tensor& pose) {
    const auto kps = decode_keypoints(pose, 0.5);
    nlohmann::json arr = nlohmann::json::array();
    for (int k = 0; k < kNumJoints; ++k) {
        arr.push_back({{"joint", std::string(joint_name(static_cast<Joint>(k)))},
                       {"x", kps[k].x},
                       {"y", kps[k].y},
                       {"visible", kps[k].visible}});
    }
    std::ofstream out(path, std::ios::binary);
    out << arr.dump(1) << "\n";
}

int run_infer(const CommandPlan& p, std::ostream& out, std::ostream& log) {
    const auto triplets = select_triplets(load_dataset(p.data), p.id);
    Pipeline pipeline(load_pipeline_checkpoints(p.checkpoints), p.pose_file.empty());
    std::optional<KeypointSet> override_kps;
    if (!p.pose_file.empty()) override_kps = read_keypoints_json(p.pose_file);
    fs::create_directories(p.out);
    for (const auto& t : triplets) {
        std::optional<torch::Tensor> pose;
        if (override_kps) pose = pose_target(*override_kps, t.clothing.size(1), t.clothing.size(2));
        auto r = pipeline.run(t.clothing, t.clothing_mask, t.source.image, one_hot_parsing(t.source.parsing), pose);
        const fs::path dir = fs::path(p.out) / t.id;
        fs::create_directories(dir);
        write_rgb_png(dir / "final.png", r.final);
        write_rgb_png(dir / "generated.png", r.generated);
        write_rgb_png(dir / "refined.png", r.refined);
        write_label_png(dir / "parsing.png", parsing_labels(r.parsing));
        write_pose_json(dir / "pose.json", r.pose);
        out << t.id << " pose=" << (override_kps ? "override" : "synthesized") << " final=" << (dir / "final.png").string()
            << "\n";
    }
    log << "inferred " << triplets.size() << " triplets\n";
    return 0;
}

std::vector<fs::path> png_files(const fs::path& root) {
    if (!fs::is_directory(root)) throw UsageError("not a directory: " + root.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(fs::relative(e.path(), root));
    }
    std::sort(files.begin(), files.end());
    return files;
}

int run_eval(const CommandPlan& p, std::ostream& out, std::ostream& log) {
    const auto files = png_files(p.pred);
    if (files.empty()) throw UsageError("no PNG files under " + p.pred);
    std::vector<torch::Tensor> preds;
    double ssim_total = 0;
    for (const auto& rel : files) {
        const fs::path ref = fs::path(p.ref) / rel;
        if (!fs::exists(ref)) throw UsageError("reference image missing: " + ref.string());
        auto a = read_rgb_png(fs::path(p.pred) / rel);
        auto b = read_rgb_png(ref);
        ssim_total += ssim(a, b);
        preds.push_back(a);
    }
    MetricReport report;
    report.n = static_cast<int64_t>(preds.size());
    report.ssim = ssim_total / static_cast<double>(preds.size());
    report.splits = std::max(1, std::min<int>(p.splits, static_cast<int>(preds.size())));
    log << "training texture classifier\n";
    TextureClassifierAdapter classifier(
        train_texture_classifier(p.seed.value_or(0), preds.front().size(1), preds.front().size(2)));
    const auto is = inception_score(preds, classifier, report.splits);
    report.is_mean = is.mean;
    report.is_std = is.std;
    const std::string line = format_report(report);
    out << line << "\n";
    if (!p.out.empty()) {
        std::ofstream f(p.out, std::ios::binary);
        if (!f) throw UsageError("cannot write " + p.out);
        f << line << "\n";
    }
    return 0;
}

int run_retrieve(const CommandPlan& p, std::ostream& out, std::ostream&) {
    const auto ck = load_checkpoint(p.checkpoint);
    if (ck.stage != Stage::C2P) throw UsageError("retrieve needs a c2p checkpoint, got " + std::string(stage_name(ck.stage)));
    auto net = networks_from_checkpoint(ck);
    net.train(false);
    const auto ds = load_dataset(p.data);
    std::vector<RetrievalEntry> db;
    std::optional<torch::Tensor> query;
    for (size_t i = 0; i < ds.size(); ++i) {
        const auto t = ds.load(i);
        auto f = clothing_features(net.c2p, t.clothing).squeeze(0);
        if (t.id == p.query) query = f;
        db.push_back({f, static_cast<int64_t>(i)});
    }
    if (!query) throw UsageError("no triplet '" + p.query + "' in " + p.data);
    const auto hits = retrieve_poses(*query, db, p.k);
    char buf[160];
    for (size_t r = 0; r < hits.size(); ++r) {
        std::snprintf(buf, sizeof(buf), "%zu %s %.6f", r + 1, ds.ids()[hits[r].index].c_str(), hits[r].distance);
        out << buf << "\n";
    }
    return 0;
}

int run_grid(const CommandPlan& p, std::ostream& out, std::ostream&) {
    std::vector<std::vector<torch::Tensor>> rows;
    for (const auto& row : p.rows) {
        rows.emplace_back();
        for (const auto& f : row) rows.back().push_back(read_rgb_png(f));
    }
    emit_image_grid(rows, p.out);
    out << p.out << "\n";
    return 0;
}

}  // namespace

CommandPlan parse_command(const std::vector<std::string>& args) {
    if (args.empty()) throw UsageError(std::string("missing verb\n") + kUsage);
    if (args[0] == "--help" || args[0] == "-h") throw HelpRequested(kUsage);
    CommandPlan plan;
    bool known = false;
    for (const auto& [name, verb] : kVerbs) {
        if (args[0] == name) {
            plan.verb = verb;
            known = true;
        }
    }
    if (!known) throw UsageError("unknown verb '" + args[0] + "'\n" + kUsage);

    CLI::App app{"tryon " + args[0], "tryon " + args[0]};
    app.allow_extras(false);
    uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "random seed");
    std::vector<std::string> sets;
    std::vector<std::string> rows;
    switch (plan.verb) {
        case Verb::GenData:
            app.add_option("--out", plan.out, "output directory")->required();
            app.add_option("--count", plan.count, "number of triplets");
            app.add_option("--height", plan.height, "image height");
            app.add_option("--width", plan.width, "image width");
            break;
        case Verb::Train:
            app.add_option("--data", plan.data, "dataset directory")->required();
            app.add_option("--out", plan.out, "checkpoint file to write")->required();
            app.add_option("--config", plan.config_path, "config file");
            app.add_option("--set", sets, "key=value config override (repeatable)");
            app.add_option("--init", plan.init, "checkpoint to resume from");
            app.add_option("--trace", plan.trace, "CSV loss trace to write");
            break;
        case Verb::Infer:
            app.add_option("--data", plan.data, "dataset directory")->required();
            app.add_option("--checkpoints", plan.checkpoints, "directory with <stage>.ckpt files")->required();
            app.add_option("--out", plan.out, "output directory")->required();
            app.add_option("--pose-file", plan.pose_file, "keypoint JSON overriding the predicted pose");
            app.add_option("--id", plan.id, "only this triplet");
            break;
        case Verb::Eval:
            app.add_option("--pred", plan.pred, "directory of generated PNGs")->required();
            app.add_option("--ref", plan.ref, "directory of reference PNGs")->required();
            app.add_option("--splits", plan.splits, "inception score splits");
            app.add_option("--out", plan.out, "report file");
            break;
        case Verb::Retrieve:
            app.add_option("--checkpoint", plan.checkpoint, "c2p checkpoint")->required();
            app.add_option("--data", plan.data, "dataset directory")->required();
            app.add_option("--query", plan.query, "query triplet id")->required();
            app.add_option("--k", plan.k, "number of results");
            break;
        case Verb::Grid:
            app.add_option("--row", rows, "comma-separated PNG files of one grid row (repeatable)")->required();
            app.add_option("--out", plan.out, "output PNG")->required();
            break;
    }
    std::vector<std::string> cli_args(args.begin() + 1, args.end());
    std::vector<std::string> reversed(cli_args.rbegin(), cli_args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested(app.help());
    } catch (const CLI::ParseError& e) {
        throw UsageError(std::string(e.what()) + "\n" + app.help());
    }
    if (seed_opt->count() > 0) plan.seed = seed;
    if (plan.verb == Verb::Train) {
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
            const std::string key = s.substr(0, eq);
            if (!is_config_key(key)) throw UsageError("unknown config key '" + key + "'");
            plan.overrides.emplace_back(key, s.substr(eq + 1));
        }
    }
    if (plan.verb == Verb::Grid) {
        for (const auto& r : rows) plan.rows.push_back(split_list(r));
    }
    return plan;
}

int execute(const CommandPlan& plan, std::ostream& out, std::ostream& log) {
    switch (plan.verb) {
        case Verb::GenData: return run_gen_data(plan, out, log);
        case Verb::Train: return run_train(plan, out, log);
        case Verb::Infer: return run_infer(plan, out, log);
        case Verb::Eval: return run_eval(plan, out, log);
        case Verb::Retrieve: return run_retrieve(plan, out, log);
        case Verb::Grid: return run_grid(plan, out, log);
    }
    return 2;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& log) {
    auto one_line = [](std::string s) {
        std::replace(s.begin(), s.end(), '\n', ' ');
        return s;
    };
    CommandPlan plan;
    try {
        plan = parse_command(args);
    } catch (const HelpRequested& h) {
        out << h.what();
        return 0;
    } catch (const UsageError& e) {
        log << "error: " << e.what() << "\n";
        return 1;
    }
    try {
        return execute(plan, out, log);
    } catch (const UsageError& e) {
        log << "error: " << one_line(e.what()) << "\n";
        return 1;
    } catch (const ConfigError& e) {
        log << "error: " << one_line(e.what()) << "\n";
        return 1;
    } catch (const DatasetError& e) {
        log << "error: " << one_line(e.what()) << "\n";
        return 1;
    } catch (const CheckpointError& e) {
        log << "error: " << one_line(e.what()) << "\n";
        return 1;
    } catch (const ImageIoError& e) {
        log << "error: " << one_line(e.what()) << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        log << "error: " << one_line(e.what()) << "\n";
        return 1;
    } catch (const std::exception& e) {
        log << "internal error: " << one_line(e.what()) << "\n";
        return 2;
    }
}

}  // namespace tryon
