#include "tryon/dataset.hpp"

#include "tryon/image_io.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>

namespace tryon {

namespace fs = std::filesystem;
using nlohmann::json;

void write_keypoints_json(const fs::path& path, const KeypointSet& keypoints) {
    json arr = json::array();
    for (int k = 0; k < kNumJoints; ++k) {
        const auto& kp = keypoints[k];
        arr.push_back({{"joint", std::string(joint_name(static_cast<Joint>(k)))},
                       {"x", kp.x},
                       {"y", kp.y},
                       {"visible", kp.visible}});
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DatasetError("cannot write " + path.string());
    out << arr.dump(1) << '\n';
}

KeypointSet read_keypoints_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + path.string());
    json arr;
    try {
        arr = json::parse(in);
    } catch (const json::exception& e) {
        throw DatasetError(path.string() + ": " + e.what());
    }
    if (!arr.is_array() || arr.size() != kNumJoints) {
        throw DatasetError(path.string() + ": expected an array of 18 keypoint records");
    }
    KeypointSet out;
    try {
        for (int k = 0; k < kNumJoints; ++k) {
            out[k] = Keypoint{arr[k].at("x").get<int>(), arr[k].at("y").get<int>(),
                              arr[k].at("visible").get<bool>()};
        }
    } catch (const json::exception& e) {
        throw DatasetError(path.string() + ": " + e.what());
    }
    return out;
}

void save_triplet(const fs::path& root, const Triplet& t) {
    if (t.id.empty()) throw std::invalid_argument("save_triplet: empty triplet id");
    const fs::path dir = root / t.id;
    fs::create_directories(dir);
    write_rgb_png(dir / "clothing.png", t.clothing);
    write_mask_png(dir / "clothing_mask.png", t.clothing_mask);
    write_rgb_png(dir / "person_a.png", t.source.image);
    write_rgb_png(dir / "person_b.png", t.target.image);
    write_keypoints_json(dir / "keypoints_a.json", t.source.keypoints);
    write_keypoints_json(dir / "keypoints_b.json", t.target.keypoints);
    write_label_png(dir / "parsing_a.png", t.source.parsing);
    write_label_png(dir / "parsing_b.png", t.target.parsing);
    if (t.style >= 0) {
        std::ofstream meta(dir / "meta.json", std::ios::binary);
        meta << json{{"style", t.style}}.dump() << '\n';
    }
}

Dataset::Dataset(fs::path root) : root_(std::move(root)) {
    if (!fs::is_directory(root_)) throw DatasetError("dataset root is not a directory: " + root_.string());
    for (const auto& entry : fs::directory_iterator(root_)) {
        if (entry.is_directory()) ids_.push_back(entry.path().filename().string());
    }
    std::sort(ids_.begin(), ids_.end());
}

Triplet Dataset::load(size_t index) const {
    if (index >= ids_.size()) throw std::out_of_range("Dataset::load: index out of range");
    Triplet t;
    t.id = ids_[index];
    const fs::path dir = root_ / t.id;
    auto need = [&](const char* name) {
        fs::path p = dir / name;
        if (!fs::exists(p)) throw DatasetError("triplet " + t.id + ": missing file " + name);
        return p;
    };
    auto guarded = [&](const char* name, auto reader) {
        const fs::path p = need(name);
        try {
            return reader(p);
        } catch (const std::exception& e) {
            throw DatasetError("triplet " + t.id + ": cannot read " + name + ": " + e.what());
        }
    };
    t.clothing = guarded("clothing.png", read_rgb_png);
    t.clothing_mask = guarded("clothing_mask.png", read_mask_png);
    t.source.image = guarded("person_a.png", read_rgb_png);
    t.target.image = guarded("person_b.png", read_rgb_png);
    t.source.keypoints = guarded("keypoints_a.json", read_keypoints_json);
    t.target.keypoints = guarded("keypoints_b.json", read_keypoints_json);
    t.source.parsing = guarded("parsing_a.png", read_label_png);
    t.target.parsing = guarded("parsing_b.png", read_label_png);

    const auto h = t.clothing.size(1), w = t.clothing.size(2);
    auto same = [&](const torch::Tensor& x, const char* name) {
        if (x.size(-2) != h || x.size(-1) != w) {
            throw DatasetError("triplet " + t.id + ": " + name + " size differs from clothing.png");
        }
    };
    same(t.clothing_mask, "clothing_mask.png");
    same(t.source.image, "person_a.png");
    same(t.target.image, "person_b.png");
    same(t.source.parsing, "parsing_a.png");
    same(t.target.parsing, "parsing_b.png");
    if (t.source.parsing.max().item<int64_t>() >= kNumParsingChannels ||
        t.target.parsing.max().item<int64_t>() >= kNumParsingChannels) {
        throw DatasetError("triplet " + t.id + ": parsing label out of range");
    }

    const fs::path meta = dir / "meta.json";
    if (fs::exists(meta)) {
        std::ifstream in(meta, std::ios::binary);
        try {
            t.style = json::parse(in).value("style", -1);
        } catch (const json::exception& e) {
            throw DatasetError("triplet " + t.id + ": cannot read meta.json: " + e.what());
        }
    }
    return t;
}

Dataset load_dataset(const fs::path& root) { return Dataset(root); }

std::vector<Triplet> load_all(const Dataset& dataset) {
    std::vector<Triplet> out;
    out.reserve(dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i) out.push_back(dataset.load(i));
    return out;
}

Split split_indices(size_t n) {
    const auto n_train = static_cast<size_t>(
        (static_cast<int64_t>(n) * kSplitTrain * 2 + kSplitTotal) / (2 * kSplitTotal));
    Split s;
    for (size_t i = 0; i < n; ++i) (i < n_train ? s.train : s.test).push_back(i);
    return s;
}

}  // namespace tryon
