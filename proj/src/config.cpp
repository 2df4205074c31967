#include "tryon/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace tryon {

namespace {

constexpr std::array<std::string_view, 5> kStageNames = {"c2p", "translator", "coloring", "facial",
                                                         "clothing"};

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) +
                      "' as " + std::string(expected));
}

template <class Int>
Int parse_int(std::string_view key, std::string_view v) {
    Int out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad_value(key, v, "an integer");
    return out;
}

double parse_double(std::string_view key, std::string_view v) {
    double out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad_value(key, v, "a number");
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(key, v, "a boolean");
}

struct Entry {
    std::function<void(TrainConfig&, std::string_view key, std::string_view value)> set;
    std::function<std::string(const TrainConfig&)> get;
};

template <class Member>
Entry int_entry(Member member) {
    return {[member](TrainConfig& c, std::string_view k, std::string_view v) {
                auto& field = std::invoke(member, c);
                field = parse_int<std::remove_reference_t<decltype(field)>>(k, v);
            },
            [member](const TrainConfig& c) { return std::to_string(std::invoke(member, c)); }};
}

template <class Member>
Entry double_entry(Member member) {
    return {[member](TrainConfig& c, std::string_view k, std::string_view v) {
                std::invoke(member, c) = parse_double(k, v);
            },
            [member](const TrainConfig& c) { return format_double(std::invoke(member, c)); }};
}

// Accessors into nested option structs, usable with std::invoke.
#define FIELD(expr) [](auto& c) -> auto& { return c.expr; }

const std::map<std::string, Entry, std::less<>>& entries() {
    static const std::map<std::string, Entry, std::less<>> table = [] {
        std::map<std::string, Entry, std::less<>> t;
        t["stage"] = {[](TrainConfig& c, std::string_view, std::string_view v) { c.stage = parse_stage(v); },
                      [](const TrainConfig& c) { return std::string(stage_name(c.stage)); }};
        t["steps"] = int_entry(FIELD(steps));
        t["batch"] = int_entry(FIELD(batch));
        t["lr"] = {[](TrainConfig& c, std::string_view k, std::string_view v) { c.lr = parse_double(k, v); },
                   [](const TrainConfig& c) { return format_double(c.effective_lr()); }};
        t["adam_beta1"] = double_entry(FIELD(adam_beta1));
        t["adam_beta2"] = double_entry(FIELD(adam_beta2));
        t["seed"] = int_entry(FIELD(seed));
        t["height"] = int_entry(FIELD(height));
        t["width"] = int_entry(FIELD(width));
        t["teacher_forcing"] = {
            [](TrainConfig& c, std::string_view k, std::string_view v) { c.teacher_forcing = parse_bool(k, v); },
            [](const TrainConfig& c) { return std::string(c.teacher_forcing ? "true" : "false"); }};
        t["upstream"] = {[](TrainConfig& c, std::string_view, std::string_view v) { c.upstream = std::string(v); },
                         [](const TrainConfig& c) { return c.upstream; }};

        t["c2p_blocks"] = int_entry(FIELD(c2p.blocks));
        t["c2p_block_width"] = int_entry(FIELD(c2p.block_width));
        t["c2p_trunk_width"] = int_entry(FIELD(c2p.trunk_base_width));
        t["c2p_lambda_sparsity"] = double_entry(FIELD(c2p.lambda_sparsity));

        t["translator_width"] = int_entry(FIELD(translator.width));
        t["translator_res_blocks"] = int_entry(FIELD(translator.res_blocks));
        t["translator_disc_width"] = int_entry(FIELD(translator.disc_width));
        t["translator_lambda_bce"] = double_entry(FIELD(translator.lambda_bce));

        t["coloring_width"] = int_entry(FIELD(coloring.width));
        t["coloring_fc_dim"] = int_entry(FIELD(coloring.fc_dim));
        t["coloring_disc_width"] = int_entry(FIELD(coloring.disc_width));
        t["coloring_lambda_l1"] = double_entry(FIELD(coloring.lambda_l1));

        t["facial_width"] = int_entry(FIELD(facial.width));
        t["facial_disc_width"] = int_entry(FIELD(facial.disc_width));
        t["facial_lambda_gan"] = double_entry(FIELD(facial.lambdas[0]));
        t["facial_lambda_perceptual"] = double_entry(FIELD(facial.lambdas[1]));
        t["facial_lambda_face"] = double_entry(FIELD(facial.lambdas[2]));
        t["facial_lambda_fg"] = double_entry(FIELD(facial.lambdas[3]));

        t["clothing_width"] = int_entry(FIELD(clothing.width));
        t["clothing_disc_width"] = int_entry(FIELD(clothing.disc_width));
        t["clothing_fusion"] = {
            [](TrainConfig& c, std::string_view k, std::string_view v) {
                if (v == "concat") {
                    c.clothing.fusion = ClothingFusion::Concat;
                } else if (v == "adain") {
                    c.clothing.fusion = ClothingFusion::AdaIN;
                } else {
                    bad_value(k, v, "'concat' or 'adain'");
                }
            },
            [](const TrainConfig& c) {
                return std::string(c.clothing.fusion == ClothingFusion::AdaIN ? "adain" : "concat");
            }};
        t["clothing_gamma"] = double_entry(FIELD(clothing.gamma));
        t["clothing_lambda_perceptual"] = double_entry(FIELD(clothing.lambdas[0]));
        t["clothing_lambda_l1"] = double_entry(FIELD(clothing.lambdas[1]));
        t["clothing_lambda_fullbody"] = double_entry(FIELD(clothing.lambdas[2]));
        t["clothing_lambda_gan"] = double_entry(FIELD(clothing.lambdas[3]));

        t["perceptual_width"] = int_entry(FIELD(perceptual_width));
        t["perceptual_seed"] = int_entry(FIELD(perceptual_seed));
        return t;
    }();
    return table;
}

#undef FIELD

const Entry& entry(std::string_view key) {
    const auto& t = entries();
    auto it = t.find(key);
    if (it == t.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
    return it->second;
}

}  // namespace

std::string_view stage_name(Stage stage) { return kStageNames[static_cast<size_t>(stage)]; }

Stage parse_stage(std::string_view name) {
    for (size_t i = 0; i < kStageNames.size(); ++i) {
        if (kStageNames[i] == name) return static_cast<Stage>(i);
    }
    throw ConfigError("unknown stage '" + std::string(name) +
                      "' (expected c2p, translator, coloring, facial or clothing)");
}

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

uint64_t fnv1a(std::string_view bytes) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

double TrainConfig::effective_lr() const {
    if (lr) return *lr;
    return stage == Stage::Translator ? 2e-4 : 2e-5;
}

void TrainConfig::set(std::string_view key, std::string_view value) { entry(key).set(*this, key, value); }

std::string TrainConfig::get(std::string_view key) const { return entry(key).get(*this); }

std::string TrainConfig::canonical() const {
    std::string out;
    for (const auto& [key, e] : entries()) out += key + " = " + e.get(*this) + "\n";
    return out;
}

uint64_t TrainConfig::fingerprint() const { return fnv1a(canonical()); }

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("invalid config: " + msg); };
    if (!(effective_lr() > 0)) fail("lr must be > 0");
    if (steps < 0) fail("steps must be >= 0");
    if (batch < 1) fail("batch must be >= 1");
    if (height < 64 || width < 16 || height % 16 != 0 || width % 16 != 0) {
        fail("height and width must be multiples of 16 with height >= 64");
    }
    if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1)) {
        fail("Adam betas must lie in [0, 1)");
    }
    if (clothing.gamma < 0 || clothing.gamma > 1) fail("clothing_gamma must lie in [0, 1]");
    if (c2p.blocks < 1 || c2p.block_width < 1 || c2p.trunk_base_width < 1) fail("c2p sizes must be positive");
    if (translator.width < 1 || translator.res_blocks < 0 || translator.disc_width < 1) {
        fail("translator sizes must be positive");
    }
    if (coloring.width < 1 || coloring.fc_dim < 0 || coloring.disc_width < 1) {
        fail("coloring sizes must be positive");
    }
    if (facial.width < 1 || facial.disc_width < 1) fail("facial sizes must be positive");
    if (clothing.width < 1 || clothing.disc_width < 1) fail("clothing sizes must be positive");
    if (perceptual_width < 1) fail("perceptual_width must be positive");
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [key, e] : entries()) k.push_back(key);
        return k;
    }();
    return keys;
}

bool is_config_key(std::string_view key) { return entries().find(key) != entries().end(); }

TrainConfig parse_config(std::string_view text) {
    TrainConfig config;
    size_t line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void apply_override(TrainConfig& config, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
    }
    config.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

}  // namespace tryon
