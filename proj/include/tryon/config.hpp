#pragma once

// Training configuration. Text form: one `key = value` per line, `#` starts
// a comment, blank lines ignored, unknown keys rejected.

#include "tryon/cloth2pose.hpp"
#include "tryon/coloring.hpp"
#include "tryon/refinement.hpp"
#include "tryon/translator.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tryon {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Stage { C2P, Translator, Coloring, Facial, Clothing };

std::string_view stage_name(Stage stage);
/// Throws ConfigError for an unknown name.
Stage parse_stage(std::string_view name);

struct TrainConfig {
    Stage stage = Stage::C2P;
    int64_t steps = 500;
    int64_t batch = 4;
    std::optional<double> lr;  // unset: 2e-4 for the translator, 2e-5 otherwise
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    uint64_t seed = 0;
    int64_t height = 96;
    int64_t width = 64;
    // Downstream stages train on ground-truth upstream outputs. When false,
    // `upstream` must name the checkpoint whose outputs feed this stage.
    bool teacher_forcing = true;
    std::string upstream;

    Cloth2PoseOptions c2p{4, 64, 16, 0.00008};
    TranslatorOptions translator{};
    ColoringOptions coloring{};
    FacialOptions facial{};
    ClothingOptions clothing{};
    int64_t perceptual_width = 8;
    uint64_t perceptual_seed = 1234;

    double effective_lr() const;

    /// Throws ConfigError naming the key for unknown keys or bad values.
    void set(std::string_view key, std::string_view value);
    std::string get(std::string_view key) const;

    /// Every key in sorted order, one `key = value` line each; lr is written
    /// as its effective value.
    std::string canonical() const;
    /// 64-bit FNV-1a of canonical().
    uint64_t fingerprint() const;

    /// Throws ConfigError when lr <= 0, dims are not multiples of 16, etc.
    void validate() const;
};

/// Sorted list of recognised keys.
const std::vector<std::string>& config_keys();
bool is_config_key(std::string_view key);

TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);

/// Applies a `key=value` override.
void apply_override(TrainConfig& config, std::string_view assignment);

std::string format_double(double v);
uint64_t fnv1a(std::string_view bytes);

}  // namespace tryon
