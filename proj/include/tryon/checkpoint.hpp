#pragma once

// Stage checkpoint container:
//   8 bytes   magic "TFTISCK1"
//   u64 LE    manifest length, then the UTF-8 JSON manifest
//   blob      parameters
//   blob      optimizer state
// A blob is u64 LE count followed by records of
//   u32 name length, name, u8 dtype, u32 rank, rank x i64 dims, raw LE data.

#include "tryon/config.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace tryon {

inline constexpr char kCheckpointMagic[] = "TFTISCK1";
inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NamedTensor {
    std::string name;
    torch::Tensor value;
};

struct StageCheckpoint {
    Stage stage = Stage::C2P;
    int64_t step = 0;
    uint64_t fingerprint = 0;
    int format_version = kCheckpointVersion;
    std::string config;  // canonical config text
    std::vector<NamedTensor> parameters;
    std::vector<NamedTensor> optimizer;

    const torch::Tensor* find_parameter(const std::string& name) const;
};

std::string encode_checkpoint(const StageCheckpoint& checkpoint);
/// Throws CheckpointError on a bad magic, unknown version or truncation.
StageCheckpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const StageCheckpoint& checkpoint);
StageCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Bitwise equality of every stored tensor and manifest field.
bool same_checkpoint(const StageCheckpoint& a, const StageCheckpoint& b);

}  // namespace tryon
