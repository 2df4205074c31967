#pragma once

// On-disk triplet datasets. Layout per triplet:
//   <root>/<id>/clothing.png        RGB
//   <root>/<id>/clothing_mask.png   8-bit gray, 255 = clothing
//   <root>/<id>/person_a.png        source person, RGB
//   <root>/<id>/person_b.png        target person, RGB
//   <root>/<id>/keypoints_a.json    18 records {"x", "y", "visible"}
//   <root>/<id>/keypoints_b.json
//   <root>/<id>/parsing_a.png       8-bit indexed label map
//   <root>/<id>/parsing_b.png
// An optional meta.json carries the texture style.

#include "tryon/triplet.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace tryon {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void save_triplet(const std::filesystem::path& root, const Triplet& triplet);

void write_keypoints_json(const std::filesystem::path& path, const KeypointSet& keypoints);
KeypointSet read_keypoints_json(const std::filesystem::path& path);

/// Lazily loaded triplet directory listing, ordered lexicographically by id.
class Dataset {
public:
    explicit Dataset(std::filesystem::path root);

    size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::filesystem::path& root() const { return root_; }

    /// Reads triplet `index` from disk. Throws DatasetError naming the
    /// triplet id and the offending file.
    Triplet load(size_t index) const;

private:
    std::filesystem::path root_;
    std::vector<std::string> ids_;
};

/// A missing root yields DatasetError; an empty root an empty dataset.
Dataset load_dataset(const std::filesystem::path& root);

/// An in-memory dataset view: either a loaded directory or generated triplets.
std::vector<Triplet> load_all(const Dataset& dataset);

inline constexpr int64_t kSplitTrain = 9590;
inline constexpr int64_t kSplitTotal = 11283;

struct Split {
    std::vector<size_t> train;
    std::vector<size_t> test;
};

/// Leading round(n * 9590 / 11283) indices train, the rest test.
Split split_indices(size_t n);

}  // namespace tryon
