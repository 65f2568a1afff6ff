#pragma once
// Synthetic archives with planted objects, for fixtures and demos.
// Patch tokens point along a background direction or along one of the
// class directions; proposals cover each object (plus jittered copies) and
// scattered background regions.

#include "uod/feature_store.hpp"
#include "uod/types.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace uod {

struct SyntheticOptions {
    std::size_t n_images = 3;
    std::size_t h_patches = 12;
    std::size_t w_patches = 16;
    std::size_t patch_size = 16;
    std::size_t dim = 16;
    std::size_t n_classes = 2;
    std::size_t max_objects = 2;        // per image, at least 1
    std::size_t object_gap = 5;         // min patches between objects
    std::size_t background_boxes = 6;   // per image
    double token_noise = 0.05;
    std::uint64_t seed = 1;
};

struct SyntheticDataset {
    std::vector<ImageRecord> records;
    std::vector<GroundTruth> ground_truth;  // boxes and masks at image resolution
    std::vector<std::vector<int>> classes;  // planted class per ground-truth box
};

SyntheticDataset make_synthetic_dataset(const SyntheticOptions& options);

// Writes <id>.uodf archives, manifest.json and ground_truth.json into dir.
void write_synthetic_dataset(const SyntheticDataset& data, const std::filesystem::path& dir);

}  // namespace uod
