#pragma once
// Pipeline configuration: a flat `key = value` file (TOML subset) with
// command-line overrides. `seed` has no default and must be given.

#include "uod/error.hpp"
#include "uod/instance_assembly.hpp"
#include "uod/proposal_ranking.hpp"
#include "uod/semantic_clustering.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace uod {

class ConfigError : public Error {
public:
    using Error::Error;
};

struct PipelineConfig {
    std::filesystem::path archive_dir;
    std::filesystem::path output_dir;

    // spectral graph and part discovery
    std::size_t n_eigenvectors = 3;
    std::size_t upsample = 1;
    double affinity_floor = 1e-5;
    bool binarize = false;
    double binarize_tau = 0.2;
    std::size_t dense_below = 400;
    double thresh = 1.02;
    std::size_t k_max = 10;
    std::size_t local_n_init = 10;

    // proposal ranking
    double alpha = 0.7;
    double iou_threshold = 0.1;
    std::size_t top_p = 20;
    std::size_t bottom_q = 10;
    std::size_t max_considered = 500;
    NeighborAggregation aggregation = NeighborAggregation::sum;

    // semantic clustering
    double t_bg = 0.8;
    KRange k_range{};
    std::size_t silhouette_sample = 5000;
    std::size_t global_n_init = 3;

    // classification and assembly
    double temperature = 0.07;
    std::size_t min_part_area = 4;
    std::size_t dilation_radius = 2;
    double min_instance_area_fraction = 0.001;
    RegionFeatureMode region_feature_mode = RegionFeatureMode::pooled_keys;

    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t jobs = 0;  // 0 = hardware concurrency

    // Throws ConfigError describing the first out-of-range field.
    void validate() const;

    RankingParams ranking() const;
    FitParams fit() const;
    AssemblyParams assembly() const;

    // Every result-affecting field; `jobs` is excluded.
    nlohmann::json snapshot() const;
};

// Keys accepted in config files and as overrides.
const std::vector<std::string>& config_keys();

// Sets one field from its textual value. Throws ConfigError for an unknown
// key or a malformed value.
void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value);

// Parses `key = value` lines; `#` starts a comment; `[section]` headers are
// accepted and ignored. Strings may be quoted; k_range is `[min, max]` or
// "min..max".
PipelineConfig parse_config(const std::string& text, const std::string& origin = "<config>");
PipelineConfig load_config(const std::filesystem::path& path);

// Rebuilds a configuration from snapshot() output.
PipelineConfig config_from_snapshot(const nlohmann::json& snapshot);

}  // namespace uod
