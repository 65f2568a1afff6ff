#pragma once
// Staged pipeline: rank proposals -> fit the cluster model -> per-image
// discovery and assembly. Each stage persists its output under output_dir,
// so stages can be rerun independently.
//
// output_dir layout:
//   rankings.json                 per-image proposal order and priors
//   cluster_model.json/.bin       dataset cluster model
//   instances/<image id>.json     per-image instances (reused when the run key matches)
//   run_manifest.json             config snapshot, timings, per-image status

#include "uod/config.hpp"
#include "uod/instance_assembly.hpp"
#include "uod/semantic_clustering.hpp"

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uod {

inline constexpr const char* kToolVersion = "0.1.0";

enum class ImageState { ok, cached, failed };

struct ImageStatus {
    std::string image_id;
    ImageState state = ImageState::ok;
    std::string stage;  // last stage reached
    std::string error;
    std::size_t n_instances = 0;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct RunManifest {
    nlohmann::json config;
    std::vector<StageTiming> timings;
    std::vector<ImageStatus> images;  // one entry per archive image, sorted by id
    std::string tool_version = kToolVersion;

    std::size_t failures() const;
    // 0 when every image succeeded, 2 otherwise.
    int exit_code() const { return failures() == 0 ? 0 : 2; }
    nlohmann::json to_json() const;
};

struct ImagePriors {
    std::string image_id;
    std::vector<std::size_t> order;  // ranked proposal indices
    std::vector<double> scores;
    std::vector<std::size_t> top;
    std::vector<std::size_t> bottom;
};

nlohmann::json priors_to_json(std::span<const ImagePriors> priors);
std::vector<ImagePriors> priors_from_json(const nlohmann::json& j);

// Runs fn(i) for i in [0, n) on up to `jobs` threads (0 = hardware
// concurrency). fn must not throw.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

// Manifest entries sorted by image id; throws on duplicate ids.
std::vector<ManifestEntry> sorted_entries(const std::filesystem::path& archive_dir);

// Stage 1. Writes rankings.json. Failed images are recorded in `manifest`.
std::vector<ImagePriors> run_rank(const PipelineConfig& config, RunManifest& manifest);

// Stage 2. Pools every image's top and bottom CLS features. Writes cluster_model.json.
// Throws PipelineError when the model cannot be fitted.
ClusterModel run_fit(const PipelineConfig& config, std::span<const ImagePriors> priors, RunManifest& manifest);

// Stage 3 for the given image ids. Writes instances/<id>.json.
std::vector<InstanceSet> run_assemble(const PipelineConfig& config, const ClusterModel& model,
                                      std::span<const std::string> image_ids, RunManifest& manifest);

// Single image, no I/O beyond reading the archive.
InstanceSet discover_image(const PipelineConfig& config, const ClusterModel& model, const ImageRecord& record);

struct DiscoverResult {
    std::vector<InstanceSet> instances;  // successful images, sorted by id
    RunManifest manifest;
};

// All stages, or stage 3 only when model_path is given. Writes run_manifest.json.
DiscoverResult run_discover(const PipelineConfig& config,
                            const std::optional<std::filesystem::path>& model_path = std::nullopt);

std::filesystem::path instance_path(const std::filesystem::path& output_dir, const std::string& image_id);

// Instance sets found under output_dir/instances, sorted by image id.
std::vector<InstanceSet> load_instance_sets(const std::filesystem::path& output_dir);

// Writes COCO-style pseudo-labels and, when mask_dir is set, one PGM label
// image per image (0 = background, instance k has value k + 1).
void export_pseudo_labels(std::span<const InstanceSet> sets, const std::filesystem::path& json_path,
                          const std::optional<std::filesystem::path>& mask_dir = std::nullopt);

enum class EvalTask { ap50, odap, miou, recall };

EvalTask eval_task_from_string(const std::string& s);
std::string to_string(EvalTask task);

// Metric report for the requested tasks. Predictions: COCO results array
// or a dataset object with annotations.
nlohmann::json evaluate(const nlohmann::json& predictions, const nlohmann::json& ground_truth,
                        std::span<const EvalTask> tasks);
nlohmann::json evaluate_files(const std::filesystem::path& predictions, const std::filesystem::path& ground_truth,
                              std::span<const EvalTask> tasks);

// Writes via a temporary file and rename.
void write_text_atomic(const std::string& text, const std::filesystem::path& path);

}  // namespace uod
