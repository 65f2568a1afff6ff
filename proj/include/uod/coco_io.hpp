#pragma once
// COCO-style JSON for pseudo-labels, detections and ground truth.
// Boxes are [x, y, width, height]; masks are uncompressed RLE in COCO
// (column-major) order, runs alternating background/foreground starting
// with background.

#include "uod/error.hpp"
#include "uod/eval_metrics.hpp"
#include "uod/instance_assembly.hpp"
#include "uod/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace uod {

// Schema violation; field() is a JSON path such as "$.annotations[3].bbox".
class SchemaError : public InvariantError {
public:
    using InvariantError::InvariantError;
};

struct Rle {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint32_t> counts;
    friend bool operator==(const Rle&, const Rle&) = default;
};

Rle rle_encode(const GridMask& mask);
GridMask rle_decode(const Rle& rle);

nlohmann::json rle_to_json(const Rle& rle);
Rle rle_from_json(const nlohmann::json& j, const std::string& path);

nlohmann::json box_to_json(const Box& b);
Box box_from_json(const nlohmann::json& j, const std::string& path);

// Per-image intermediate written by `discover`.
nlohmann::json instance_set_to_json(const InstanceSet& set);
InstanceSet instance_set_from_json(const nlohmann::json& j);

// Dataset-style pseudo-label file: images, annotations, categories.
nlohmann::json pseudo_labels_json(std::span<const InstanceSet> sets);

// Accepts a COCO results array or an object with an "annotations" array.
// Missing scores default to 1.
std::vector<Detection> detections_from_json(const nlohmann::json& j);
// {"images": [{id, width, height}], "annotations": [{image_id, bbox, segmentation?}]}
std::vector<GroundTruth> ground_truth_from_json(const nlohmann::json& j);
nlohmann::json ground_truth_to_json(std::span<const GroundTruth> gts);

nlohmann::json read_json_file(const std::filesystem::path& path);
// Writes j.dump(2) plus a trailing newline.
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace uod
