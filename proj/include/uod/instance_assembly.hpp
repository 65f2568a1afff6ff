#pragma once
// Turns classified part segments into object instances: same-class parts
// that lie near each other are merged, then merged regions classified as
// background are dropped.

#include "uod/feature_store.hpp"
#include "uod/part_discovery.hpp"
#include "uod/region_classifier.hpp"
#include "uod/types.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace uod {

struct ClassifiedPart {
    PartSegment part;
    ClassDecision decision;
};

struct MergeParams {
    std::size_t dilation_radius = 2;           // grid cells, square structuring element
    double min_instance_area_fraction = 0.001;  // of image pixels
};

struct ProtoInstance {
    GridMask mask;  // segment-map grid
    int class_id = 0;
    double confidence = 0.0;  // area-weighted mean of member confidences
    std::size_t area = 0;
    std::vector<std::size_t> members;  // indices into the merged parts, ascending
};

struct Instance {
    GridMask mask;  // image resolution
    int class_id = 0;
    double confidence = 0.0;
    double p_fg = 1.0;
    Box bbox;
};

GridMask dilate(const GridMask& mask, std::size_t radius);

// Tight half-open box (x1, y1, x2, y2) around the set cells.
// Throws std::invalid_argument for an empty mask.
Box mask_to_box(const GridMask& mask);

// Nearest-neighbour resampling: pixel (y, x) takes cell (y * h / height, x * w / width).
GridMask upsample_nearest(const GridMask& mask, std::size_t height, std::size_t width);

// Two parts are linked iff they share a class id and their dilated masks
// intersect; each connected component of that graph becomes one proto-instance.
// Output is ordered by smallest member index.
std::vector<ProtoInstance> merge_parts(std::span<const ClassifiedPart> parts, const MergeParams& params);

// Feature describing a region given as a segment-map mask.
using RegionFeatureFn = std::function<std::vector<float>(const GridMask&)>;

// Keeps proto-instances the backend calls foreground and whose upsampled
// area reaches the minimum; masks are upsampled to image_height x image_width.
std::vector<Instance> filter_background(std::span<const ProtoInstance> protos, const ClassifierBackend& backend,
                                        const RegionFeatureFn& region_feature, std::size_t image_height,
                                        std::size_t image_width, const MergeParams& params);

enum class RegionFeatureMode { pooled_keys, nearest_proposal };

std::string to_string(RegionFeatureMode mode);
RegionFeatureMode region_feature_mode_from_string(const std::string& s);

struct AssemblyParams {
    std::size_t min_part_area = 4;
    MergeParams merge{};
    RegionFeatureMode feature_mode = RegionFeatureMode::pooled_keys;
    // nearest_proposal mode: CLS feature of the proposal whose box best
    // overlaps the region's crop; falls back to pooled keys below this IoU.
    double nearest_proposal_min_iou = 0.5;
};

struct InstanceSet {
    std::string image_id;
    std::size_t width = 0;
    std::size_t height = 0;
    RegionFeatureMode feature_mode = RegionFeatureMode::pooled_keys;
    std::vector<Instance> instances;
};

// Region feature provider for one image.
RegionFeatureFn make_region_feature(const ImageRecord& record, std::size_t grid_height, std::size_t grid_width,
                                    const AssemblyParams& params);

// extract_segments -> classify -> merge_parts -> filter_background.
InstanceSet assemble(const SegmentMap& map, const ImageRecord& record, const ClassifierBackend& backend,
                     const AssemblyParams& params);

}  // namespace uod
