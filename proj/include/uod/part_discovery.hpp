#pragma once
// Intra-image part discovery: k-means over the eigen feature space with an
// adaptively grown cluster count, then spatial splitting into parts.

#include "uod/kmeans.hpp"
#include "uod/spectral_graph.hpp"
#include "uod/types.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace uod {

struct SegmentMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<int> labels;  // row-major cluster ids in [0, k)
    std::size_t k = 0;
    int background_id = 0;

    std::vector<std::size_t> areas() const;
};

struct PartSegment {
    GridMask mask;
    int cluster_id = 0;
    std::size_t area = 0;
    Box bbox;  // grid coordinates, half-open
};

struct DiscoveryParams {
    double thresh = 1.02;
    std::size_t k_max = 10;
    std::uint64_t seed = 0;
    KMeansOptions kmeans{};
};

// Largest cluster, lowest id on ties.
int biggest_cluster(const std::vector<std::size_t>& areas);

// Starts at K = 2 and keeps adding a cluster while the non-background area
// grows by more than `thresh` (ratio) and K < k_max. The background is the
// biggest cluster of each clustering. Returns the last accepted clustering.
// Growth also stops when the space has fewer distinct points than K + 1.
SegmentMap discover_parts(const PixelFeatureSpace& space, const DiscoveryParams& params);

// 4-connected components of every non-background cluster, dropping those
// smaller than min_part_area. Ordered by cluster id, then raster order of the
// first cell.
std::vector<PartSegment> extract_segments(const SegmentMap& map, std::size_t min_part_area = 4);

}  // namespace uod
