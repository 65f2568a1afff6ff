#include "uod/part_discovery.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace uod {

std::vector<std::size_t> SegmentMap::areas() const {
    std::vector<std::size_t> a(k, 0);
    for (int l : labels) ++a[static_cast<std::size_t>(l)];
    return a;
}

int biggest_cluster(const std::vector<std::size_t>& areas) {
    int arg = 0;
    for (std::size_t i = 1; i < areas.size(); ++i) {
        if (areas[i] > areas[static_cast<std::size_t>(arg)]) arg = static_cast<int>(i);
    }
    return arg;
}

namespace {

SegmentMap cluster(const PixelFeatureSpace& space, std::size_t k, const DiscoveryParams& params) {
    const PointsView pts{space.features, space.n_dims};
    auto km = kmeans(pts, k, params.seed, params.kmeans);
    SegmentMap map;
    map.height = space.height;
    map.width = space.width;
    map.labels = std::move(km.labels);
    map.k = k;
    map.background_id = biggest_cluster(map.areas());
    return map;
}

std::size_t object_area(const SegmentMap& map) {
    return map.labels.size() - map.areas()[static_cast<std::size_t>(map.background_id)];
}

}  // namespace

SegmentMap discover_parts(const PixelFeatureSpace& space, const DiscoveryParams& params) {
    if (!(params.thresh > 1.0)) throw std::invalid_argument("discover_parts: thresh must be > 1");
    if (params.k_max < 2) throw std::invalid_argument("discover_parts: k_max must be >= 2");
    const PointsView pts{space.features, space.n_dims};
    const std::size_t distinct = count_distinct(pts);
    if (distinct < 2) throw std::invalid_argument("discover_parts: feature space has fewer than 2 distinct cells");
    const std::size_t k_cap = std::min(params.k_max, distinct);

    SegmentMap accepted = cluster(space, 2, params);
    std::size_t obj_area = object_area(accepted);
    for (std::size_t k = 3; k <= k_cap; ++k) {
        SegmentMap next = cluster(space, k, params);
        const std::size_t new_obj_area = object_area(next);
        if (static_cast<double>(new_obj_area) > params.thresh * static_cast<double>(obj_area)) {
            accepted = std::move(next);
            obj_area = new_obj_area;
        } else {
            break;
        }
    }
    return accepted;
}

namespace {

struct DisjointSet {
    std::vector<std::size_t> parent;
    std::size_t make() {
        parent.push_back(parent.size());
        return parent.size() - 1;
    }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) parent[b] = a;
        else parent[a] = b;
    }
};

}  // namespace

std::vector<PartSegment> extract_segments(const SegmentMap& map, std::size_t min_part_area) {
    const std::size_t h = map.height;
    const std::size_t w = map.width;
    constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    // Two-pass labeling with union-find, 4-connectivity.
    std::vector<std::size_t> provisional(h * w, kNone);
    DisjointSet sets;
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            const std::size_t i = r * w + c;
            const int l = map.labels[i];
            if (l == map.background_id) continue;
            const bool up = r > 0 && map.labels[i - w] == l;
            const bool left = c > 0 && map.labels[i - 1] == l;
            if (up && left) {
                provisional[i] = provisional[i - w];
                sets.unite(provisional[i - w], provisional[i - 1]);
            } else if (up) {
                provisional[i] = provisional[i - w];
            } else if (left) {
                provisional[i] = provisional[i - 1];
            } else {
                provisional[i] = sets.make();
            }
        }
    }

    // Roots are the smallest provisional id in each set, which follows raster order.
    std::vector<std::size_t> root_to_segment(sets.parent.size(), kNone);
    std::vector<PartSegment> segments;
    for (std::size_t i = 0; i < h * w; ++i) {
        if (provisional[i] == kNone) continue;
        const std::size_t root = sets.find(provisional[i]);
        if (root_to_segment[root] == kNone) {
            root_to_segment[root] = segments.size();
            PartSegment seg;
            seg.mask = GridMask(h, w);
            seg.cluster_id = map.labels[i];
            seg.bbox = {static_cast<double>(w), static_cast<double>(h), 0.0, 0.0};
            segments.push_back(std::move(seg));
        }
        PartSegment& seg = segments[root_to_segment[root]];
        const std::size_t r = i / w;
        const std::size_t c = i % w;
        seg.mask.cells[i] = 1;
        ++seg.area;
        seg.bbox.x1 = std::min(seg.bbox.x1, static_cast<double>(c));
        seg.bbox.y1 = std::min(seg.bbox.y1, static_cast<double>(r));
        seg.bbox.x2 = std::max(seg.bbox.x2, static_cast<double>(c + 1));
        seg.bbox.y2 = std::max(seg.bbox.y2, static_cast<double>(r + 1));
    }

    std::vector<PartSegment> kept;
    for (auto& s : segments) {
        if (s.area >= min_part_area) kept.push_back(std::move(s));
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const PartSegment& a, const PartSegment& b) { return a.cluster_id < b.cluster_id; });
    return kept;
}

}  // namespace uod
