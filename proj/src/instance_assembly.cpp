#include "uod/instance_assembly.hpp"

#include "uod/proposal_ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace uod {

GridMask dilate(const GridMask& mask, std::size_t radius) {
    if (radius == 0) return mask;
    const std::size_t h = mask.height;
    const std::size_t w = mask.width;
    // Separable square dilation: rows, then columns.
    GridMask rows(h, w);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            if (!mask.at(r, c)) continue;
            const std::size_t lo = c >= radius ? c - radius : 0;
            const std::size_t hi = std::min(w - 1, c + radius);
            for (std::size_t x = lo; x <= hi; ++x) rows.set(r, x);
        }
    }
    GridMask out(h, w);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            if (!rows.at(r, c)) continue;
            const std::size_t lo = r >= radius ? r - radius : 0;
            const std::size_t hi = std::min(h - 1, r + radius);
            for (std::size_t y = lo; y <= hi; ++y) out.set(y, c);
        }
    }
    return out;
}

Box mask_to_box(const GridMask& mask) {
    std::size_t x1 = mask.width, y1 = mask.height, x2 = 0, y2 = 0;
    for (std::size_t r = 0; r < mask.height; ++r) {
        for (std::size_t c = 0; c < mask.width; ++c) {
            if (!mask.at(r, c)) continue;
            x1 = std::min(x1, c);
            y1 = std::min(y1, r);
            x2 = std::max(x2, c + 1);
            y2 = std::max(y2, r + 1);
        }
    }
    if (x2 == 0) throw std::invalid_argument("mask_to_box: empty mask");
    return {static_cast<double>(x1), static_cast<double>(y1), static_cast<double>(x2), static_cast<double>(y2)};
}

GridMask upsample_nearest(const GridMask& mask, std::size_t height, std::size_t width) {
    GridMask out(height, width);
    for (std::size_t y = 0; y < height; ++y) {
        const std::size_t r = y * mask.height / height;
        for (std::size_t x = 0; x < width; ++x) {
            if (mask.at(r, x * mask.width / width)) out.set(y, x);
        }
    }
    return out;
}

std::vector<ProtoInstance> merge_parts(std::span<const ClassifiedPart> parts, const MergeParams& params) {
    const std::size_t n = parts.size();
    std::vector<GridMask> dilated;
    dilated.reserve(n);
    for (const auto& p : parts) dilated.push_back(dilate(p.part.mask, params.dilation_radius));

    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            if (parts[a].decision.class_id != parts[b].decision.class_id) continue;
            const auto& ma = dilated[a].cells;
            const auto& mb = dilated[b].cells;
            bool touch = false;
            for (std::size_t i = 0; i < ma.size() && !touch; ++i) touch = ma[i] && mb[i];
            if (!touch) continue;
            const std::size_t ra = find(a), rb = find(b);
            if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
        }
    }

    std::vector<ProtoInstance> protos;
    std::vector<std::size_t> root_slot(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t root = find(i);
        if (root_slot[root] == n) {
            root_slot[root] = protos.size();
            ProtoInstance p;
            p.mask = GridMask(parts[i].part.mask.height, parts[i].part.mask.width);
            p.class_id = parts[i].decision.class_id;
            protos.push_back(std::move(p));
        }
        ProtoInstance& p = protos[root_slot[root]];
        const auto& m = parts[i].part.mask.cells;
        for (std::size_t c = 0; c < m.size(); ++c) {
            if (m[c]) p.mask.cells[c] = 1;
        }
        p.members.push_back(i);
        p.area += parts[i].part.area;
        p.confidence += static_cast<double>(parts[i].part.area) * parts[i].decision.confidence;
    }
    for (auto& p : protos) {
        if (p.area > 0) p.confidence /= static_cast<double>(p.area);
    }
    return protos;
}

std::vector<Instance> filter_background(std::span<const ProtoInstance> protos, const ClassifierBackend& backend,
                                        const RegionFeatureFn& region_feature, std::size_t image_height,
                                        std::size_t image_width, const MergeParams& params) {
    const double min_area = params.min_instance_area_fraction * static_cast<double>(image_height * image_width);
    std::vector<Instance> out;
    for (const auto& p : protos) {
        const FgDecision fg = backend.classify_fg(region_feature(p.mask));
        if (!fg.is_fg) continue;
        GridMask full = upsample_nearest(p.mask, image_height, image_width);
        const std::size_t area = full.count();
        if (area == 0 || static_cast<double>(area) < min_area) continue;
        Instance inst;
        inst.bbox = mask_to_box(full);
        inst.mask = std::move(full);
        inst.class_id = p.class_id;
        inst.confidence = p.confidence;
        inst.p_fg = fg.p_fg;
        out.push_back(std::move(inst));
    }
    return out;
}

std::string to_string(RegionFeatureMode mode) {
    return mode == RegionFeatureMode::pooled_keys ? "pooled_keys" : "nearest_proposal";
}

RegionFeatureMode region_feature_mode_from_string(const std::string& s) {
    if (s == "pooled_keys") return RegionFeatureMode::pooled_keys;
    if (s == "nearest_proposal") return RegionFeatureMode::nearest_proposal;
    throw std::invalid_argument("unknown region feature mode: " + s);
}

RegionFeatureFn make_region_feature(const ImageRecord& record, std::size_t grid_height, std::size_t grid_width,
                                    const AssemblyParams& params) {
    const PatchFeatureMap& fmap = record.features;
    auto pooled = [&fmap, grid_height, grid_width](const GridMask& mask) {
        std::vector<double> acc(fmap.dim, 0.0);
        std::size_t n = 0;
        for (std::size_t r = 0; r < grid_height; ++r) {
            for (std::size_t c = 0; c < grid_width; ++c) {
                if (!mask.at(r, c)) continue;
                const std::size_t pr = r * fmap.h_patches / grid_height;
                const std::size_t pc = c * fmap.w_patches / grid_width;
                const auto tok = fmap.token(pr * fmap.w_patches + pc);
                for (std::size_t t = 0; t < fmap.dim; ++t) acc[t] += tok[t];
                ++n;
            }
        }
        std::vector<float> out(fmap.dim, 0.0f);
        if (n == 0) throw std::invalid_argument("region feature requested for an empty mask");
        for (std::size_t t = 0; t < fmap.dim; ++t) out[t] = static_cast<float>(acc[t] / static_cast<double>(n));
        return out;
    };
    if (params.feature_mode == RegionFeatureMode::pooled_keys) return pooled;

    const ProposalSet& props = record.proposals;
    const double min_iou = params.nearest_proposal_min_iou;
    return [pooled, &props, grid_height, grid_width, min_iou](const GridMask& mask) {
        const Box g = mask_to_box(mask);
        const double sx = static_cast<double>(props.image_width) / static_cast<double>(grid_width);
        const double sy = static_cast<double>(props.image_height) / static_cast<double>(grid_height);
        const Box crop{g.x1 * sx, g.y1 * sy, g.x2 * sx, g.y2 * sy};
        double best = -1.0;
        const Proposal* pick = nullptr;
        for (const auto& p : props.proposals) {
            const double u = iou(crop, p.box);
            if (u > best) {
                best = u;
                pick = &p;
            }
        }
        if (pick != nullptr && best >= min_iou) return pick->cls;
        return pooled(mask);
    };
}

InstanceSet assemble(const SegmentMap& map, const ImageRecord& record, const ClassifierBackend& backend,
                     const AssemblyParams& params) {
    InstanceSet set;
    set.image_id = record.features.image_id;
    set.width = record.proposals.image_width;
    set.height = record.proposals.image_height;
    set.feature_mode = params.feature_mode;

    const auto feature = make_region_feature(record, map.height, map.width, params);
    std::vector<ClassifiedPart> parts;
    for (auto& seg : extract_segments(map, params.min_part_area)) {
        ClassDecision d = backend.classify(feature(seg.mask));
        parts.push_back({std::move(seg), std::move(d)});
    }
    const auto protos = merge_parts(parts, params.merge);
    set.instances = filter_background(protos, backend, feature, set.height, set.width, params.merge);
    return set;
}

}  // namespace uod
