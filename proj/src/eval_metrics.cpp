#include "uod/eval_metrics.hpp"

#include "uod/proposal_ranking.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

namespace uod {
namespace {

using DetsByImage = std::map<std::string, std::vector<const Detection*>>;

DetsByImage group_by_image(std::span<const Detection> dets, std::span<const GroundTruth> gts) {
    DetsByImage by;
    for (const auto& g : gts) by[g.image_id];
    for (const auto& d : dets) {
        auto it = by.find(d.image_id);
        if (it == by.end()) throw std::invalid_argument("detection for unknown image id: " + d.image_id);
        it->second.push_back(&d);
    }
    for (auto& [id, v] : by) {
        std::stable_sort(v.begin(), v.end(), [](const Detection* a, const Detection* b) { return a->score > b->score; });
    }
    return by;
}

std::size_t total_gt(std::span<const GroundTruth> gts) {
    std::size_t n = 0;
    for (const auto& g : gts) n += g.boxes.size();
    if (n == 0) throw std::invalid_argument("evaluation needs at least one ground-truth box");
    return n;
}

const GroundTruth& gt_of(std::span<const GroundTruth> gts, const std::string& id) {
    for (const auto& g : gts) {
        if (g.image_id == id) return g;
    }
    throw std::invalid_argument("unknown image id: " + id);
}

std::vector<Box> boxes_of(const std::vector<const Detection*>& dets, std::size_t n) {
    std::vector<Box> out;
    for (std::size_t i = 0; i < std::min(n, dets.size()); ++i) out.push_back(dets[i]->bbox);
    return out;
}

}  // namespace

std::vector<bool> match_greedy(std::span<const Box> dets, std::span<const Box> gts, double iou_thresh) {
    std::vector<bool> tp(dets.size(), false);
    std::vector<bool> used(gts.size(), false);
    for (std::size_t d = 0; d < dets.size(); ++d) {
        double best = -1.0;
        std::size_t arg = gts.size();
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (used[g]) continue;
            const double u = iou(dets[d], gts[g]);
            if (u > best) {
                best = u;
                arg = g;
            }
        }
        if (arg < gts.size() && best >= iou_thresh) {
            used[arg] = true;
            tp[d] = true;
        }
    }
    return tp;
}

double average_precision(std::span<const Detection> dets, std::span<const GroundTruth> gts, double iou_thresh) {
    const std::size_t n_gt = total_gt(gts);
    const auto by = group_by_image(dets, gts);

    struct Scored {
        double score;
        std::size_t order;
        bool tp;
    };
    std::vector<Scored> all;
    std::map<const Detection*, std::size_t> input_order;
    for (std::size_t i = 0; i < dets.size(); ++i) input_order[&dets[i]] = i;
    for (const auto& [id, v] : by) {
        const auto tp = match_greedy(boxes_of(v, v.size()), gt_of(gts, id).boxes, iou_thresh);
        for (std::size_t i = 0; i < v.size(); ++i) all.push_back({v[i]->score, input_order[v[i]], tp[i]});
    }
    std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.order < b.order;
    });

    std::vector<PRPoint> curve;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        tp += all[i].tp;
        curve.push_back({static_cast<double>(tp) / static_cast<double>(i + 1),
                         static_cast<double>(tp) / static_cast<double>(n_gt), i + 1});
    }
    return envelope_area(curve);
}

double envelope_area(std::span<const PRPoint> points) {
    std::vector<PRPoint> pts(points.begin(), points.end());
    std::stable_sort(pts.begin(), pts.end(), [](const PRPoint& a, const PRPoint& b) { return a.recall < b.recall; });
    // Precision envelope: running max from the right.
    for (std::size_t i = pts.size(); i-- > 1;) pts[i - 1].precision = std::max(pts[i - 1].precision, pts[i].precision);
    double area = 0.0;
    double prev_recall = 0.0;
    for (const auto& p : pts) {
        area += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    return area;
}

std::vector<PRPoint> odap_curve(std::span<const Detection> dets, std::span<const GroundTruth> gts, double iou_thresh) {
    const std::size_t n_gt = total_gt(gts);
    const auto by = group_by_image(dets, gts);
    std::size_t n_max = 0;
    for (const auto& g : gts) n_max = std::max(n_max, g.boxes.size());

    std::vector<PRPoint> curve;
    for (std::size_t n = 1; n <= n_max; ++n) {
        std::size_t tp = 0;
        std::size_t retained = 0;
        for (const auto& [id, v] : by) {
            const auto kept = boxes_of(v, n);
            retained += kept.size();
            const auto flags = match_greedy(kept, gt_of(gts, id).boxes, iou_thresh);
            tp += static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
        }
        const double precision = retained == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(retained);
        curve.push_back({precision, static_cast<double>(tp) / static_cast<double>(n_gt), n});
    }
    return curve;
}

std::vector<double> coco_iou_thresholds() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
    return t;
}

OdapResult odap(std::span<const Detection> dets, std::span<const GroundTruth> gts, std::span<const double> iou_thresholds) {
    if (iou_thresholds.empty()) throw std::invalid_argument("odap: no IoU thresholds");
    OdapResult r;
    r.thresholds.assign(iou_thresholds.begin(), iou_thresholds.end());
    for (double t : iou_thresholds) r.per_threshold.push_back(envelope_area(odap_curve(dets, gts, t)));
    r.mean = std::accumulate(r.per_threshold.begin(), r.per_threshold.end(), 0.0) /
             static_cast<double>(r.per_threshold.size());
    return r;
}

double mask_iou(const GridMask& a, const GridMask& b) {
    if (a.height != b.height || a.width != b.width) throw std::invalid_argument("mask_iou: resolution mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        const bool x = a.cells[i] != 0, y = b.cells[i] != 0;
        inter += x && y;
        uni += x || y;
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double miou(std::span<const ImageMasks> predictions, std::span<const GroundTruth> gts) {
    std::map<std::string, const ImageMasks*> pred_by;
    for (const auto& p : predictions) {
        bool known = false;
        for (const auto& g : gts) known = known || g.image_id == p.image_id;
        if (!known) throw std::invalid_argument("prediction for unknown image id: " + p.image_id);
        pred_by[p.image_id] = &p;
    }
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& g : gts) {
        if (g.masks.size() != g.boxes.size()) {
            throw std::invalid_argument("miou: ground truth for " + g.image_id + " lacks masks");
        }
        const std::size_t h = g.height, w = g.width;
        std::vector<GridMask> preds;
        if (auto it = pred_by.find(g.image_id); it != pred_by.end()) preds = it->second->masks;
        GridMask gt_bg(h, w), pred_bg(h, w);
        std::fill(gt_bg.cells.begin(), gt_bg.cells.end(), 1);
        std::fill(pred_bg.cells.begin(), pred_bg.cells.end(), 1);
        for (const auto& m : g.masks) {
            if (m.height != h || m.width != w) throw std::invalid_argument("miou: resolution mismatch in " + g.image_id);
            for (std::size_t i = 0; i < m.cells.size(); ++i) {
                if (m.cells[i]) gt_bg.cells[i] = 0;
            }
        }
        for (const auto& m : preds) {
            if (m.height != h || m.width != w) throw std::invalid_argument("miou: resolution mismatch in " + g.image_id);
            for (std::size_t i = 0; i < m.cells.size(); ++i) {
                if (m.cells[i]) pred_bg.cells[i] = 0;
            }
        }
        for (const auto& m : g.masks) {
            double best = 0.0;
            for (const auto& p : preds) best = std::max(best, mask_iou(m, p));
            total += best;
            ++count;
        }
        if (gt_bg.empty()) continue;
        double best_bg = mask_iou(gt_bg, pred_bg);
        for (const auto& p : preds) best_bg = std::max(best_bg, mask_iou(gt_bg, p));
        total += best_bg;
        ++count;
    }
    if (count == 0) throw std::invalid_argument("miou: no ground truth");
    return total / static_cast<double>(count);
}

}  // namespace uod
