#include "uod/proposal_ranking.hpp"

#include "uod/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace uod {

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: length mismatch");
    const double na = std::sqrt(simd::dot(a, a));
    const double nb = std::sqrt(simd::dot(b, b));
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine_similarity: zero-norm vector");
    return std::clamp(simd::dot(a, b) / (na * nb), -1.0, 1.0);
}

double iou(const Box& a, const Box& b) noexcept {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double entropy(const GrayHistogram& hist) {
    std::uint64_t total = 0;
    for (auto c : hist) total += c;
    if (total == 0) throw std::invalid_argument("entropy: empty histogram");
    double h = 0.0;
    for (auto c : hist) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

void RankingParams::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) throw std::invalid_argument("iou_threshold must lie in (0, 1)");
    if (top_p < 1) throw std::invalid_argument("top_p must be >= 1");
    if (max_considered < 2) throw std::invalid_argument("max_considered must be >= 2");
}

std::vector<double> min_max_normalize(std::span<const double> values) {
    std::vector<double> out(values.size(), 0.5);
    if (values.empty()) return out;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = *hi - *lo;
    if (range <= 1e-12 * std::max(1.0, std::abs(*hi))) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / range;
    return out;
}

std::vector<std::size_t> considered_proposals(const ProposalSet& props, std::size_t max_considered) {
    std::vector<std::size_t> idx(props.proposals.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return props.proposals[a].original_rank < props.proposals[b].original_rank;
    });
    if (idx.size() > max_considered) idx.resize(max_considered);
    return idx;
}

RankedProposals objectness_scores(const ProposalSet& props, const RankingParams& params) {
    params.validate();
    const auto kept = considered_proposals(props, params.max_considered);
    const std::size_t m = kept.size();
    if (m < 2) throw std::invalid_argument("objectness_scores: need at least 2 proposals, min-max normalization is degenerate");

    std::vector<double> sim_l(m, 0.0), dis_g(m, 0.0), ent(m, 0.0);
    std::vector<std::size_t> n_local(m, 0), n_global(m, 0);
    for (std::size_t a = 0; a < m; ++a) {
        const Proposal& pa = props.proposals[kept[a]];
        ent[a] = entropy(pa.histogram);
        for (std::size_t b = a + 1; b < m; ++b) {
            const Proposal& pb = props.proposals[kept[b]];
            const double s = cosine_similarity(pa.cls, pb.cls);
            if (iou(pa.box, pb.box) >= params.iou_threshold) {
                sim_l[a] += s;
                sim_l[b] += s;
                ++n_local[a];
                ++n_local[b];
            } else {
                dis_g[a] += 1.0 - s;
                dis_g[b] += 1.0 - s;
                ++n_global[a];
                ++n_global[b];
            }
        }
    }
    if (params.aggregation == NeighborAggregation::average) {
        for (std::size_t a = 0; a < m; ++a) {
            if (n_local[a] > 0) sim_l[a] /= static_cast<double>(n_local[a]);
            if (n_global[a] > 0) dis_g[a] /= static_cast<double>(n_global[a]);
        }
    }

    const auto sim_n = min_max_normalize(sim_l);
    const auto dis_n = min_max_normalize(dis_g);
    const auto ent_n = min_max_normalize(ent);

    std::vector<double> score(m);
    for (std::size_t a = 0; a < m; ++a) {
        const double sl = params.terms.local_similarity ? sim_n[a] : 0.0;
        const double dg = params.terms.global_dissimilarity ? dis_n[a] : 0.0;
        const double h = params.terms.entropy ? ent_n[a] : 0.0;
        score[a] = params.alpha / 2.0 * (sl + dg) + (1.0 - params.alpha) * h;
    }

    // `kept` is already in original-rank order, so a stable sort breaks ties by rank.
    std::vector<std::size_t> pos(m);
    std::iota(pos.begin(), pos.end(), 0);
    std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

    RankedProposals out;
    out.order.reserve(m);
    for (std::size_t p : pos) {
        out.order.push_back(kept[p]);
        out.scores.push_back(score[p]);
        out.components.push_back({sim_n[p], dis_n[p], ent_n[p]});
        out.raw.push_back({sim_l[p], dis_g[p], ent[p]});
    }
    return out;
}

PriorSelection select_priors(const RankedProposals& ranked, const RankingParams& params) {
    const std::size_t m = ranked.order.size();
    const std::size_t n_top = std::min(params.top_p, m);
    const std::size_t n_bottom = std::min(params.bottom_q, m - n_top);
    PriorSelection sel;
    sel.top.assign(ranked.order.begin(), ranked.order.begin() + static_cast<std::ptrdiff_t>(n_top));
    sel.bottom.assign(ranked.order.end() - static_cast<std::ptrdiff_t>(n_bottom), ranked.order.end());
    return sel;
}

double detection_rate(std::span<const RankedBoxes> ranked, std::span<const GroundTruth> gts, std::size_t k,
                      double iou_thresh) {
    if (k < 1) throw std::invalid_argument("detection_rate: k must be >= 1");
    std::map<std::string, const RankedBoxes*> by_id;
    for (const auto& r : ranked) by_id[r.image_id] = &r;
    std::size_t total = 0;
    std::size_t covered = 0;
    for (const auto& gt : gts) {
        total += gt.boxes.size();
        const auto it = by_id.find(gt.image_id);
        if (it == by_id.end()) continue;
        const auto& boxes = it->second->boxes;
        const std::size_t n = std::min(k, boxes.size());
        for (const Box& g : gt.boxes) {
            for (std::size_t i = 0; i < n; ++i) {
                if (iou(boxes[i], g) >= iou_thresh) {
                    ++covered;
                    break;
                }
            }
        }
    }
    if (total == 0) throw std::invalid_argument("detection_rate: no ground-truth boxes");
    return static_cast<double>(covered) / static_cast<double>(total);
}

}  // namespace uod
