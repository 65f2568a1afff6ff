#pragma once
// Objectness re-ranking of region proposals: a weighted sum of min-max
// normalized local similarity, global dissimilarity and gray-level entropy.

#include "uod/feature_store.hpp"
#include "uod/types.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace uod {

double cosine_similarity(std::span<const float> a, std::span<const float> b);
double iou(const Box& a, const Box& b) noexcept;
// Shannon entropy in bits of a 256-bin count histogram.
double entropy(const GrayHistogram& hist);

enum class NeighborAggregation { sum, average };

struct ScoreTerms {
    bool local_similarity = true;
    bool global_dissimilarity = true;
    bool entropy = true;
};

struct RankingParams {
    double alpha = 0.7;
    double iou_threshold = 0.1;
    std::size_t top_p = 20;
    std::size_t bottom_q = 10;
    std::size_t max_considered = 500;
    NeighborAggregation aggregation = NeighborAggregation::sum;
    ScoreTerms terms{};  // disabled terms contribute 0 (ablations)

    void validate() const;
};

struct TermValues {
    double local_similarity = 0.0;
    double global_dissimilarity = 0.0;
    double entropy = 0.0;
};

// Entries are aligned with `order`: scores[k] belongs to proposal order[k].
struct RankedProposals {
    std::vector<std::size_t> order;     // indices into ProposalSet::proposals, best first
    std::vector<double> scores;         // non-increasing
    std::vector<TermValues> components;  // normalized to [0, 1]
    std::vector<TermValues> raw;         // before normalization
};

// Min-max normalization to [0, 1]; a constant vector maps to 0.5 everywhere.
// "Constant" means max - min <= 1e-12 * max(1, |max|).
std::vector<double> min_max_normalize(std::span<const double> values);

// Indices of the proposals kept by the max_considered cap: lowest
// original_rank first, input order on equal ranks.
std::vector<std::size_t> considered_proposals(const ProposalSet& props, std::size_t max_considered);

// Throws std::invalid_argument when fewer than 2 proposals are considered.
RankedProposals objectness_scores(const ProposalSet& props, const RankingParams& params);

struct PriorSelection {
    std::vector<std::size_t> top;     // proposal indices
    std::vector<std::size_t> bottom;  // proposal indices, disjoint from top
};

PriorSelection select_priors(const RankedProposals& ranked, const RankingParams& params);

// Proposal boxes of one image in ranked order.
struct RankedBoxes {
    std::string image_id;
    std::vector<Box> boxes;
};

// Fraction of ground-truth boxes covered (IoU >= iou_thresh) by one of the
// image's top-k boxes. Throws std::invalid_argument if there is no ground truth.
double detection_rate(std::span<const RankedBoxes> ranked, std::span<const GroundTruth> gts, std::size_t k,
                      double iou_thresh = 0.5);

}  // namespace uod
