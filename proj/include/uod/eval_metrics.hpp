#pragma once
// Class-agnostic discovery metrics: AP@50, odAP, mIoU.

#include "uod/types.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uod {

struct Detection {
    std::string image_id;
    Box bbox;
    double score = 0.0;
    int category_id = 0;
    std::optional<GridMask> mask;
};

struct PRPoint {
    double precision = 0.0;
    double recall = 0.0;
    std::size_t retained_n = 0;
};

// Detections of one image, already sorted by score (descending). Each takes
// the unmatched ground truth of highest IoU (lowest index on ties) when that
// IoU reaches iou_thresh. Returns true-positive flags.
std::vector<bool> match_greedy(std::span<const Box> dets, std::span<const Box> gts, double iou_thresh);

// All-point interpolated AP over the score-sorted PR curve. Detections on
// images absent from `gts` are rejected; empty ground truth throws.
double average_precision(std::span<const Detection> dets, std::span<const GroundTruth> gts, double iou_thresh);
inline double ap50(std::span<const Detection> dets, std::span<const GroundTruth> gts) {
    return average_precision(dets, gts, 0.5);
}

// One PR point per retained count n = 1..max GT count per image.
std::vector<PRPoint> odap_curve(std::span<const Detection> dets, std::span<const GroundTruth> gts, double iou_thresh);

// Area under the precision envelope of the points, recall starting at 0.
double envelope_area(std::span<const PRPoint> points);

struct OdapResult {
    std::vector<double> thresholds;
    std::vector<double> per_threshold;
    double mean = 0.0;
};

std::vector<double> coco_iou_thresholds();  // 0.50:0.05:0.95

OdapResult odap(std::span<const Detection> dets, std::span<const GroundTruth> gts, std::span<const double> iou_thresholds);

struct ImageMasks {
    std::string image_id;
    std::vector<GridMask> masks;
};

double mask_iou(const GridMask& a, const GridMask& b);

// Mean over every ground-truth object mask and each image's ground-truth
// background of the IoU with the best-overlapping prediction. Objects compare
// against predicted instances; the background also compares against the
// predicted background (complement of all predicted instances). Images whose
// objects cover every pixel have no background term.
double miou(std::span<const ImageMasks> predictions, std::span<const GroundTruth> gts);

}  // namespace uod
