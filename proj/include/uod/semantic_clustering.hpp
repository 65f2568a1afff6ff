#pragma once
// Dataset-level clustering of the selected proposal features: silhouette
// model selection, background pattern and Fg/Bg cluster labelling.

#include "uod/kmeans.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace uod {

// Mean silhouette with Euclidean distances on the given points. Points in
// singleton clusters contribute 0. Throws std::invalid_argument with fewer
// than 2 clusters or when every cluster is a singleton.
double silhouette_score(PointsView points, std::span<const int> labels);

struct KRange {
    std::size_t min = 2;
    std::size_t max = 30;
};

struct SelectKOptions {
    std::size_t silhouette_sample = 5000;
    KMeansOptions kmeans{};
};

struct SelectKResult {
    std::size_t k = 0;
    double silhouette = 0.0;
    std::vector<double> scores;  // scores[i] for k = range.min + i
    KMeansResult clustering;     // kmeans at the chosen k
};

// argmax over the range of silhouette(kmeans(points, k, seed)); ties go to the
// smallest k. The range must satisfy 2 <= min <= max <= n - 1.
SelectKResult select_k(PointsView points, KRange range, std::uint64_t seed, const SelectKOptions& options = {});

// Mean of the unit-normalized vectors. May be (near) zero; label_clusters rejects that.
std::vector<double> compute_bg_pattern(PointsView bottom_features);

// is_foreground[j] = (1 - cos(centroid_j, bg_pattern)) >= t_bg.
// Throws InvariantError("bg_pattern") for a zero pattern and PipelineError
// when no cluster is foreground.
std::vector<bool> label_clusters(PointsView centroids, std::span<const double> bg_pattern, double t_bg);

struct ClusterModel {
    std::size_t dim = 0;
    std::vector<float> centroids;  // k_g x dim
    std::vector<bool> is_foreground;
    std::vector<double> bg_pattern;
    double t_bg = 0.8;
    std::vector<int> class_ids;  // per centroid; -1 for background, contiguous from 0 otherwise
    double silhouette = 0.0;

    std::size_t k_g() const noexcept { return is_foreground.size(); }
    std::size_t n_classes() const noexcept;
    std::span<const float> centroid(std::size_t j) const noexcept { return {centroids.data() + j * dim, dim}; }
    friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

struct FitParams {
    KRange k_range{};
    double t_bg = 0.8;
    std::uint64_t seed = 0;
    SelectKOptions select{};
};

// top_features: every image's top-P CLS features; bottom_features: every
// image's bottom-Q CLS features. Rows are unit-normalized before clustering.
ClusterModel fit(PointsView top_features, PointsView bottom_features, const FitParams& params);

// JSON description plus a binary sidecar holding the centroid tensor
// ("UODC", u32 version, u32 rows, u32 cols, f32 row-major, little-endian).
void save_cluster_model(const ClusterModel& model, const std::filesystem::path& json_path);
ClusterModel load_cluster_model(const std::filesystem::path& json_path);

}  // namespace uod
