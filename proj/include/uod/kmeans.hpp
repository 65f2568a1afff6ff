#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace uod {

// Read-only view over n points of a fixed dimension, row-major.
struct PointsView {
    std::span<const double> data;
    std::size_t dim = 0;

    std::size_t size() const noexcept { return dim == 0 ? 0 : data.size() / dim; }
    std::span<const double> row(std::size_t i) const noexcept { return data.subspan(i * dim, dim); }
};

struct KMeansOptions {
    std::size_t max_iter = 300;
    double tolerance = 1e-6;  // max centroid shift
    // Independent k-means++ restarts; the lowest inertia wins.
    std::size_t n_init = 10;
};

struct KMeansResult {
    std::vector<int> labels;
    std::vector<double> centroids;  // k x dim
    double inertia = 0.0;
    std::size_t k = 0;
};

// Seeded k-means++ followed by Lloyd iterations. Every returned cluster is
// nonempty. Throws std::invalid_argument if k == 0 or there are fewer
// distinct points than k.
KMeansResult kmeans(PointsView points, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

std::size_t count_distinct(PointsView points);

}  // namespace uod
