#include "uod/kmeans.hpp"

#include "uod/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace uod {
namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) noexcept { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::span<const double> centroid(const std::vector<double>& c, std::size_t j, std::size_t dim) {
    return {c.data() + j * dim, dim};
}

std::vector<double> plus_plus_init(PointsView pts, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = pts.size();
    const std::size_t dim = pts.dim;
    std::vector<double> centers;
    centers.reserve(k * dim);
    const auto first = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
    centers.insert(centers.end(), pts.row(first).begin(), pts.row(first).end());

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = simd::squared_distance(pts.row(i), pts.row(first));
    for (std::size_t c = 1; c < k; ++c) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = n;
        if (total > 0.0) {
            const double u = uniform01(rng) * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > u && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {
                // Rounding at the tail of the cumulative sum.
                for (std::size_t i = n; i-- > 0;) {
                    if (d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
        }
        if (pick == n) throw std::invalid_argument("kmeans: fewer distinct points than clusters");
        centers.insert(centers.end(), pts.row(pick).begin(), pts.row(pick).end());
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], simd::squared_distance(pts.row(i), pts.row(pick)));
    }
    return centers;
}

// Nearest centroid per point, lowest index on ties. Returns the distances.
std::vector<double> assign(PointsView pts, const std::vector<double>& centers, std::size_t k, std::vector<int>& labels) {
    const std::size_t n = pts.size();
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (std::size_t j = 0; j < k; ++j) {
            const double d = simd::squared_distance(pts.row(i), centroid(centers, j, pts.dim));
            if (d < best) {
                best = d;
                arg = static_cast<int>(j);
            }
        }
        labels[i] = arg;
        dist[i] = best;
    }
    return dist;
}

// Moves the farthest points into empty clusters. Returns false if nothing was empty.
bool reseed_empty(PointsView pts, std::vector<double>& centers, std::size_t k, std::vector<int>& labels,
                  std::vector<double>& dist) {
    std::vector<std::size_t> sizes(k, 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    bool changed = false;
    for (std::size_t j = 0; j < k; ++j) {
        if (sizes[j] != 0) continue;
        std::size_t far = pts.size();
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (sizes[static_cast<std::size_t>(labels[i])] < 2) continue;
            if (far == pts.size() || dist[i] > dist[far]) far = i;
        }
        if (far == pts.size()) throw std::invalid_argument("kmeans: cannot fill empty cluster");
        --sizes[static_cast<std::size_t>(labels[far])];
        labels[far] = static_cast<int>(j);
        sizes[j] = 1;
        dist[far] = 0.0;
        std::copy(pts.row(far).begin(), pts.row(far).end(), centers.begin() + static_cast<std::ptrdiff_t>(j * pts.dim));
        changed = true;
    }
    return changed;
}

std::vector<double> means(PointsView pts, const std::vector<int>& labels, std::size_t k, const std::vector<double>& old) {
    const std::size_t dim = pts.dim;
    std::vector<double> sum(k * dim, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto l = static_cast<std::size_t>(labels[i]);
        simd::axpy(1.0, pts.row(i), std::span<double>(sum.data() + l * dim, dim));
        ++count[l];
    }
    for (std::size_t j = 0; j < k; ++j) {
        if (count[j] == 0) {
            std::copy_n(old.begin() + static_cast<std::ptrdiff_t>(j * dim), dim, sum.begin() + static_cast<std::ptrdiff_t>(j * dim));
            continue;
        }
        for (std::size_t t = 0; t < dim; ++t) sum[j * dim + t] /= static_cast<double>(count[j]);
    }
    return sum;
}

KMeansResult lloyd(PointsView pts, std::size_t k, std::mt19937_64& rng, const KMeansOptions& opt) {
    std::vector<double> centers = plus_plus_init(pts, k, rng);
    std::vector<int> labels(pts.size(), 0);
    for (std::size_t it = 0; it < opt.max_iter; ++it) {
        auto dist = assign(pts, centers, k, labels);
        reseed_empty(pts, centers, k, labels, dist);
        auto next = means(pts, labels, k, centers);
        double shift = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            shift = std::max(shift, simd::squared_distance(centroid(next, j, pts.dim), centroid(centers, j, pts.dim)));
        }
        centers = std::move(next);
        if (std::sqrt(shift) < opt.tolerance) break;
    }
    // Final assignment against the converged centroids, unless it would empty a cluster.
    std::vector<int> final_labels(pts.size());
    assign(pts, centers, k, final_labels);
    std::vector<std::size_t> sizes(k, 0);
    for (int l : final_labels) ++sizes[static_cast<std::size_t>(l)];
    if (std::find(sizes.begin(), sizes.end(), std::size_t{0}) == sizes.end()) {
        labels = std::move(final_labels);
        centers = means(pts, labels, k, centers);
    }

    KMeansResult r;
    r.k = k;
    r.labels = std::move(labels);
    r.centroids = std::move(centers);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        r.inertia += simd::squared_distance(pts.row(i), centroid(r.centroids, static_cast<std::size_t>(r.labels[i]), pts.dim));
    }
    return r;
}

}  // namespace

std::size_t count_distinct(PointsView points) {
    const std::size_t n = points.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto less = [&](std::size_t a, std::size_t b) {
        const auto ra = points.row(a);
        const auto rb = points.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    };
    std::sort(idx.begin(), idx.end(), less);
    std::size_t distinct = n == 0 ? 0 : 1;
    for (std::size_t i = 1; i < n; ++i) {
        const auto ra = points.row(idx[i - 1]);
        const auto rb = points.row(idx[i]);
        if (!std::equal(ra.begin(), ra.end(), rb.begin())) ++distinct;
    }
    return distinct;
}

KMeansResult kmeans(PointsView points, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
    if (k == 0) throw std::invalid_argument("kmeans: k must be >= 1");
    if (points.dim == 0 || points.data.size() % points.dim != 0) throw std::invalid_argument("kmeans: malformed point buffer");
    if (points.size() < k) throw std::invalid_argument("kmeans: fewer points than clusters");
    if (count_distinct(points) < k) throw std::invalid_argument("kmeans: fewer distinct points than clusters");

    KMeansResult best;
    const std::size_t runs = std::max<std::size_t>(options.n_init, 1);
    for (std::size_t r = 0; r < runs; ++r) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(r)));
        KMeansResult cur = lloyd(points, k, rng, options);
        if (r == 0 || cur.inertia < best.inertia) best = std::move(cur);
    }
    return best;
}

}  // namespace uod
