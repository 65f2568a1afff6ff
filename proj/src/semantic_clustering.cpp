#include "uod/semantic_clustering.hpp"

#include "byte_io.hpp"
#include "uod/error.hpp"
#include "uod/simd/kernels.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace uod {
namespace {

// Condensed upper-triangular Euclidean distance matrix.
class DistanceMatrix {
public:
    explicit DistanceMatrix(PointsView pts) : n_(pts.size()), d_(n_ * (n_ > 0 ? n_ - 1 : 0) / 2) {
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = i + 1; j < n_; ++j) d_[index(i, j)] = std::sqrt(simd::squared_distance(pts.row(i), pts.row(j)));
        }
    }
    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const noexcept {
        if (i == j) return 0.0;
        return i < j ? d_[index(i, j)] : d_[index(j, i)];
    }

private:
    std::size_t index(std::size_t i, std::size_t j) const noexcept { return i * n_ - i * (i + 1) / 2 + (j - i - 1); }
    std::size_t n_;
    std::vector<double> d_;
};

double silhouette(const DistanceMatrix& dist, std::span<const int> labels) {
    const std::size_t n = dist.size();
    if (labels.size() != n) throw std::invalid_argument("silhouette: label count mismatch");
    // Remap labels to 0..c-1.
    std::vector<int> uniq(labels.begin(), labels.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    const std::size_t c = uniq.size();
    if (c < 2) throw std::invalid_argument("silhouette: need at least 2 clusters");
    if (c == n) throw std::invalid_argument("silhouette: every cluster is a singleton");
    std::vector<std::size_t> lab(n);
    std::vector<std::size_t> sizes(c, 0);
    for (std::size_t i = 0; i < n; ++i) {
        lab[i] = static_cast<std::size_t>(std::lower_bound(uniq.begin(), uniq.end(), labels[i]) - uniq.begin());
        ++sizes[lab[i]];
    }

    double total = 0.0;
    std::vector<double> sums(c);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) sums[lab[j]] += dist(i, j);
        const std::size_t own = lab[i];
        if (sizes[own] < 2) continue;
        const double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < c; ++k) {
            if (k != own) b = std::min(b, sums[k] / static_cast<double>(sizes[k]));
        }
        const double m = std::max(a, b);
        if (m > 0.0) total += (b - a) / m;
    }
    return total / static_cast<double>(n);
}

std::vector<double> unit_rows(PointsView pts, const char* field) {
    std::vector<double> out(pts.data.begin(), pts.data.end());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double norm = std::sqrt(simd::dot(pts.row(i), pts.row(i)));
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw InvariantError(std::string(field) + "[" + std::to_string(i) + "]", "zero or non-finite feature vector");
        }
        for (std::size_t t = 0; t < pts.dim; ++t) out[i * pts.dim + t] /= norm;
    }
    return out;
}

}  // namespace

double silhouette_score(PointsView points, std::span<const int> labels) {
    return silhouette(DistanceMatrix(points), labels);
}

SelectKResult select_k(PointsView points, KRange range, std::uint64_t seed, const SelectKOptions& options) {
    const std::size_t n = points.size();
    if (range.min < 2 || range.min > range.max) throw std::invalid_argument("select_k: empty k range");
    if (n < 3 || range.max > n - 1) throw std::invalid_argument("select_k: k range exceeds points - 1");

    // Uniform subsample shared by every candidate k.
    std::vector<std::size_t> sample(n);
    std::iota(sample.begin(), sample.end(), 0);
    if (n > options.silhouette_sample) {
        std::mt19937_64 rng(seed ^ 0x51u);
        for (std::size_t i = n - 1; i > 0; --i) {
            const auto j = static_cast<std::size_t>((rng() >> 11) * 0x1.0p-53 * static_cast<double>(i + 1));
            std::swap(sample[i], sample[j]);
        }
        sample.resize(options.silhouette_sample);
        std::sort(sample.begin(), sample.end());
    }
    std::vector<double> sub;
    sub.reserve(sample.size() * points.dim);
    for (std::size_t i : sample) sub.insert(sub.end(), points.row(i).begin(), points.row(i).end());
    const DistanceMatrix dist(PointsView{sub, points.dim});

    SelectKResult best;
    for (std::size_t k = range.min; k <= range.max; ++k) {
        KMeansResult km = kmeans(points, k, seed, options.kmeans);
        std::vector<int> sub_labels;
        sub_labels.reserve(sample.size());
        for (std::size_t i : sample) sub_labels.push_back(km.labels[i]);
        const double s = silhouette(dist, sub_labels);
        best.scores.push_back(s);
        if (best.k == 0 || s > best.silhouette) {
            best.k = k;
            best.silhouette = s;
            best.clustering = std::move(km);
        }
    }
    return best;
}

std::vector<double> compute_bg_pattern(PointsView bottom_features) {
    if (bottom_features.size() == 0) throw std::invalid_argument("compute_bg_pattern: no background features");
    const auto unit = unit_rows(bottom_features, "bottom_features");
    std::vector<double> mean(bottom_features.dim, 0.0);
    for (std::size_t i = 0; i < bottom_features.size(); ++i) {
        simd::axpy(1.0, std::span<const double>(unit.data() + i * bottom_features.dim, bottom_features.dim), mean);
    }
    for (double& v : mean) v /= static_cast<double>(bottom_features.size());
    return mean;
}

std::vector<bool> label_clusters(PointsView centroids, std::span<const double> bg_pattern, double t_bg) {
    if (bg_pattern.size() != centroids.dim) throw std::invalid_argument("label_clusters: dimension mismatch");
    const double bg_norm = std::sqrt(simd::dot(bg_pattern, bg_pattern));
    if (!(bg_norm > 1e-12)) throw InvariantError("bg_pattern", "degenerate (zero) background pattern");
    std::vector<bool> fg(centroids.size());
    bool any = false;
    for (std::size_t j = 0; j < centroids.size(); ++j) {
        const double c_norm = std::sqrt(simd::dot(centroids.row(j), centroids.row(j)));
        if (!(c_norm > 0.0)) throw InvariantError("centroids[" + std::to_string(j) + "]", "zero centroid");
        const double cos = std::clamp(simd::dot(centroids.row(j), bg_pattern) / (c_norm * bg_norm), -1.0, 1.0);
        fg[j] = (1.0 - cos) >= t_bg;
        any = any || fg[j];
    }
    if (!any) {
        throw PipelineError("every cluster is within t_bg of the background pattern; lower t_bg (currently " +
                            std::to_string(t_bg) + ")");
    }
    return fg;
}

std::size_t ClusterModel::n_classes() const noexcept {
    return static_cast<std::size_t>(std::count(is_foreground.begin(), is_foreground.end(), true));
}

ClusterModel fit(PointsView top_features, PointsView bottom_features, const FitParams& params) {
    if (top_features.dim == 0 || top_features.dim != bottom_features.dim) {
        throw std::invalid_argument("fit: top and bottom features must share a nonzero dimension");
    }
    if (top_features.size() < params.k_range.max + 1) {
        throw std::invalid_argument("fit: need at least k_range.max + 1 feature vectors");
    }
    const auto unit = unit_rows(top_features, "top_features");
    const PointsView pts{unit, top_features.dim};
    SelectKResult sel = select_k(pts, params.k_range, params.seed, params.select);

    ClusterModel model;
    model.dim = top_features.dim;
    model.centroids.assign(sel.clustering.centroids.begin(), sel.clustering.centroids.end());
    model.bg_pattern = compute_bg_pattern(bottom_features);
    model.t_bg = params.t_bg;
    model.silhouette = sel.silhouette;
    // Label from the stored (float) centroids so a reloaded model decides identically.
    std::vector<double> stored(model.centroids.begin(), model.centroids.end());
    model.is_foreground = label_clusters(PointsView{stored, model.dim}, model.bg_pattern, params.t_bg);
    int next = 0;
    for (bool f : model.is_foreground) model.class_ids.push_back(f ? next++ : -1);
    return model;
}

void save_cluster_model(const ClusterModel& model, const std::filesystem::path& json_path) {
    auto bin_path = json_path;
    bin_path.replace_extension(".bin");
    detail::ByteWriter w;
    w.put_bytes("UODC");
    w.put<std::uint32_t>(1);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.k_g()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.dim));
    w.put_all<float>(model.centroids);
    detail::write_file_bytes(bin_path.string(), w.take());

    nlohmann::json j;
    j["version"] = 1;
    j["k_g"] = model.k_g();
    j["dim"] = model.dim;
    j["t_bg"] = model.t_bg;
    j["silhouette"] = model.silhouette;
    j["is_foreground"] = model.is_foreground;
    j["class_ids"] = model.class_ids;
    j["bg_pattern"] = model.bg_pattern;
    j["centroids_file"] = bin_path.filename().string();
    std::ofstream out(json_path);
    if (!out) throw FormatError(FormatErrorKind::io, "cannot write " + json_path.string());
    out << j.dump(2) << '\n';
}

ClusterModel load_cluster_model(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw FormatError(FormatErrorKind::io, "cannot open " + json_path.string());
    ClusterModel m;
    std::string centroids_file;
    try {
        nlohmann::json j;
        in >> j;
        m.dim = j.at("dim").get<std::size_t>();
        m.t_bg = j.at("t_bg").get<double>();
        m.silhouette = j.at("silhouette").get<double>();
        m.is_foreground = j.at("is_foreground").get<std::vector<bool>>();
        m.class_ids = j.at("class_ids").get<std::vector<int>>();
        m.bg_pattern = j.at("bg_pattern").get<std::vector<double>>();
        centroids_file = j.at("centroids_file").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw InvariantError("cluster_model", e.what());
    }
    const auto bytes = detail::read_file_bytes((json_path.parent_path() / centroids_file).string());
    detail::ByteReader r(bytes);
    if (r.remaining() < 4 || r.get_bytes(4, "magic") != "UODC") {
        throw FormatError(FormatErrorKind::bad_magic, "centroid sidecar has bad magic");
    }
    if (r.get<std::uint32_t>("version") != 1) throw FormatError(FormatErrorKind::version_mismatch, "centroid sidecar version");
    const auto rows = r.get<std::uint32_t>("rows");
    const auto cols = r.get<std::uint32_t>("cols");
    if (rows != m.is_foreground.size() || cols != m.dim) throw InvariantError("centroids", "shape disagrees with JSON");
    m.centroids.resize(std::size_t{rows} * cols);
    r.get_all<float>(m.centroids, "centroids");
    if (m.class_ids.size() != rows || m.bg_pattern.size() != m.dim) {
        throw InvariantError("cluster_model", "inconsistent field lengths");
    }
    return m;
}

}  // namespace uod
