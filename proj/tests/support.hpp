#pragma once
// Fixtures shared by the test binaries.

#include "uod/feature_store.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testing {

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                ("uod_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::vector<float> random_vector(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<float> n(0.0f, 1.0f);
    std::vector<float> v(dim);
    for (auto& x : v) x = n(rng);
    return v;
}

// Histogram of a box's integer crop with mass spread over `bins` bins from `first`.
inline uod::GrayHistogram histogram_for(const uod::Box& box, std::mt19937_64& rng, std::size_t first = 0,
                                        std::size_t bins = 256) {
    uod::GrayHistogram h{};
    const auto total = uod::crop_pixel_count(box);
    std::uniform_int_distribution<std::size_t> pick(first, first + bins - 1);
    for (std::uint64_t i = 0; i < total; ++i) ++h[pick(rng) % uod::kHistogramBins];
    return h;
}

inline uod::PatchFeatureMap random_feature_map(std::mt19937_64& rng, std::uint32_t h, std::uint32_t w,
                                               std::uint32_t dim, const std::string& id = "img") {
    uod::PatchFeatureMap f;
    f.image_id = id;
    f.h_patches = h;
    f.w_patches = w;
    f.dim = dim;
    for (std::size_t i = 0; i < std::size_t{h} * w; ++i) {
        const auto v = random_vector(rng, dim);
        f.values.insert(f.values.end(), v.begin(), v.end());
    }
    return f;
}

inline uod::Box random_box(std::mt19937_64& rng, double width, double height) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x1 = std::floor(u(rng) * (width - 2));
    const double y1 = std::floor(u(rng) * (height - 2));
    const double x2 = x1 + 1 + std::floor(u(rng) * (width - x1 - 1));
    const double y2 = y1 + 1 + std::floor(u(rng) * (height - y1 - 1));
    return {x1, y1, x2, y2};
}

inline uod::ProposalSet random_proposals(std::mt19937_64& rng, std::size_t n, std::uint32_t dim,
                                         std::uint32_t width = 64, std::uint32_t height = 48) {
    uod::ProposalSet ps;
    ps.image_id = "img";
    ps.image_width = width;
    ps.image_height = height;
    std::uniform_int_distribution<std::uint32_t> rank(0, static_cast<std::uint32_t>(n));
    std::uniform_int_distribution<std::size_t> spread(1, 200);
    for (std::size_t i = 0; i < n; ++i) {
        uod::Proposal p;
        p.box = random_box(rng, width, height);
        p.original_rank = rank(rng);
        p.cls = random_vector(rng, dim);
        p.histogram = histogram_for(p.box, rng, 0, spread(rng));
        ps.proposals.push_back(std::move(p));
    }
    return ps;
}

inline uod::ImageRecord random_record(std::mt19937_64& rng, std::uint32_t h, std::uint32_t w, std::uint32_t dim,
                                      std::size_t n_props, const std::string& id = "img") {
    uod::ImageRecord r;
    r.features = random_feature_map(rng, h, w, dim, id);
    r.proposals = random_proposals(rng, n_props, dim, w * 16, h * 16);
    r.proposals.image_id = id;
    return r;
}

}  // namespace testing
