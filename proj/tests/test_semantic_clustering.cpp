#include "uod/error.hpp"
#include "uod/semantic_clustering.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

using namespace uod;

namespace {

// n points per blob around well separated random centres.
std::vector<double> blobs(std::mt19937_64& rng, std::size_t n_blobs, std::size_t per_blob, std::size_t dim,
                          double spread = 0.05, std::vector<int>* truth = nullptr) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> pts;
    for (std::size_t b = 0; b < n_blobs; ++b) {
        std::vector<double> c(dim);
        for (auto& x : c) x = 3.0 * n(rng);
        for (std::size_t i = 0; i < per_blob; ++i) {
            for (std::size_t d = 0; d < dim; ++d) pts.push_back(c[d] + spread * n(rng));
            if (truth) truth->push_back(static_cast<int>(b));
        }
    }
    return pts;
}

std::vector<std::vector<double>> rows(const std::vector<double>& flat, std::size_t dim) {
    std::vector<std::vector<double>> r;
    for (std::size_t i = 0; i < flat.size(); i += dim) r.emplace_back(flat.begin() + i, flat.begin() + i + dim);
    return r;
}

}  // namespace

TEST_CASE("silhouette of two triangles equals the hand computation") {
    const double h = std::sqrt(3.0) / 2.0;
    const std::vector<double> p{0, 0, 1, 0, 0.5, h, 10, 0, 11, 0, 10.5, h};
    const std::vector<int> labels{0, 0, 0, 1, 1, 1};
    // every within-triangle mean distance is 1; mean distances to the other triangle:
    const double r91 = std::sqrt(91.0), r111 = std::sqrt(111.0);
    const double b[6] = {(10 + 11 + r111) / 3, (9 + 10 + r91) / 3, (r91 + r111 + 10) / 3,
                         (10 + 9 + r91) / 3,   (11 + 10 + r111) / 3, (r111 + r91 + 10) / 3};
    double want = 0;
    for (double bi : b) want += (bi - 1.0) / bi;
    want /= 6.0;
    CHECK(std::abs(silhouette_score({p, 2}, labels) - want) <= 1e-12);
}

TEST_CASE("two tight far-apart clusters score above 0.9") {
    std::mt19937_64 rng(1);
    std::vector<int> truth;
    const auto p = blobs(rng, 2, 30, 4, 0.05, &truth);
    CHECK(silhouette_score({p, 4}, truth) > 0.9);
}

TEST_CASE("random labels on one blob score near zero") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> n(0.0, 1.0);
        std::vector<double> p(200 * 3);
        for (auto& x : p) x = n(rng);
        std::vector<int> labels(200);
        for (auto& l : labels) l = static_cast<int>(rng() % 2);
        const double s = silhouette_score({p, 3}, labels);
        CHECK(std::abs(s) < 0.15);
        CHECK(std::abs(s - oracle::silhouette(rows(p, 3), labels)) <= 1e-12);
    }
}

TEST_CASE("silhouette matches the definition, singletons included") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> p(15 * 2);
        for (auto& x : p) x = u(rng);
        std::vector<int> labels(15);
        for (auto& l : labels) l = static_cast<int>(rng() % 4);
        labels[0] = 7;  // a singleton cluster
        const double s = silhouette_score({p, 2}, labels);
        CHECK(s >= -1.0);
        CHECK(s <= 1.0);
        CHECK(std::abs(s - oracle::silhouette(rows(p, 2), labels)) <= 1e-12);
    }
}

TEST_CASE("silhouette needs two clusters and a non-singleton") {
    const std::vector<double> p{0, 1, 2};
    CHECK_THROWS_AS(silhouette_score({p, 1}, std::vector<int>{0, 0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(silhouette_score({p, 1}, std::vector<int>{0, 1, 2}), std::invalid_argument);
}

TEST_CASE("select_k recovers planted blob counts") {
    std::mt19937_64 rng(7);
    const auto three = blobs(rng, 3, 20, 5);
    CHECK(select_k({three, 5}, {2, 8}, 1).k == 3);
    CHECK(select_k({three, 5}, {2, 2}, 1).k == 2);
    const auto two = blobs(rng, 2, 20, 5);
    const auto r = select_k({two, 5}, {2, 5}, 1);
    CHECK(r.k == 2);
    CHECK(r.scores.size() == 4);
    CHECK(r.silhouette == r.scores[0]);
}

TEST_CASE("select_k on a subsample still finds the blobs") {
    std::mt19937_64 rng(8);
    const auto four = blobs(rng, 4, 100, 6);
    SelectKOptions o;
    o.silhouette_sample = 60;
    CHECK(select_k({four, 6}, {2, 7}, 3, o).k == 4);
    CHECK_THROWS_AS(select_k({four, 6}, {2, 400}, 3, o), std::invalid_argument);
}

TEST_CASE("background pattern") {
    const std::vector<double> v{3, 4};
    const auto one = compute_bg_pattern({v, 2});
    CHECK(one[0] == doctest::Approx(0.6));
    CHECK(one[1] == doctest::Approx(0.8));

    const std::vector<double> opposite{3, 4, -3, -4};
    const auto zero = compute_bg_pattern({opposite, 2});
    CHECK(std::abs(zero[0]) < 1e-15);
    CHECK(std::abs(zero[1]) < 1e-15);
    const std::vector<double> c{1, 0, 0, 1};
    CHECK_THROWS_AS(label_clusters({c, 2}, zero, 0.8), InvariantError);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0, 1);
    std::vector<double> three(3 * 5);
    for (auto& x : three) x = n(rng);
    const auto got = compute_bg_pattern({three, 5});
    for (std::size_t d = 0; d < 5; ++d) {
        double want = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            double norm = 0;
            for (std::size_t e = 0; e < 5; ++e) norm += three[i * 5 + e] * three[i * 5 + e];
            want += three[i * 5 + d] / std::sqrt(norm) / 3.0;
        }
        CHECK(std::abs(got[d] - want) <= 1e-12);
    }
}

TEST_CASE("cluster labelling by cosine distance to the background") {
    const std::vector<double> bg{1, 0, 0};
    const std::vector<double> c{2, 0, 0, 0, 5, 0, 1, 1, 0};
    const auto fg = label_clusters({c, 3}, bg, 0.8);
    CHECK(fg == std::vector<bool>{false, true, false});  // 1 - cos45 = 0.29
    const std::vector<double> scaled{20, 0, 0, 0, 0.5, 0, 7, 7, 0};
    CHECK(label_clusters({scaled, 3}, bg, 0.8) == fg);
    CHECK_THROWS_AS(label_clusters({std::vector<double>{1, 0, 0}, 3}, bg, 0.8), PipelineError);
    CHECK(FitParams{}.t_bg == 0.8);
}

TEST_CASE("fit with one blob near the background gives 3 clusters and 2 classes") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0, 0.03);
    const std::size_t dim = 8;
    std::vector<double> top, bottom;
    const int axes[3] = {0, 1, 2};  // axis 0 doubles as the background direction
    for (int b = 0; b < 3; ++b) {
        for (int i = 0; i < 15; ++i) {
            for (std::size_t d = 0; d < dim; ++d) top.push_back((static_cast<int>(d) == axes[b] ? 1.0 : 0.0) + n(rng));
        }
    }
    for (int i = 0; i < 10; ++i)
        for (std::size_t d = 0; d < dim; ++d) bottom.push_back((d == 0 ? 1.0 : 0.0) + n(rng));
    FitParams p;
    p.k_range = {2, 6};
    p.seed = 5;
    const auto m = fit({top, dim}, {bottom, dim}, p);
    CHECK(m.k_g() == 3);
    CHECK(m.n_classes() == 2);
    std::vector<int> ids;
    for (std::size_t j = 0; j < m.k_g(); ++j) {
        if (m.is_foreground[j]) ids.push_back(m.class_ids[j]);
        else CHECK(m.class_ids[j] == -1);
    }
    CHECK(ids == std::vector<int>{0, 1});
    CHECK(fit({top, dim}, {bottom, dim}, p) == m);

    testing::TempDir dir("model");
    save_cluster_model(m, dir.path() / "model.json");
    CHECK(load_cluster_model(dir.path() / "model.json") == m);
    std::ofstream(dir.path() / "model.bin", std::ios::binary | std::ios::trunc) << "XXXX";
    CHECK_THROWS_AS(load_cluster_model(dir.path() / "model.json"), FormatError);
}

TEST_CASE("fit on identical features fails") {
    std::vector<double> top(20 * 3, 1.0), bottom(3, 1.0);
    FitParams p;
    p.k_range = {2, 4};
    CHECK_THROWS_AS(fit({top, 3}, {bottom, 3}, p), std::invalid_argument);
}
