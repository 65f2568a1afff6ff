#include "uod/config.hpp"

#include "support.hpp"

#include <doctest.h>

#include <fstream>

using namespace uod;

TEST_CASE("defaults") {
    PipelineConfig c;
    CHECK(c.n_eigenvectors == 3);
    CHECK(c.thresh == 1.02);
    CHECK(c.alpha == 0.7);
    CHECK(c.iou_threshold == 0.1);
    CHECK(c.top_p == 20);
    CHECK(c.t_bg == 0.8);
    CHECK(c.temperature == 0.07);
    CHECK(c.affinity_floor == 1e-5);
    CHECK(c.binarize_tau == 0.2);
    CHECK_THROWS_AS(c.validate(), ConfigError);  // seed missing
    c.seed = 3;
    c.seed_set = true;
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("parse key = value with sections, comments and quotes") {
    const auto c = parse_config(R"(
# comment
archive_dir = "a # not a comment"
[clustering]
k_range = 3..9   # trailing
seed = 42
aggregation = average
binarize = true
region_feature_mode = "nearest_proposal"
)");
    CHECK(c.archive_dir == "a # not a comment");
    CHECK(c.k_range.min == 3);
    CHECK(c.k_range.max == 9);
    CHECK(c.seed == 42);
    CHECK(c.aggregation == NeighborAggregation::average);
    CHECK(c.binarize);
    CHECK(c.region_feature_mode == RegionFeatureMode::nearest_proposal);
    CHECK(parse_config("k_range = [4, 6]").k_range.max == 6);
}

TEST_CASE("errors carry origin and line") {
    try {
        parse_config("seed = 1\nnope = 2\n", "cfg.toml");
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("cfg.toml:2:") == 0);
        CHECK(std::string(e.what()).find("nope") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("seed"), ConfigError);
    CHECK_THROWS_AS(parse_config("top_p = -3"), ConfigError);
    CHECK_THROWS_AS(parse_config("alpha = x"), ConfigError);
    CHECK_THROWS_AS(parse_config("k_range = [5]"), ConfigError);
    CHECK_THROWS_AS(parse_config("aggregation = max"), ConfigError);
}

TEST_CASE("validation names the offending field") {
    auto c = parse_config("seed = 1\nalpha = 1.5");
    try {
        c.validate();
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("alpha") == 0);
    }
    CHECK_THROWS_AS(parse_config("seed = 1\nthresh = 1.0").validate(), ConfigError);
    CHECK_THROWS_AS(parse_config("seed = 1\nk_range = 1..4").validate(), ConfigError);
    CHECK_THROWS_AS(parse_config("seed = 1\ntemperature = 0").validate(), ConfigError);
}

TEST_CASE("overrides apply on top of a file") {
    auto c = parse_config("seed = 1\ntop_p = 5");
    apply_setting(c, "top_p", "7");
    apply_setting(c, "k_range", "2..4");
    CHECK(c.top_p == 7);
    CHECK(c.ranking().top_p == 7);
    CHECK(c.fit().k_range.max == 4);
    CHECK(c.fit().seed == 1);
    CHECK_THROWS_AS(apply_setting(c, "bogus", "1"), ConfigError);
    for (const auto& k : config_keys()) CHECK_FALSE(k.empty());
}

TEST_CASE("snapshot round trip") {
    auto c = parse_config("seed = 9\nalpha = 0.55\nk_range = 3..7\naggregation = average\nbinarize = true\njobs = 4");
    c.archive_dir = "arch";
    const auto snap = c.snapshot();
    CHECK_FALSE(snap.contains("jobs"));
    const auto back = config_from_snapshot(snap);
    CHECK(back.snapshot() == snap);
    CHECK(back.seed_set);
    CHECK(back.alpha == 0.55);
}

TEST_CASE("the shipped default config parses and validates") {
    const auto c = load_config(UOD_SOURCE_DIR "/configs/default.toml");
    CHECK_NOTHROW(c.validate());
    PipelineConfig d;
    d.seed = 0;
    d.seed_set = true;
    d.archive_dir = c.archive_dir;
    d.output_dir = c.output_dir;
    CHECK(c.snapshot() == d.snapshot());
    CHECK_THROWS_AS(load_config("/nonexistent/cfg.toml"), ConfigError);
}
