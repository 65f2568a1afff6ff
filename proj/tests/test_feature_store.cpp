#include "uod/error.hpp"
#include "uod/feature_store.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

using namespace uod;

namespace {

ImageRecord small_record(std::size_t n_props) {
    std::mt19937_64 rng(5);
    ImageRecord r = testing::random_record(rng, 2, 2, 4, n_props, "a");
    return r;
}

FormatErrorKind decode_error(const std::vector<std::uint8_t>& bytes) {
    try {
        decode_image_record(bytes);
    } catch (const FormatError& e) {
        return e.kind();
    }
    FAIL("decode succeeded");
    return FormatErrorKind::io;
}

std::string invariant_field(const ImageRecord& r) {
    try {
        validate(r);
    } catch (const InvariantError& e) {
        return e.field();
    }
    return "";
}

}  // namespace

TEST_CASE("2x2x4 map with one proposal has the layout size and round-trips") {
    const ImageRecord r = small_record(1);
    const auto bytes = encode_image_record(r);
    // header 4 + 4 + 4 + |id| + 5*4, tensor 2*2*4*4, count 4, proposal 16 + 4 + 4*4 + 256*4
    const std::size_t expected = 4 + 4 + 4 + 1 + 20 + 64 + 4 + (16 + 4 + 16 + 1024);
    CHECK(bytes.size() == expected);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "UODF");
    CHECK(decode_image_record(bytes) == r);
    CHECK(encode_image_record(decode_image_record(bytes)) == bytes);
}

TEST_CASE("empty proposal set is a valid archive") {
    const ImageRecord r = small_record(0);
    const auto back = decode_image_record(encode_image_record(r));
    CHECK(back.proposals.proposals.empty());
    CHECK(back == r);
}

TEST_CASE("file round trip of random records") {
    testing::TempDir dir("fs");
    std::mt19937_64 rng(17);
    for (int i = 0; i < 10; ++i) {
        const ImageRecord r = testing::random_record(rng, 3 + i % 3, 4, 8, static_cast<std::size_t>(i * 3), "img" + std::to_string(i));
        const auto path = dir.path() / ("r" + std::to_string(i) + ".uodf");
        write_image_record(r, path);
        CHECK(read_image_record(path) == r);
    }
}

TEST_CASE("invalid records name the offending field") {
    ImageRecord r = small_record(1);
    r.features.values[3] = std::numeric_limits<float>::quiet_NaN();
    CHECK(invariant_field(r) == "values");
    CHECK_THROWS_AS(encode_image_record(r), InvariantError);

    r = small_record(1);
    r.proposals.proposals[0].histogram[0] += 1;
    CHECK(invariant_field(r) == "proposals[0].histogram");

    r = small_record(1);
    r.proposals.proposals[0].box.x2 = r.proposals.image_width + 1.0;
    CHECK(invariant_field(r) == "proposals[0].box");

    r = small_record(1);
    std::fill(r.proposals.proposals[0].cls.begin(), r.proposals.proposals[0].cls.end(), 0.0f);
    CHECK(invariant_field(r) == "proposals[0].cls");

    r = small_record(1);
    r.features.h_patches = 1;
    CHECK(invariant_field(r) == "h_patches");
}

TEST_CASE("corrupt archives are rejected with the right kind") {
    const ImageRecord r = small_record(1);
    auto bytes = encode_image_record(r);

    auto bad = bytes;
    bad[0] = 'X';
    bad[1] = 'X';
    bad[2] = 'X';
    bad[3] = 'X';
    CHECK(decode_error(bad) == FormatErrorKind::bad_magic);

    bad = bytes;
    bad[4] = 2;
    CHECK(decode_error(bad) == FormatErrorKind::version_mismatch);

    bad.assign(bytes.begin(), bytes.begin() + 40);  // mid-tensor
    CHECK(decode_error(bad) == FormatErrorKind::truncated);

    bad.assign(bytes.begin(), bytes.end() - 3);
    CHECK(decode_error(bad) == FormatErrorKind::truncated);

    bad = bytes;
    bad.push_back(0);
    CHECK(decode_error(bad) == FormatErrorKind::trailing_bytes);

    CHECK_THROWS_AS(read_image_record("/nonexistent/archive.uodf"), FormatError);
}

TEST_CASE("decoding never repairs invalid content") {
    ImageRecord r = small_record(1);
    auto bytes = encode_image_record(r);
    // overwrite the first tensor value with a NaN
    const std::size_t tensor_at = 4 + 4 + 4 + 1 + 20;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bytes.data() + tensor_at, &nan, sizeof nan);
    CHECK_THROWS_AS(decode_image_record(bytes), InvariantError);
}

TEST_CASE("manifest round trip") {
    testing::TempDir dir("manifest");
    ArchiveManifest m;
    m.images.push_back({"a", "a.uodf", 640, 480});
    m.images.push_back({"b/c", "b_c.uodf", 32, 32});
    write_manifest(m, dir.path() / "manifest.json");
    const auto back = read_manifest(dir.path() / "manifest.json");
    CHECK(back.images == m.images);

    std::ofstream(dir.path() / "bad.json") << R"({"images": [{"id": "a"}]})";
    CHECK_THROWS_AS(read_manifest(dir.path() / "bad.json"), InvariantError);
}

TEST_CASE("crop pixel count covers partial pixels") {
    CHECK(crop_pixel_count({0, 0, 2, 2}) == 4);
    CHECK(crop_pixel_count({0.5, 0.5, 2.5, 1.0}) == 3);
}
