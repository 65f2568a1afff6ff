#pragma once
// UODF v1 archive: one little-endian binary file per image carrying the patch
// key tokens, the region proposals with their CLS features and grayscale crop
// histograms. A manifest.json next to the archives lists the images.
//
// Layout:
//   "UODF" | u32 version=1 | u32 id_len | id bytes (UTF-8)
//   u32 image_width | u32 image_height | u32 h_patches | u32 w_patches | u32 dim
//   f32[h_patches * w_patches * dim]            patch keys, (row, col, channel)
//   u32 proposal_count
//   per proposal: f32[4] box | u32 rank | f32[dim] cls | u32[256] histogram

#include "uod/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace uod {

inline constexpr std::uint32_t kUodfVersion = 1;
inline constexpr std::size_t kHistogramBins = 256;

using GrayHistogram = std::array<std::uint32_t, kHistogramBins>;

struct PatchFeatureMap {
    std::string image_id;
    std::uint32_t h_patches = 0;
    std::uint32_t w_patches = 0;
    std::uint32_t dim = 0;
    std::vector<float> values;  // (row, col, channel)

    std::size_t n_patches() const noexcept { return std::size_t{h_patches} * w_patches; }
    std::span<const float> token(std::size_t patch) const noexcept {
        return {values.data() + patch * dim, dim};
    }
    friend bool operator==(const PatchFeatureMap&, const PatchFeatureMap&) = default;
};

struct Proposal {
    Box box;
    std::uint32_t original_rank = 0;
    std::vector<float> cls;
    GrayHistogram histogram{};
    friend bool operator==(const Proposal&, const Proposal&) = default;
};

struct ProposalSet {
    std::string image_id;
    std::uint32_t image_width = 0;
    std::uint32_t image_height = 0;
    std::vector<Proposal> proposals;
    friend bool operator==(const ProposalSet&, const ProposalSet&) = default;
};

struct ImageRecord {
    PatchFeatureMap features;
    ProposalSet proposals;
    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

// Number of pixels in the integer crop covered by a box:
// [floor(x1), ceil(x2)) x [floor(y1), ceil(y2)).
std::uint64_t crop_pixel_count(const Box& box) noexcept;

// Throws InvariantError naming the offending field.
void validate(const PatchFeatureMap& fmap);
void validate(const ProposalSet& props, std::uint32_t dim);
void validate(const ImageRecord& record);

std::vector<std::uint8_t> encode_image_record(const ImageRecord& record);
// Throws FormatError (bad magic, version, truncation) or InvariantError.
ImageRecord decode_image_record(std::span<const std::uint8_t> bytes);

void write_image_record(const ImageRecord& record, const std::filesystem::path& path);
ImageRecord read_image_record(const std::filesystem::path& path);

struct ManifestEntry {
    std::string id;
    std::string file;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct ArchiveManifest {
    std::vector<ManifestEntry> images;
};

void write_manifest(const ArchiveManifest& manifest, const std::filesystem::path& path);
ArchiveManifest read_manifest(const std::filesystem::path& path);

}  // namespace uod
