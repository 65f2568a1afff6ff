#include "uod/feature_store.hpp"

#include "byte_io.hpp"
#include "uod/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

namespace uod {

namespace detail {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatErrorKind::io, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatErrorKind::io, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(FormatErrorKind::io, "write failed for " + path);
}

}  // namespace detail

namespace {

constexpr char kMagic[4] = {'U', 'O', 'D', 'F'};

bool all_finite(std::span<const float> v) {
    for (float x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace

std::uint64_t crop_pixel_count(const Box& box) noexcept {
    const auto x1 = static_cast<std::int64_t>(std::floor(box.x1));
    const auto y1 = static_cast<std::int64_t>(std::floor(box.y1));
    const auto x2 = static_cast<std::int64_t>(std::ceil(box.x2));
    const auto y2 = static_cast<std::int64_t>(std::ceil(box.y2));
    if (x2 <= x1 || y2 <= y1) return 0;
    return static_cast<std::uint64_t>(x2 - x1) * static_cast<std::uint64_t>(y2 - y1);
}

void validate(const PatchFeatureMap& fmap) {
    if (fmap.h_patches < 2) throw InvariantError("h_patches", "must be >= 2");
    if (fmap.w_patches < 2) throw InvariantError("w_patches", "must be >= 2");
    if (fmap.dim < 1) throw InvariantError("dim", "must be >= 1");
    if (fmap.values.size() != fmap.n_patches() * fmap.dim) {
        throw InvariantError("values", "size does not equal h_patches * w_patches * dim");
    }
    if (!all_finite(fmap.values)) throw InvariantError("values", "contains NaN or Inf");
}

void validate(const ProposalSet& props, std::uint32_t dim) {
    for (std::size_t i = 0; i < props.proposals.size(); ++i) {
        const Proposal& p = props.proposals[i];
        const std::string at = "proposals[" + std::to_string(i) + "].";
        const Box& b = p.box;
        if (!(std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) && std::isfinite(b.y2))) {
            throw InvariantError(at + "box", "non-finite coordinate");
        }
        if (!(0.0 <= b.x1 && b.x1 < b.x2 && b.x2 <= props.image_width)) {
            throw InvariantError(at + "box", "x coordinates outside 0 <= x1 < x2 <= image_width");
        }
        if (!(0.0 <= b.y1 && b.y1 < b.y2 && b.y2 <= props.image_height)) {
            throw InvariantError(at + "box", "y coordinates outside 0 <= y1 < y2 <= image_height");
        }
        if (p.cls.size() != dim) throw InvariantError(at + "cls", "length does not equal dim");
        if (!all_finite(p.cls)) throw InvariantError(at + "cls", "contains NaN or Inf");
        double norm2 = 0.0;
        for (float v : p.cls) norm2 += static_cast<double>(v) * v;
        if (norm2 == 0.0) throw InvariantError(at + "cls", "zero norm");
        std::uint64_t total = 0;
        for (auto c : p.histogram) total += c;
        if (total == 0) throw InvariantError(at + "histogram", "empty histogram");
        if (total != crop_pixel_count(b)) {
            throw InvariantError(at + "histogram", "sum " + std::to_string(total) + " does not equal crop pixel count " +
                                                      std::to_string(crop_pixel_count(b)));
        }
    }
}

void validate(const ImageRecord& record) {
    validate(record.features);
    if (record.features.image_id != record.proposals.image_id) {
        throw InvariantError("image_id", "feature map and proposal set disagree");
    }
    if (record.proposals.image_width == 0) throw InvariantError("image_width", "must be positive");
    if (record.proposals.image_height == 0) throw InvariantError("image_height", "must be positive");
    validate(record.proposals, record.features.dim);
}

std::vector<std::uint8_t> encode_image_record(const ImageRecord& record) {
    validate(record);
    const PatchFeatureMap& f = record.features;
    const ProposalSet& p = record.proposals;
    if (f.image_id.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvariantError("image_id", "too long");
    }

    detail::ByteWriter w;
    w.put_bytes(std::string(kMagic, 4));
    w.put<std::uint32_t>(kUodfVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(f.image_id.size()));
    w.put_bytes(f.image_id);
    w.put<std::uint32_t>(p.image_width);
    w.put<std::uint32_t>(p.image_height);
    w.put<std::uint32_t>(f.h_patches);
    w.put<std::uint32_t>(f.w_patches);
    w.put<std::uint32_t>(f.dim);
    w.put_all<float>(f.values);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.proposals.size()));
    for (const Proposal& q : p.proposals) {
        w.put<float>(static_cast<float>(q.box.x1));
        w.put<float>(static_cast<float>(q.box.y1));
        w.put<float>(static_cast<float>(q.box.x2));
        w.put<float>(static_cast<float>(q.box.y2));
        w.put<std::uint32_t>(q.original_rank);
        w.put_all<float>(q.cls);
        w.put_all<std::uint32_t>(q.histogram);
    }
    return w.take();
}

ImageRecord decode_image_record(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    if (r.remaining() < 4) throw FormatError(FormatErrorKind::truncated, "truncated file while reading magic");
    if (r.get_bytes(4, "magic") != std::string(kMagic, 4)) {
        throw FormatError(FormatErrorKind::bad_magic, "not a UODF archive (bad magic)");
    }
    const auto version = r.get<std::uint32_t>("version");
    if (version != kUodfVersion) {
        throw FormatError(FormatErrorKind::version_mismatch,
                          "unsupported UODF version " + std::to_string(version));
    }

    ImageRecord rec;
    const auto id_len = r.get<std::uint32_t>("image_id length");
    rec.features.image_id = r.get_bytes(id_len, "image_id");
    rec.proposals.image_id = rec.features.image_id;
    rec.proposals.image_width = r.get<std::uint32_t>("image_width");
    rec.proposals.image_height = r.get<std::uint32_t>("image_height");
    rec.features.h_patches = r.get<std::uint32_t>("h_patches");
    rec.features.w_patches = r.get<std::uint32_t>("w_patches");
    rec.features.dim = r.get<std::uint32_t>("dim");

    const std::uint64_t n_values =
        std::uint64_t{rec.features.h_patches} * rec.features.w_patches * rec.features.dim;
    if (n_values * sizeof(float) > r.remaining()) {
        throw FormatError(FormatErrorKind::truncated, "truncated file while reading feature tensor");
    }
    rec.features.values.resize(n_values);
    r.get_all<float>(rec.features.values, "feature tensor");

    const auto count = r.get<std::uint32_t>("proposal count");
    const std::uint64_t per_prop = 4 * 4 + 4 + std::uint64_t{rec.features.dim} * 4 + kHistogramBins * 4;
    if (std::uint64_t{count} * per_prop > r.remaining()) {
        throw FormatError(FormatErrorKind::truncated, "truncated file while reading proposals");
    }
    rec.proposals.proposals.resize(count);
    for (Proposal& q : rec.proposals.proposals) {
        q.box.x1 = r.get<float>("box");
        q.box.y1 = r.get<float>("box");
        q.box.x2 = r.get<float>("box");
        q.box.y2 = r.get<float>("box");
        q.original_rank = r.get<std::uint32_t>("rank");
        q.cls.resize(rec.features.dim);
        r.get_all<float>(q.cls, "cls feature");
        r.get_all<std::uint32_t>(q.histogram, "histogram");
    }
    if (r.remaining() != 0) {
        throw FormatError(FormatErrorKind::trailing_bytes, "unexpected bytes after last proposal");
    }
    validate(rec);
    return rec;
}

void write_image_record(const ImageRecord& record, const std::filesystem::path& path) {
    const auto bytes = encode_image_record(record);
    detail::write_file_bytes(path.string(), bytes);
}

ImageRecord read_image_record(const std::filesystem::path& path) {
    const auto bytes = detail::read_file_bytes(path.string());
    return decode_image_record(bytes);
}

void write_manifest(const ArchiveManifest& manifest, const std::filesystem::path& path) {
    nlohmann::json images = nlohmann::json::array();
    for (const auto& e : manifest.images) {
        images.push_back({{"id", e.id}, {"file", e.file}, {"width", e.width}, {"height", e.height}});
    }
    std::ofstream out(path);
    if (!out) throw FormatError(FormatErrorKind::io, "cannot write " + path.string());
    out << nlohmann::json{{"images", images}}.dump(2) << '\n';
}

ArchiveManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(FormatErrorKind::io, "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvariantError("manifest", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("images") || !j["images"].is_array()) {
        throw InvariantError("images", "manifest must be an object with an 'images' array");
    }
    ArchiveManifest m;
    for (std::size_t i = 0; i < j["images"].size(); ++i) {
        const auto& e = j["images"][i];
        const std::string at = "images[" + std::to_string(i) + "]";
        try {
            m.images.push_back({e.at("id").get<std::string>(), e.at("file").get<std::string>(),
                                e.at("width").get<std::uint32_t>(), e.at("height").get<std::uint32_t>()});
        } catch (const nlohmann::json::exception& ex) {
            throw InvariantError(at, ex.what());
        }
    }
    return m;
}

}  // namespace uod
