#include "uod/coco_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace uod {

Rle rle_encode(const GridMask& mask) {
    Rle r{mask.height, mask.width, {}};
    std::uint8_t current = 0;
    std::uint32_t run = 0;
    for (std::size_t c = 0; c < mask.width; ++c) {
        for (std::size_t y = 0; y < mask.height; ++y) {
            const std::uint8_t v = mask.at(y, c) ? 1 : 0;
            if (v != current) {
                r.counts.push_back(run);
                run = 0;
                current = v;
            }
            ++run;
        }
    }
    r.counts.push_back(run);
    return r;
}

GridMask rle_decode(const Rle& rle) {
    GridMask m(rle.height, rle.width);
    std::size_t pos = 0;
    bool fg = false;
    const std::size_t total = rle.height * rle.width;
    for (auto run : rle.counts) {
        if (pos + run > total) throw SchemaError("counts", "RLE runs exceed mask size");
        if (fg) {
            for (std::size_t i = pos; i < pos + run; ++i) m.set(i % rle.height, i / rle.height);
        }
        pos += run;
        fg = !fg;
    }
    if (pos != total) throw SchemaError("counts", "RLE runs do not cover the mask");
    return m;
}

nlohmann::json rle_to_json(const Rle& rle) {
    return {{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw SchemaError(path, what); }

const nlohmann::json& member(const nlohmann::json& j, const char* key, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) fail(path + "." + key, "missing field");
    return *it;
}

double number(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "non-finite number");
    return v;
}

std::size_t count_field(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
        fail(path, "expected a non-negative integer");
    }
    return j.get<std::size_t>();
}

std::string image_id(const nlohmann::json& j, const std::string& path) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<std::int64_t>());
    fail(path, "image id must be a string or an integer");
}

const nlohmann::json& array_field(const nlohmann::json& j, const char* key, const std::string& path) {
    const auto& a = member(j, key, path);
    if (!a.is_array()) fail(path + "." + key, "expected an array");
    return a;
}

}  // namespace

Rle rle_from_json(const nlohmann::json& j, const std::string& path) {
    const auto& size = member(j, "size", path);
    if (!size.is_array() || size.size() != 2) fail(path + ".size", "expected [height, width]");
    Rle r;
    r.height = count_field(size[0], path + ".size[0]");
    r.width = count_field(size[1], path + ".size[1]");
    const auto& counts = member(j, "counts", path);
    if (!counts.is_array()) fail(path + ".counts", "expected an uncompressed RLE count array");
    for (std::size_t i = 0; i < counts.size(); ++i) {
        r.counts.push_back(static_cast<std::uint32_t>(count_field(counts[i], path + ".counts[" + std::to_string(i) + "]")));
    }
    return r;
}

nlohmann::json box_to_json(const Box& b) { return {b.x1, b.y1, b.width(), b.height()}; }

Box box_from_json(const nlohmann::json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 4) fail(path, "expected [x, y, width, height]");
    const double x = number(j[0], path + "[0]");
    const double y = number(j[1], path + "[1]");
    const double w = number(j[2], path + "[2]");
    const double h = number(j[3], path + "[3]");
    if (w < 0.0 || h < 0.0) fail(path, "negative box size");
    return {x, y, x + w, y + h};
}

nlohmann::json instance_set_to_json(const InstanceSet& set) {
    nlohmann::json inst = nlohmann::json::array();
    for (const auto& i : set.instances) {
        inst.push_back({{"class_id", i.class_id},
                        {"confidence", i.confidence},
                        {"p_fg", i.p_fg},
                        {"bbox", box_to_json(i.bbox)},
                        {"segmentation", rle_to_json(rle_encode(i.mask))}});
    }
    return {{"image_id", set.image_id},
            {"width", set.width},
            {"height", set.height},
            {"region_feature_mode", to_string(set.feature_mode)},
            {"instances", inst}};
}

InstanceSet instance_set_from_json(const nlohmann::json& j) {
    InstanceSet s;
    s.image_id = image_id(member(j, "image_id", "$"), "$.image_id");
    s.width = count_field(member(j, "width", "$"), "$.width");
    s.height = count_field(member(j, "height", "$"), "$.height");
    try {
        s.feature_mode = region_feature_mode_from_string(member(j, "region_feature_mode", "$").get<std::string>());
    } catch (const std::exception& e) {
        fail("$.region_feature_mode", e.what());
    }
    const auto& arr = array_field(j, "instances", "$");
    for (std::size_t k = 0; k < arr.size(); ++k) {
        const std::string p = "$.instances[" + std::to_string(k) + "]";
        Instance i;
        i.class_id = static_cast<int>(number(member(arr[k], "class_id", p), p + ".class_id"));
        i.confidence = number(member(arr[k], "confidence", p), p + ".confidence");
        i.p_fg = number(member(arr[k], "p_fg", p), p + ".p_fg");
        i.bbox = box_from_json(member(arr[k], "bbox", p), p + ".bbox");
        i.mask = rle_decode(rle_from_json(member(arr[k], "segmentation", p), p + ".segmentation"));
        s.instances.push_back(std::move(i));
    }
    return s;
}

nlohmann::json pseudo_labels_json(std::span<const InstanceSet> sets) {
    nlohmann::json images = nlohmann::json::array();
    nlohmann::json annotations = nlohmann::json::array();
    std::set<int> classes;
    std::set<std::string> modes;
    std::size_t next_id = 1;
    for (const auto& s : sets) {
        images.push_back({{"id", s.image_id}, {"width", s.width}, {"height", s.height}});
        modes.insert(to_string(s.feature_mode));
        for (const auto& i : s.instances) {
            classes.insert(i.class_id);
            annotations.push_back({{"id", next_id++},
                                   {"image_id", s.image_id},
                                   {"category_id", i.class_id},
                                   {"bbox", box_to_json(i.bbox)},
                                   {"area", i.mask.count()},
                                   {"score", i.confidence},
                                   {"iscrowd", 0},
                                   {"segmentation", rle_to_json(rle_encode(i.mask))}});
        }
    }
    nlohmann::json categories = nlohmann::json::array();
    for (int c : classes) categories.push_back({{"id", c}, {"name", "discovered_" + std::to_string(c)}});
    return {{"info", {{"description", "unsupervised pseudo-labels"}, {"region_feature_mode", modes}}},
            {"images", images},
            {"annotations", annotations},
            {"categories", categories}};
}

std::vector<Detection> detections_from_json(const nlohmann::json& j) {
    const nlohmann::json* arr = &j;
    std::string base = "$";
    if (j.is_object()) {
        arr = &array_field(j, "annotations", "$");
        base = "$.annotations";
    } else if (!j.is_array()) {
        fail("$", "expected a results array or an object with annotations");
    }
    std::vector<Detection> out;
    for (std::size_t k = 0; k < arr->size(); ++k) {
        const auto& a = (*arr)[k];
        const std::string p = base + "[" + std::to_string(k) + "]";
        Detection d;
        d.image_id = image_id(member(a, "image_id", p), p + ".image_id");
        d.bbox = box_from_json(member(a, "bbox", p), p + ".bbox");
        d.score = a.contains("score") ? number(a["score"], p + ".score") : 1.0;
        if (a.contains("category_id")) d.category_id = static_cast<int>(number(a["category_id"], p + ".category_id"));
        if (a.contains("segmentation")) d.mask = rle_decode(rle_from_json(a["segmentation"], p + ".segmentation"));
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<GroundTruth> ground_truth_from_json(const nlohmann::json& j) {
    const auto& images = array_field(j, "images", "$");
    std::vector<GroundTruth> gts;
    for (std::size_t k = 0; k < images.size(); ++k) {
        const std::string p = "$.images[" + std::to_string(k) + "]";
        GroundTruth g;
        g.image_id = image_id(member(images[k], "id", p), p + ".id");
        g.width = count_field(member(images[k], "width", p), p + ".width");
        g.height = count_field(member(images[k], "height", p), p + ".height");
        for (const auto& other : gts) {
            if (other.image_id == g.image_id) fail(p + ".id", "duplicate image id");
        }
        gts.push_back(std::move(g));
    }
    const auto& anns = array_field(j, "annotations", "$");
    std::vector<std::size_t> with_mask(gts.size(), 0);
    for (std::size_t k = 0; k < anns.size(); ++k) {
        const std::string p = "$.annotations[" + std::to_string(k) + "]";
        const std::string id = image_id(member(anns[k], "image_id", p), p + ".image_id");
        auto it = std::find_if(gts.begin(), gts.end(), [&](const GroundTruth& g) { return g.image_id == id; });
        if (it == gts.end()) fail(p + ".image_id", "refers to an unknown image");
        GroundTruth& g = *it;
        Box b = box_from_json(member(anns[k], "bbox", p), p + ".bbox");
        if (b.x1 < 0 || b.y1 < 0 || b.x2 > static_cast<double>(g.width) || b.y2 > static_cast<double>(g.height)) {
            fail(p + ".bbox", "box outside the image");
        }
        g.boxes.push_back(b);
        if (anns[k].contains("segmentation")) {
            GridMask m = rle_decode(rle_from_json(anns[k]["segmentation"], p + ".segmentation"));
            if (m.height != g.height || m.width != g.width) fail(p + ".segmentation", "mask size differs from image size");
            g.masks.push_back(std::move(m));
            ++with_mask[static_cast<std::size_t>(it - gts.begin())];
        }
    }
    for (std::size_t i = 0; i < gts.size(); ++i) {
        if (with_mask[i] != 0 && with_mask[i] != gts[i].boxes.size()) {
            fail("$.annotations", "image " + gts[i].image_id + " mixes annotations with and without masks");
        }
    }
    return gts;
}

nlohmann::json ground_truth_to_json(std::span<const GroundTruth> gts) {
    nlohmann::json images = nlohmann::json::array();
    nlohmann::json anns = nlohmann::json::array();
    std::size_t next = 1;
    for (const auto& g : gts) {
        images.push_back({{"id", g.image_id}, {"width", g.width}, {"height", g.height}});
        for (std::size_t i = 0; i < g.boxes.size(); ++i) {
            nlohmann::json a = {{"id", next++}, {"image_id", g.image_id}, {"category_id", 1}, {"bbox", box_to_json(g.boxes[i])}};
            if (i < g.masks.size()) a["segmentation"] = rle_to_json(rle_encode(g.masks[i]));
            anns.push_back(std::move(a));
        }
    }
    return {{"images", images}, {"annotations", anns}, {"categories", {{{"id", 1}, {"name", "object"}}}}};
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(FormatErrorKind::io, "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("$", path.string() + ": " + e.what());
    }
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError(FormatErrorKind::io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw FormatError(FormatErrorKind::io, "write failed for " + path.string());
}

}  // namespace uod
