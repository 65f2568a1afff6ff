#include "uod/synthetic.hpp"

#include "uod/coco_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace uod {

namespace {

struct Rect {
    std::size_t r0, c0, r1, c1;  // patch units, half-open

    bool overlaps(const Rect& o, std::size_t margin) const {
        return r0 < o.r1 + margin && o.r0 < r1 + margin && c0 < o.c1 + margin && o.c0 < c1 + margin;
    }
};

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}
    double normal() { return normal_(rng_); }
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
    std::size_t pick(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_); }
    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

std::vector<float> noisy_direction(std::span<const double> base, double noise, Gen& g) {
    std::vector<double> v(base.begin(), base.end());
    double n2 = 0.0;
    for (auto& x : v) {
        x += noise * g.normal();
        n2 += x * x;
    }
    const double n = std::sqrt(n2);
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / n);
    return out;
}

// Spreads `total` pixels over `bins` bins starting at `first`, deterministically from g.
GrayHistogram spread_histogram(std::uint64_t total, std::size_t first, std::size_t bins, Gen& g) {
    GrayHistogram h{};
    std::vector<double> w(bins);
    double sum = 0.0;
    for (auto& x : w) {
        x = 0.5 + g.uniform();
        sum += x;
    }
    std::uint64_t used = 0;
    for (std::size_t b = 0; b < bins; ++b) {
        const auto c = static_cast<std::uint64_t>(std::floor(static_cast<double>(total) * w[b] / sum));
        h[(first + b) % kHistogramBins] = static_cast<std::uint32_t>(c);
        used += c;
    }
    h[first % kHistogramBins] += static_cast<std::uint32_t>(total - used);
    return h;
}

}  // namespace

SyntheticDataset make_synthetic_dataset(const SyntheticOptions& o) {
    if (o.dim < o.n_classes + 2) throw std::invalid_argument("dim must exceed n_classes + 1");
    if (o.n_classes < 1 || o.max_objects < 1) throw std::invalid_argument("need at least one class and object");
    if (o.h_patches < 4 || o.w_patches < 4) throw std::invalid_argument("grid too small");

    Gen g(o.seed);
    // direction 0: background; 1..n_classes: classes; the last: background texture
    auto basis = [&](std::size_t k) {
        std::vector<double> v(o.dim, 0.0);
        v[k] = 1.0;
        return v;
    };
    const std::size_t texture = o.dim - 1;

    SyntheticDataset data;
    const auto W = static_cast<std::uint32_t>(o.w_patches * o.patch_size);
    const auto H = static_cast<std::uint32_t>(o.h_patches * o.patch_size);
    const double ps = static_cast<double>(o.patch_size);

    for (std::size_t img = 0; img < o.n_images; ++img) {
        ImageRecord rec;
        char id[32];
        std::snprintf(id, sizeof id, "img_%04zu", img);
        rec.features.image_id = id;
        rec.features.h_patches = static_cast<std::uint32_t>(o.h_patches);
        rec.features.w_patches = static_cast<std::uint32_t>(o.w_patches);
        rec.features.dim = static_cast<std::uint32_t>(o.dim);
        rec.proposals.image_id = id;
        rec.proposals.image_width = W;
        rec.proposals.image_height = H;

        // place objects: 2..4 patches per side, object_gap patches apart
        std::vector<Rect> objects;
        std::vector<int> cls;
        const std::size_t want = g.pick(1, o.max_objects);
        for (std::size_t attempt = 0; attempt < 200 && objects.size() < want; ++attempt) {
            const std::size_t h = g.pick(2, std::min<std::size_t>(4, o.h_patches - 2));
            const std::size_t w = g.pick(2, std::min<std::size_t>(4, o.w_patches - 2));
            const std::size_t r0 = g.pick(0, o.h_patches - h);
            const std::size_t c0 = g.pick(0, o.w_patches - w);
            Rect r{r0, c0, r0 + h, c0 + w};
            if (std::any_of(objects.begin(), objects.end(), [&](const Rect& q) { return r.overlaps(q, o.object_gap); })) continue;
            objects.push_back(r);
            cls.push_back(static_cast<int>(g.pick(0, o.n_classes - 1)));
        }

        std::vector<int> owner(o.h_patches * o.w_patches, -1);
        for (std::size_t k = 0; k < objects.size(); ++k) {
            for (std::size_t r = objects[k].r0; r < objects[k].r1; ++r) {
                for (std::size_t c = objects[k].c0; c < objects[k].c1; ++c) owner[r * o.w_patches + c] = static_cast<int>(k);
            }
        }

        auto class_dir = [&](int c) {
            auto v = basis(1 + static_cast<std::size_t>(c));
            v[0] = 0.1;
            return v;
        };
        auto bg_dir = [&](double t) {
            auto v = basis(0);
            v[texture] = 0.15 * t;
            return v;
        };

        rec.features.values.reserve(owner.size() * o.dim);
        for (std::size_t i = 0; i < owner.size(); ++i) {
            const auto dir = owner[i] >= 0 ? class_dir(cls[static_cast<std::size_t>(owner[i])])
                                           : bg_dir(std::sin(static_cast<double>(i)));
            const auto tok = noisy_direction(dir, o.token_noise, g);
            rec.features.values.insert(rec.features.values.end(), tok.begin(), tok.end());
        }

        auto add_proposal = [&](const Rect& r, std::vector<double> dir, bool textured) {
            Proposal p;
            p.box = {static_cast<double>(r.c0) * ps, static_cast<double>(r.r0) * ps, static_cast<double>(r.c1) * ps,
                     static_cast<double>(r.r1) * ps};
            p.cls = noisy_direction(dir, 0.02, g);
            const auto total = crop_pixel_count(p.box);
            p.histogram = textured ? spread_histogram(total, g.pick(0, 64), 96, g)
                                   : spread_histogram(total, g.pick(100, 200), 3, g);
            rec.proposals.proposals.push_back(std::move(p));
        };

        GroundTruth gt;
        gt.image_id = id;
        gt.width = W;
        gt.height = H;
        for (std::size_t k = 0; k < objects.size(); ++k) {
            const Rect& r = objects[k];
            add_proposal(r, class_dir(cls[k]), true);
            // jittered copies: grown by one patch on one side, shrunk on another
            const Rect grow{r.r0 > 0 ? r.r0 - 1 : r.r0, r.c0, r.r1, r.c1 < o.w_patches ? r.c1 + 1 : r.c1};
            const Rect shrink_r{r.r0, r.c0, r.r1, r.c1 - 1};
            const Rect shrink_c{r.r0, r.c0, r.r1 - 1, r.c1};
            for (const Rect& j : {grow, shrink_r, shrink_c}) {
                auto dir = class_dir(cls[k]);
                dir[0] += 0.1;
                add_proposal(j, dir, true);
            }
            gt.boxes.push_back({static_cast<double>(r.c0) * ps, static_cast<double>(r.r0) * ps,
                                static_cast<double>(r.c1) * ps, static_cast<double>(r.r1) * ps});
            GridMask m(H, W);
            for (std::size_t y = r.r0 * o.patch_size; y < r.r1 * o.patch_size; ++y) {
                for (std::size_t x = r.c0 * o.patch_size; x < r.c1 * o.patch_size; ++x) m.set(y, x);
            }
            gt.masks.push_back(std::move(m));
        }

        // background boxes: small, away from objects and from each other
        std::vector<Rect> bg;
        for (std::size_t attempt = 0; attempt < 500 && bg.size() < o.background_boxes; ++attempt) {
            const std::size_t h = g.pick(1, 2);
            const std::size_t w = g.pick(1, 2);
            const std::size_t r0 = g.pick(0, o.h_patches - h);
            const std::size_t c0 = g.pick(0, o.w_patches - w);
            Rect r{r0, c0, r0 + h, c0 + w};
            if (std::any_of(objects.begin(), objects.end(), [&](const Rect& q) { return r.overlaps(q, 0); })) continue;
            if (std::any_of(bg.begin(), bg.end(), [&](const Rect& q) { return r.overlaps(q, 0); })) continue;
            bg.push_back(r);
            add_proposal(r, bg_dir(g.uniform() - 0.5), false);
        }

        std::vector<std::uint32_t> ranks(rec.proposals.proposals.size());
        for (std::size_t i = 0; i < ranks.size(); ++i) ranks[i] = static_cast<std::uint32_t>(i);
        std::shuffle(ranks.begin(), ranks.end(), g.engine());
        for (std::size_t i = 0; i < ranks.size(); ++i) rec.proposals.proposals[i].original_rank = ranks[i];

        validate(rec);
        data.records.push_back(std::move(rec));
        data.ground_truth.push_back(std::move(gt));
        data.classes.push_back(std::move(cls));
    }
    return data;
}

void write_synthetic_dataset(const SyntheticDataset& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    ArchiveManifest manifest;
    for (const auto& rec : data.records) {
        const std::string file = rec.features.image_id + ".uodf";
        write_image_record(rec, dir / file);
        manifest.images.push_back({rec.features.image_id, file, rec.proposals.image_width, rec.proposals.image_height});
    }
    write_manifest(manifest, dir / "manifest.json");
    write_json_file(ground_truth_to_json(data.ground_truth), dir / "ground_truth.json");
}

}  // namespace uod
