#pragma once
// Small randomized evaluation datasets paired with their oracle views.

#include "uod/eval_metrics.hpp"

#include "oracles.hpp"

#include <random>
#include <string>
#include <vector>

namespace testing {

inline uod::Box jitter_box(std::mt19937_64& rng, const uod::Box& b, double amount = 4.0) {
    std::uniform_real_distribution<double> u(-amount, amount);
    uod::Box o{b.x1 + u(rng), b.y1 + u(rng), b.x2 + u(rng), b.y2 + u(rng)};
    if (o.x2 <= o.x1 + 1) o.x2 = o.x1 + 2;
    if (o.y2 <= o.y1 + 1) o.y2 = o.y1 + 2;
    return o;
}

inline uod::Box loose_box(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0, 80);
    std::uniform_real_distribution<double> s(4, 30);
    const double x = u(rng), y = u(rng);
    return {x, y, x + s(rng), y + s(rng)};
}

struct BoxMicro {
    std::vector<uod::GroundTruth> gts;
    std::vector<uod::Detection> dets;
    std::vector<oracle::Img> imgs;
    std::vector<oracle::Det> odets;
};

// 1-5 images with 0-5 boxes each (at least one box overall) and 0-6
// detections per image, two thirds of them near a ground-truth box.
inline BoxMicro box_micro(std::mt19937_64& rng) {
    BoxMicro m;
    const std::size_t n_img = 1 + rng() % 5;
    std::uniform_real_distribution<double> score(0, 1);
    for (std::size_t i = 0; i < n_img; ++i) {
        const std::string id = "im" + std::to_string(i);
        std::vector<uod::Box> boxes;
        const std::size_t n_gt = (i == 0 ? 1 : 0) + rng() % 6;
        for (std::size_t g = 0; g < n_gt; ++g) boxes.push_back(loose_box(rng));
        uod::GroundTruth gt;
        gt.image_id = id;
        gt.width = gt.height = 128;
        gt.boxes = boxes;
        m.gts.push_back(gt);
        m.imgs.push_back({id, boxes});
        const std::size_t n_det = rng() % 7;
        for (std::size_t d = 0; d < n_det; ++d) {
            const uod::Box b = (!boxes.empty() && rng() % 3 != 0) ? jitter_box(rng, boxes[rng() % boxes.size()]) : loose_box(rng);
            const double s = score(rng);
            m.dets.push_back({id, b, s, 0, std::nullopt});
            m.odets.push_back({id, b, s});
        }
    }
    return m;
}

struct MaskMicro {
    std::vector<uod::GroundTruth> gts;
    std::vector<uod::ImageMasks> preds;
    std::vector<oracle::MaskImage> images;
};

// 1-4 small images with disjoint ground-truth objects and 0-3 random predictions.
inline MaskMicro mask_micro(std::mt19937_64& rng) {
    MaskMicro out;
    const std::size_t n_img = 1 + rng() % 4;
    for (std::size_t i = 0; i < n_img; ++i) {
        const std::size_t h = 3 + rng() % 5, w = 3 + rng() % 5;
        uod::GroundTruth g;
        g.image_id = "i" + std::to_string(i);
        g.width = w;
        g.height = h;
        oracle::MaskImage im{{}, {}, h, w};
        uod::GridMask used(h, w);
        const std::size_t n_obj = 1 + rng() % 3;
        for (std::size_t k = 0; k < n_obj; ++k) {
            uod::GridMask m(h, w);
            for (std::size_t c = 0; c < h * w; ++c)
                if (!used.cells[c] && rng() % 3 == 0) m.cells[c] = used.cells[c] = 1;
            if (m.empty()) continue;
            g.boxes.push_back({0, 0, 1, 1});
            g.masks.push_back(m);
            im.gt.push_back(oracle::to_rows(m));
        }
        if (g.boxes.empty()) {
            uod::GridMask m(h, w);
            m.set(0, 0);
            g.boxes.push_back({0, 0, 1, 1});
            g.masks.push_back(m);
            im.gt.push_back(oracle::to_rows(m));
        }
        uod::ImageMasks p{g.image_id, {}};
        const std::size_t n_pred = rng() % 4;
        for (std::size_t k = 0; k < n_pred; ++k) {
            uod::GridMask m(h, w);
            for (auto& c : m.cells) c = rng() % 2;
            p.masks.push_back(m);
            im.pred.push_back(oracle::to_rows(m));
        }
        out.gts.push_back(g);
        out.preds.push_back(p);
        out.images.push_back(im);
    }
    return out;
}

}  // namespace testing
