#pragma once
// Synthetic inputs with known structure.

#include "uod/spectral_graph.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace testing {

struct PlantedSpace {
    uod::PixelFeatureSpace space;
    std::vector<int> owner;  // per cell: -1 background, else blob index
    std::size_t n_blobs = 0;
};

// Background cells sit near the origin with tiny noise. Blob b is a
// rectangle whose cells sit at distance offsets[b] along axis b with larger
// noise, so each extra cluster first isolates the next blob and then only
// splits inside a blob.
inline PlantedSpace planted_space(std::mt19937_64& rng, std::size_t n_blobs, std::size_t h = 24, std::size_t w = 24) {
    static const double offsets[] = {1.0, 0.7, 0.5, 0.35, 0.25, 0.18};
    PlantedSpace p;
    p.n_blobs = n_blobs;
    p.space.height = h;
    p.space.width = w;
    p.space.n_dims = std::max<std::size_t>(n_blobs, 2);
    p.owner.assign(h * w, -1);
    std::uniform_int_distribution<std::size_t> side(3, 5);
    std::size_t placed = 0;
    for (int attempt = 0; attempt < 1000 && placed < n_blobs; ++attempt) {
        const std::size_t bh = side(rng), bw = side(rng);
        const std::size_t r0 = std::uniform_int_distribution<std::size_t>(0, h - bh)(rng);
        const std::size_t c0 = std::uniform_int_distribution<std::size_t>(0, w - bw)(rng);
        bool free = true;
        for (std::size_t r = r0; r < r0 + bh && free; ++r)
            for (std::size_t c = c0; c < c0 + bw && free; ++c) free = p.owner[r * w + c] == -1;
        if (!free) continue;
        for (std::size_t r = r0; r < r0 + bh; ++r)
            for (std::size_t c = c0; c < c0 + bw; ++c) p.owner[r * w + c] = static_cast<int>(placed);
        ++placed;
    }
    p.n_blobs = placed;
    std::normal_distribution<double> bg_noise(0.0, 0.005), blob_noise(0.0, 0.05);
    p.space.features.resize(h * w * p.space.n_dims);
    for (std::size_t i = 0; i < h * w; ++i) {
        for (std::size_t d = 0; d < p.space.n_dims; ++d) {
            double v = p.owner[i] < 0 ? bg_noise(rng) : blob_noise(rng);
            if (p.owner[i] >= 0 && d == static_cast<std::size_t>(p.owner[i])) v += offsets[d];
            p.space.features[i * p.space.n_dims + d] = v;
        }
    }
    return p;
}

}  // namespace testing
