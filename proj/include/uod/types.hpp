#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace uod {

// Axis-aligned box in pixel (or grid) coordinates, half-open: [x1, x2) x [y1, y2).
struct Box {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const noexcept { return x2 - x1; }
    double height() const noexcept { return y2 - y1; }
    double area() const noexcept { return width() * height(); }

    friend bool operator==(const Box&, const Box&) = default;
};

// Row-major binary mask. Used both at patch-grid and at image resolution.
struct GridMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> cells;

    GridMask() = default;
    GridMask(std::size_t h, std::size_t w) : height(h), width(w), cells(h * w, 0) {}

    bool at(std::size_t r, std::size_t c) const noexcept { return cells[r * width + c] != 0; }
    void set(std::size_t r, std::size_t c, bool v = true) noexcept { cells[r * width + c] = v ? 1 : 0; }
    std::size_t count() const noexcept {
        std::size_t n = 0;
        for (auto v : cells) n += v != 0;
        return n;
    }
    bool empty() const noexcept { return count() == 0; }

    friend bool operator==(const GridMask&, const GridMask&) = default;
};

// Evaluation ground truth for one image.
struct GroundTruth {
    std::string image_id;
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<Box> boxes;
    std::vector<GridMask> masks;  // empty, or one per box at image resolution
};

}  // namespace uod
