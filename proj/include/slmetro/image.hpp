#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace slmetro {

// 8-bit grayscale image, row-major.
struct Image8 {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;

    Image8() = default;
    Image8(int w, int h, uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

    uint8_t &at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }

    bool contains(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    // Bilinear sample; coordinates clamped to the image border.
    double sample(double x, double y) const {
        x = std::clamp(x, 0.0, static_cast<double>(width - 1));
        y = std::clamp(y, 0.0, static_cast<double>(height - 1));
        int x0 = std::min(static_cast<int>(x), width - 2 >= 0 ? width - 2 : 0);
        int y0 = std::min(static_cast<int>(y), height - 2 >= 0 ? height - 2 : 0);
        int x1 = std::min(x0 + 1, width - 1);
        int y1 = std::min(y0 + 1, height - 1);
        double tx = x - x0, ty = y - y0;
        double v00 = at(x0, y0), v10 = at(x1, y0), v01 = at(x0, y1), v11 = at(x1, y1);
        return (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11);
    }
};

inline uint8_t quantize8(double v) {
    return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

} // namespace slmetro
