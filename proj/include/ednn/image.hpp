#pragma once

#include <cstdint>
#include <vector>

#include "ednn/error.hpp"

namespace ednn {

/// 8-bit image, row-major, interleaved channels (grayscale d=1, RGB d=3).
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;

    Image() = default;

    Image(int w, int h, int d) : width(w), height(h), channels(d), pixels(std::size_t(w) * h * d, 0) {
        if (w < 1 || h < 1 || (d != 1 && d != 3))
            throw ConfigError("image extents must be positive with 1 or 3 channels");
    }

    std::uint8_t& at(int y, int x, int c = 0) {
        return pixels[(std::size_t(y) * width + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c = 0) const {
        return pixels[(std::size_t(y) * width + x) * channels + c];
    }

    bool operator==(const Image& o) const = default;
};

/// Saturating element-wise add of src onto dst at (x0, y0); the compositing
/// primitive for collage generation. Channel counts must match.
inline void composite_add(Image& dst, const Image& src, int x0, int y0) {
    if (dst.channels != src.channels) throw ShapeError("composite: channel mismatch");
    for (int y = 0; y < src.height; ++y) {
        int dy = y0 + y;
        if (dy < 0 || dy >= dst.height) continue;
        for (int x = 0; x < src.width; ++x) {
            int dx = x0 + x;
            if (dx < 0 || dx >= dst.width) continue;
            for (int c = 0; c < src.channels; ++c) {
                int v = int(dst.at(dy, dx, c)) + int(src.at(y, x, c));
                dst.at(dy, dx, c) = static_cast<std::uint8_t>(v > 255 ? 255 : v);
            }
        }
    }
}

}  // namespace ednn
