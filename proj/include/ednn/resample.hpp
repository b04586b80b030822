#pragma once

#include <algorithm>
#include <cmath>

#include "ednn/image.hpp"

namespace ednn {

namespace detail {

/// Catmull-Rom cubic kernel (a = -0.5).
inline double cubic_weight(double x) {
    constexpr double a = -0.5;
    x = std::fabs(x);
    if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
    return 0.0;
}

}  // namespace detail

/// Bicubic resampling to (out_w, out_h), clamped to [0, 255]. Identity when
/// the extents already match.
inline Image scale_bicubic(const Image& src, int out_w, int out_h) {
    if (out_w < 1 || out_h < 1) throw ConfigError("scale target must be positive");
    if (out_w == src.width && out_h == src.height) return src;

    Image dst(out_w, out_h, src.channels);
    const double sx = static_cast<double>(src.width) / out_w;
    const double sy = static_cast<double>(src.height) / out_h;
    auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };

    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy[4];
        for (int i = 0; i < 4; ++i) wy[i] = detail::cubic_weight(fy - (y0 - 1 + i));
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx[4];
            for (int i = 0; i < 4; ++i) wx[i] = detail::cubic_weight(fx - (x0 - 1 + i));
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0.0;
                for (int i = 0; i < 4; ++i) {
                    int yy = clampi(y0 - 1 + i, 0, src.height - 1);
                    double row = 0.0;
                    for (int j = 0; j < 4; ++j) {
                        int xx = clampi(x0 - 1 + j, 0, src.width - 1);
                        row += wx[j] * src.at(yy, xx, c);
                    }
                    acc += wy[i] * row;
                }
                long v = std::lround(acc);
                dst.at(y, x, c) = static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
            }
        }
    }
    return dst;
}

/// Rotation by k*90 degrees counter-clockwise; requires a square image.
inline Image rotate90(const Image& src, int k) {
    if (src.width != src.height) throw ShapeError("rotate90 requires a square image");
    k = ((k % 4) + 4) % 4;
    if (k == 0) return src;
    const int n = src.width;
    Image dst(n, n, src.channels);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            int ty, tx;
            switch (k) {
                case 1: ty = n - 1 - x; tx = y; break;
                case 2: ty = n - 1 - y; tx = n - 1 - x; break;
                default: ty = x; tx = n - 1 - y; break;
            }
            for (int c = 0; c < src.channels; ++c) dst.at(ty, tx, c) = src.at(y, x, c);
        }
    return dst;
}

}  // namespace ednn
