#pragma once

// Independent reference implementations used to check the fast paths. These
// are written from the definitions (direct loops, no shared code with the
// library kernels) so a bug cannot cancel out on both sides.

#include <cmath>
#include <deque>
#include <functional>
#include <random>
#include <vector>

#include <ednn/image.hpp>
#include <ednn/tensor.hpp>

namespace oracle {

/// Plain triple-loop matrix product, C = A[m,k] * B[k,n].
template <typename T>
std::vector<T> naive_matmul(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b) {
    std::vector<T> c(m * n, T(0));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t j = 0; j < n; ++j) c[i * n + j] += a[i * k + p] * b[p * n + j];
    return c;
}

/// Direct convolution with same padding: out = ceil(in/S), total padding
/// (out-1)*S + k - in split with the extra pixel at the bottom/right.
/// x: [B,H,W,Cin], w: [k,k,Cin,K], b: [K] -> [B,out,out,K].
template <typename T>
ednn::Tensor<T> naive_conv2d(const ednn::Tensor<T>& x, const ednn::Tensor<T>& w,
                             const ednn::Tensor<T>& b, int stride) {
    const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), Cin = x.dim(3);
    const std::size_t k = w.dim(0), K = w.dim(3);
    const std::size_t oh = (H + stride - 1) / stride, ow = (W + stride - 1) / stride;
    const long pad_h = std::max<long>(0, long((oh - 1) * stride + k) - long(H));
    const long pad_w = std::max<long>(0, long((ow - 1) * stride + k) - long(W));
    const long top = pad_h / 2, left = pad_w / 2;

    ednn::Tensor<T> y({B, oh, ow, K});
    for (std::size_t img = 0; img < B; ++img)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox)
                for (std::size_t f = 0; f < K; ++f) {
                    double acc = static_cast<double>(b[f]);
                    for (std::size_t ky = 0; ky < k; ++ky)
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            long iy = long(oy) * stride - top + long(ky);
                            long ix = long(ox) * stride - left + long(kx);
                            if (iy < 0 || ix < 0 || iy >= long(H) || ix >= long(W)) continue;
                            for (std::size_t c = 0; c < Cin; ++c)
                                acc += static_cast<double>(
                                           x[((img * H + iy) * W + ix) * Cin + c]) *
                                       static_cast<double>(w[((ky * k + kx) * Cin + c) * K + f]);
                        }
                    y[((img * oh + oy) * ow + ox) * K + f] = static_cast<T>(acc);
                }
    return y;
}

/// Central-difference gradient of a scalar function with respect to one
/// tensor entry.
template <typename T>
double fd_gradient(ednn::Tensor<T>& t, std::size_t index, double eps,
                   const std::function<double()>& loss) {
    const T saved = t[index];
    t[index] = static_cast<T>(static_cast<double>(saved) + eps);
    double up = loss();
    t[index] = static_cast<T>(static_cast<double>(saved) - eps);
    double down = loss();
    t[index] = saved;
    return (up - down) / (2.0 * eps);
}

inline double rel_error(double got, double want) {
    double denom = std::max(std::fabs(got), std::fabs(want));
    if (denom < 1e-12) return std::fabs(got - want);
    return std::fabs(got - want) / denom;
}

/// 8-connected components of pixels with intensity above the threshold in
/// channel 0. Independent count estimate for composed collages whose objects
/// never touch.
inline int connected_components(const ednn::Image& img, int threshold = 8) {
    std::vector<char> seen(std::size_t(img.width) * img.height, 0);
    auto idx = [&](int y, int x) { return std::size_t(y) * img.width + x; };
    int count = 0;
    for (int sy = 0; sy < img.height; ++sy)
        for (int sx = 0; sx < img.width; ++sx) {
            if (seen[idx(sy, sx)] || img.at(sy, sx) <= threshold) continue;
            ++count;
            std::deque<std::pair<int, int>> queue{{sy, sx}};
            seen[idx(sy, sx)] = 1;
            while (!queue.empty()) {
                auto [y, x] = queue.front();
                queue.pop_front();
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        int ny = y + dy, nx = x + dx;
                        if (ny < 0 || nx < 0 || ny >= img.height || nx >= img.width) continue;
                        if (seen[idx(ny, nx)] || img.at(ny, nx) <= threshold) continue;
                        seen[idx(ny, nx)] = 1;
                        queue.emplace_back(ny, nx);
                    }
            }
        }
    return count;
}

}  // namespace oracle
