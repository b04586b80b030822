#pragma once

#include <cstring>
#include <vector>

#include "ednn/parallel.hpp"
#include "ednn/tensor.hpp"

// Dense/conv compute kernels. Layout is NHWC throughout; convolution kernels
// are stored [k, k, Cin, Cout] so that the flattened kernel matrix is
// [k*k*Cin, Cout] with no copying. All reductions run in a fixed order.

namespace ednn {

namespace detail {

// Register-blocked GEMM microkernel: C[MR x NR] (+)= A-panel * B-panel.
// NR sized so the accumulator tile fits the vector register file for both
// float and double.
template <typename T>
inline constexpr int kGemmNR = 128 / sizeof(T);
inline constexpr int kGemmMR = 4;

template <typename T, int MR, int NR>
void gemm_micro(std::size_t kc, const T* a, std::size_t a_rs, std::size_t a_cs,
                const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    // Explicit vector lanes: GCC's cost model otherwise vectorizes the row
    // loop for double, which is an order of magnitude slower.
    typedef T Vec __attribute__((vector_size(64)));
    constexpr int kLanes = 64 / sizeof(T);
    constexpr int NV = NR / kLanes;
    static_assert(NR % kLanes == 0);

    Vec acc[MR][NV];
    for (int r = 0; r < MR; ++r)
        for (int v = 0; v < NV; ++v) {
            if (accumulate)
                __builtin_memcpy(&acc[r][v], c + r * ldc + v * kLanes, sizeof(Vec));
            else
                acc[r][v] = Vec{};
        }
    for (std::size_t k = 0; k < kc; ++k) {
        const T* brow = b + k * ldb;
        Vec bv[NV];
        for (int v = 0; v < NV; ++v) __builtin_memcpy(&bv[v], brow + v * kLanes, sizeof(Vec));
        for (int r = 0; r < MR; ++r) {
            T av = a[r * a_rs + k * a_cs];
            for (int v = 0; v < NV; ++v) acc[r][v] += av * bv[v];
        }
    }
    for (int r = 0; r < MR; ++r)
        for (int v = 0; v < NV; ++v)
            __builtin_memcpy(c + r * ldc + v * kLanes, &acc[r][v], sizeof(Vec));
}

// General C[M,N] (+)= A*B with A addressed through (row stride, col stride),
// covering both A and A^T without materializing a transpose. kACS pins the
// column stride at compile time when nonzero (the plain row-major case).
template <typename T, std::size_t kACS = 0>
void gemm_strided_serial(std::size_t m_begin, std::size_t m_end, std::size_t n, std::size_t kc,
                         const T* a, std::size_t a_rs, std::size_t a_cs_dyn,
                         const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    const std::size_t a_cs = kACS != 0 ? kACS : a_cs_dyn;
    constexpr int MR = kGemmMR;
    constexpr int NR = kGemmNR<T>;
    std::size_t i = m_begin;
    for (; i + MR <= m_end; i += MR) {
        std::size_t j = 0;
        for (; j + NR <= n; j += NR)
            gemm_micro<T, MR, NR>(kc, a + i * a_rs, a_rs, a_cs, b + j, ldb,
                                  c + i * ldc + j, ldc, accumulate);
        for (; j < n; ++j) {
            for (int r = 0; r < MR; ++r) {
                T s = accumulate ? c[(i + r) * ldc + j] : T(0);
                for (std::size_t k = 0; k < kc; ++k)
                    s += a[(i + r) * a_rs + k * a_cs] * b[k * ldb + j];
                c[(i + r) * ldc + j] = s;
            }
        }
    }
    for (; i < m_end; ++i) {
        std::size_t j = 0;
        for (; j + NR <= n; j += NR)
            gemm_micro<T, 1, NR>(kc, a + i * a_rs, a_rs, a_cs, b + j, ldb, c + i * ldc + j, ldc,
                                 accumulate);
        for (; j < n; ++j) {
            T s = accumulate ? c[i * ldc + j] : T(0);
            for (std::size_t k = 0; k < kc; ++k)
                s += a[i * a_rs + k * a_cs] * b[k * ldb + j];
            c[i * ldc + j] = s;
        }
    }
}

}  // namespace detail

/// C[M,N] (+)= A[M,K] * B[K,N], row-major. Parallel over row blocks when
/// enabled; rows are independent so results do not depend on thread count.
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate,
             bool parallel = false) {
    if (parallel && get_threads() > 1) {
        parallel_chunks(m, [&](std::size_t, std::size_t begin, std::size_t end) {
            detail::gemm_strided_serial<T, 1>(begin, end, n, k, a, lda, std::size_t(1), b, ldb, c,
                                              ldc, accumulate);
        });
    } else {
        detail::gemm_strided_serial<T, 1>(std::size_t(0), m, n, k, a, lda, std::size_t(1), b, ldb,
                                          c, ldc, accumulate);
    }
}

/// C[K,N] (+)= A[M,K]^T * B[M,N]. Used for weight gradients.
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
             const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
    detail::gemm_strided_serial(std::size_t(0), k, n, m, a, std::size_t(1), lda, b, ldb, c, ldc,
                                accumulate);
}

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst) {
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

/// Same-padding geometry: out = ceil(in / stride), pad split with the extra
/// pixel at the bottom/right.
struct ConvGeom {
    std::size_t in_h, in_w, in_c, ksize, out_c, stride;
    std::size_t out_h, out_w;
    long pad_top, pad_left;

    std::size_t patch_len() const { return ksize * ksize * in_c; }
    std::size_t out_pixels() const { return out_h * out_w; }
};

inline ConvGeom make_conv_geom(std::size_t h, std::size_t w, std::size_t cin, std::size_t k,
                               std::size_t cout, std::size_t stride) {
    if (stride < 1) throw ConfigError("conv stride must be >= 1");
    ConvGeom g{h, w, cin, k, cout, stride, 0, 0, 0, 0};
    g.out_h = (h + stride - 1) / stride;
    g.out_w = (w + stride - 1) / stride;
    auto pad_total = [&](std::size_t in, std::size_t out) -> long {
        long p = static_cast<long>((out - 1) * stride + k) - static_cast<long>(in);
        return p < 0 ? 0 : p;
    };
    g.pad_top = pad_total(h, g.out_h) / 2;
    g.pad_left = pad_total(w, g.out_w) / 2;
    return g;
}

/// Writes the [out_h*out_w, k*k*cin] patch matrix for one image.
template <typename T>
void im2col(const T* img, const ConvGeom& g, T* col) {
    const std::size_t plen = g.patch_len();
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            T* patch = col + (oy * g.out_w + ox) * plen;
            long y0 = static_cast<long>(oy * g.stride) - g.pad_top;
            long x0 = static_cast<long>(ox * g.stride) - g.pad_left;
            for (std::size_t ky = 0; ky < g.ksize; ++ky) {
                long iy = y0 + static_cast<long>(ky);
                T* prow = patch + ky * g.ksize * g.in_c;
                if (iy < 0 || iy >= static_cast<long>(g.in_h)) {
                    std::memset(prow, 0, g.ksize * g.in_c * sizeof(T));
                    continue;
                }
                for (std::size_t kx = 0; kx < g.ksize; ++kx) {
                    long ix = x0 + static_cast<long>(kx);
                    T* dst = prow + kx * g.in_c;
                    if (ix < 0 || ix >= static_cast<long>(g.in_w)) {
                        std::memset(dst, 0, g.in_c * sizeof(T));
                    } else {
                        const T* src = img + (iy * g.in_w + ix) * g.in_c;
                        std::memcpy(dst, src, g.in_c * sizeof(T));
                    }
                }
            }
        }
    }
}

/// Scatter-add of a patch-matrix gradient back onto the image gradient.
template <typename T>
void col2im_add(const T* col, const ConvGeom& g, T* img_grad) {
    const std::size_t plen = g.patch_len();
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const T* patch = col + (oy * g.out_w + ox) * plen;
            long y0 = static_cast<long>(oy * g.stride) - g.pad_top;
            long x0 = static_cast<long>(ox * g.stride) - g.pad_left;
            for (std::size_t ky = 0; ky < g.ksize; ++ky) {
                long iy = y0 + static_cast<long>(ky);
                if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
                for (std::size_t kx = 0; kx < g.ksize; ++kx) {
                    long ix = x0 + static_cast<long>(kx);
                    if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
                    const T* src = patch + (ky * g.ksize + kx) * g.in_c;
                    T* dst = img_grad + (iy * g.in_w + ix) * g.in_c;
                    for (std::size_t c = 0; c < g.in_c; ++c) dst[c] += src[c];
                }
            }
        }
    }
}

namespace detail {

template <typename T>
ConvGeom conv_check(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride) {
    if (x.rank() != 4) throw ShapeError("conv2d input must be [B,H,W,Cin], got " + shape_str(x.shape));
    if (w.rank() != 4) throw ShapeError("conv2d kernels must be [k,k,Cin,K], got " + shape_str(w.shape));
    if (w.dim(0) != w.dim(1)) throw ShapeError("conv2d kernels must be square, got " + shape_str(w.shape));
    if (w.dim(2) != x.dim(3))
        throw ShapeError("conv2d channel mismatch: input Cin=" + std::to_string(x.dim(3)) +
                         ", kernel Cin=" + std::to_string(w.dim(2)));
    if (b.rank() != 1 || b.dim(0) != w.dim(3))
        throw ShapeError("conv2d bias must be [K]=" + std::to_string(w.dim(3)) + ", got " +
                         shape_str(b.shape));
    return make_conv_geom(x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(3), stride);
}

}  // namespace detail

/// Forward convolution, same padding. Output [B, ceil(H/S), ceil(W/S), K].
template <typename T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                    Tensor<T>& y) {
    ConvGeom g = detail::conv_check(x, w, b, stride);
    const std::size_t batch = x.dim(0);
    const std::size_t in_len = g.in_h * g.in_w * g.in_c;
    const std::size_t out_len = g.out_pixels() * g.out_c;
    Shape want{batch, g.out_h, g.out_w, g.out_c};
    if (y.shape != want) y = Tensor<T>(want);

    std::vector<std::vector<T>> scratch(num_chunks(batch));
    parallel_chunks(batch, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        auto& col = scratch[chunk];
        col.resize(g.out_pixels() * g.patch_len());
        for (std::size_t img = begin; img < end; ++img) {
            im2col(x.ptr() + img * in_len, g, col.data());
            T* out = y.ptr() + img * out_len;
            gemm_nn(g.out_pixels(), g.out_c, g.patch_len(), col.data(), g.patch_len(), w.ptr(),
                    g.out_c, out, g.out_c, false);
            for (std::size_t p = 0; p < g.out_pixels(); ++p)
                for (std::size_t c = 0; c < g.out_c; ++c) out[p * g.out_c + c] += b[c];
        }
    });
}

/// Backward convolution. Adds into dw/db/dx (callers zero them first).
/// Weight/bias gradients are reduced over fixed per-chunk partials.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, int stride, const Tensor<T>& dy,
                     Tensor<T>* dx, Tensor<T>& dw, Tensor<T>& db) {
    ConvGeom g = make_conv_geom(x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(3), stride);
    const std::size_t batch = x.dim(0);
    const std::size_t in_len = g.in_h * g.in_w * g.in_c;
    const std::size_t out_len = g.out_pixels() * g.out_c;
    const std::size_t wlen = g.patch_len() * g.out_c;

    // W^T once, shared read-only by all chunks.
    std::vector<T> wt(wlen);
    transpose(g.patch_len(), g.out_c, w.ptr(), wt.data());

    std::size_t chunks = num_chunks(batch);
    std::vector<std::vector<T>> dw_part(chunks), db_part(chunks), scratch(chunks), dcol(chunks);
    parallel_chunks(batch, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        auto& col = scratch[chunk];
        auto& dc = dcol[chunk];
        col.resize(g.out_pixels() * g.patch_len());
        dc.resize(g.out_pixels() * g.patch_len());
        dw_part[chunk].assign(wlen, T(0));
        db_part[chunk].assign(g.out_c, T(0));
        for (std::size_t img = begin; img < end; ++img) {
            const T* dyp = dy.ptr() + img * out_len;
            im2col(x.ptr() + img * in_len, g, col.data());
            // dW += col^T * dY
            gemm_tn(g.out_pixels(), g.out_c, g.patch_len(), col.data(), g.patch_len(), dyp,
                    g.out_c, dw_part[chunk].data(), g.out_c, true);
            for (std::size_t p = 0; p < g.out_pixels(); ++p)
                for (std::size_t c = 0; c < g.out_c; ++c) db_part[chunk][c] += dyp[p * g.out_c + c];
            if (dx) {
                // dCol = dY * W^T, then scatter back onto the image grad.
                gemm_nn(g.out_pixels(), g.patch_len(), g.out_c, dyp, g.out_c, wt.data(),
                        g.patch_len(), dc.data(), g.patch_len(), false);
                col2im_add(dc.data(), g, dx->ptr() + img * in_len);
            }
        }
    });
    for (std::size_t chunk = 0; chunk < chunks; ++chunk) {
        for (std::size_t i = 0; i < wlen; ++i) dw[i] += dw_part[chunk][i];
        for (std::size_t c = 0; c < g.out_c; ++c) db[c] += db_part[chunk][c];
    }
}

/// Inputs of rank > 2 are treated as [B, flattened-rest], which is how the
/// conv stack feeds the dense head.
template <typename T>
void dense_check(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.rank() < 2 || w.rank() != 2)
        throw ShapeError("dense expects [B,n] x [n,m], got " + shape_str(x.shape) + " x " +
                         shape_str(w.shape));
    if (x.size() / x.dim(0) != w.dim(0))
        throw ShapeError("dense inner dimension mismatch: " + shape_str(x.shape) + " x " +
                         shape_str(w.shape));
    if (b.rank() != 1 || b.dim(0) != w.dim(1))
        throw ShapeError("dense bias must be [" + std::to_string(w.dim(1)) + "], got " +
                         shape_str(b.shape));
}

template <typename T>
void dense_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Tensor<T>& y) {
    dense_check(x, w, b);
    const std::size_t batch = x.dim(0), n = x.size() / x.dim(0), m = w.dim(1);
    Shape want{batch, m};
    if (y.shape != want) y = Tensor<T>(want);
    gemm_nn(batch, m, n, x.ptr(), n, w.ptr(), m, y.ptr(), m, false, true);
    parallel_chunks(batch, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            for (std::size_t j = 0; j < m; ++j) y[i * m + j] += b[j];
    });
}

template <typename T>
void dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>* dx,
                    Tensor<T>& dw, Tensor<T>& db) {
    const std::size_t batch = x.dim(0), n = x.size() / x.dim(0), m = w.dim(1);
    std::size_t chunks = num_chunks(batch);
    std::vector<std::vector<T>> dw_part(chunks), db_part(chunks);
    parallel_chunks(batch, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        dw_part[chunk].assign(n * m, T(0));
        db_part[chunk].assign(m, T(0));
        gemm_tn(end - begin, m, n, x.ptr() + begin * n, n, dy.ptr() + begin * m, m,
                dw_part[chunk].data(), m, true);
        for (std::size_t i = begin; i < end; ++i)
            for (std::size_t j = 0; j < m; ++j) db_part[chunk][j] += dy[i * m + j];
    });
    for (std::size_t chunk = 0; chunk < chunks; ++chunk) {
        for (std::size_t i = 0; i < n * m; ++i) dw[i] += dw_part[chunk][i];
        for (std::size_t j = 0; j < m; ++j) db[j] += db_part[chunk][j];
    }
    if (dx) {
        std::vector<T> wt(n * m);
        transpose(n, m, w.ptr(), wt.data());
        gemm_nn(batch, n, m, dy.ptr(), m, wt.data(), n, dx->ptr(), n, true, true);
    }
}

template <typename T>
void relu_forward(const Tensor<T>& x, Tensor<T>& y) {
    if (y.shape != x.shape) y = Tensor<T>(x.shape);
    parallel_chunks(x.size(), [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    });
}

template <typename T>
void relu_backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx) {
    parallel_chunks(x.size(), [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            if (x[i] > T(0)) dx[i] += dy[i];
    });
}

/// Mean over all entries of (pred - label)^2. Fixed left-to-right reduction.
template <typename T>
T mse_forward(const Tensor<T>& pred, const Tensor<T>& labels) {
    require_same_shape(pred, labels, "mse_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = static_cast<double>(pred[i]) - static_cast<double>(labels[i]);
        acc += d * d;
    }
    return static_cast<T>(acc / static_cast<double>(pred.size()));
}

template <typename T>
void mse_backward(const Tensor<T>& pred, const Tensor<T>& labels, T dloss, Tensor<T>& dpred) {
    const T scale = dloss * T(2) / static_cast<T>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) dpred[i] += scale * (pred[i] - labels[i]);
}

// Value-level wrappers for direct use outside a graph.

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride) {
    Tensor<T> y;
    conv2d_forward(x, w, b, stride, y);
    return y;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    Tensor<T> y;
    dense_forward(x, w, b, y);
    return y;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> y;
    relu_forward(x, y);
    return y;
}

template <typename T>
T mse_loss(const Tensor<T>& pred, const Tensor<T>& labels) {
    return mse_forward(pred, labels);
}

}  // namespace ednn
