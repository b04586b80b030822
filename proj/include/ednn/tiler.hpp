#pragma once

#include <span>
#include <vector>

#include "ednn/exact_sum.hpp"
#include "ednn/image.hpp"
#include "ednn/tensor.hpp"

namespace ednn {

/// Layout of the non-overlapping f x f focus grid over a padded image.
struct TileGrid {
    int focus = 0;    // f
    int context = 0;  // c
    int rows = 0, cols = 0;
    int width = 0, height = 0;  // padded image extents, multiples of f
    int channels = 1;

    int tile_side() const { return focus + 2 * context; }
    std::size_t tile_count() const { return std::size_t(rows) * cols; }
    std::size_t tile_index(int row, int col) const { return std::size_t(row) * cols + col; }

    bool operator==(const TileGrid&) const = default;
};

/// Zero-extends an image so both extents are the smallest multiples of f;
/// original content stays in the top-left corner.
inline Image pad_to_multiple(const Image& img, int f) {
    if (f < 1) throw ConfigError("focus size must be >= 1");
    auto round_up = [f](int v) { return ((v + f - 1) / f) * f; };
    int w = round_up(img.width), h = round_up(img.height);
    if (w == img.width && h == img.height) return img;
    Image out(w, h, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y, x, c);
    return out;
}

/// Flattened batch of context-padded tiles in raw 8-bit pixel scale.
/// data is [N_batch * N_tiles, f+2c, f+2c, d], tiles in row-major focus
/// order per image.
template <typename T>
struct TileBatch {
    Tensor<T> data;
    TileGrid grid;
    std::size_t n_batch = 0;
};

/// Cuts every image into context-padded tiles. Image extents must already be
/// multiples of f (route through pad_to_multiple first); context pixels
/// beyond the image border read as zero.
template <typename T>
TileBatch<T> extract_tiles(std::span<const Image> images, int f, int c) {
    if (images.empty()) throw ConfigError("extract_tiles: empty batch");
    if (f < 1 || c < 0) throw ConfigError("extract_tiles: need f >= 1 and c >= 0");
    const Image& first = images[0];
    if (first.width % f != 0 || first.height % f != 0)
        throw ShapeError("image extents " + std::to_string(first.width) + "x" +
                         std::to_string(first.height) + " are not multiples of f=" +
                         std::to_string(f) + "; call pad_to_multiple first");
    for (const Image& img : images)
        if (img.width != first.width || img.height != first.height ||
            img.channels != first.channels)
            throw ShapeError("extract_tiles: images in a batch must share extents and channels");

    TileGrid grid;
    grid.focus = f;
    grid.context = c;
    grid.cols = first.width / f;
    grid.rows = first.height / f;
    grid.width = first.width;
    grid.height = first.height;
    grid.channels = first.channels;

    const int side = grid.tile_side();
    const int d = first.channels;
    TileBatch<T> batch;
    batch.grid = grid;
    batch.n_batch = images.size();
    batch.data = Tensor<T>({images.size() * grid.tile_count(), std::size_t(side),
                            std::size_t(side), std::size_t(d)});

    std::size_t tile = 0;
    for (const Image& img : images) {
        for (int tr = 0; tr < grid.rows; ++tr) {
            for (int tc = 0; tc < grid.cols; ++tc, ++tile) {
                T* out = batch.data.ptr() + tile * std::size_t(side) * side * d;
                int y0 = tr * f - c, x0 = tc * f - c;
                for (int y = 0; y < side; ++y) {
                    int iy = y0 + y;
                    for (int x = 0; x < side; ++x) {
                        int ix = x0 + x;
                        T* px = out + (std::size_t(y) * side + x) * d;
                        bool inside = iy >= 0 && iy < img.height && ix >= 0 && ix < img.width;
                        for (int ch = 0; ch < d; ++ch)
                            px[ch] = inside ? static_cast<T>(img.at(iy, ix, ch)) : T(0);
                    }
                }
            }
        }
    }
    return batch;
}

/// Per-image, per-tile, per-class network outputs; summing over the tile
/// axis reproduces the count prediction.
template <typename T>
struct ContributionMap {
    Tensor<T> values;  // [N_batch, N_tiles, l]
    TileGrid grid;

    std::size_t batch_size() const { return values.dim(0); }
    std::size_t classes() const { return values.dim(2); }
};

/// Per-class contribution grid for one image, one cell per focus region.
template <typename T>
struct DensityMap {
    int rows = 0, cols = 0;
    int classes = 0;
    int focus = 0;  // rendering scale: each cell covers focus x focus pixels
    Tensor<T> cells;  // [rows, cols, l]

    T cell(int r, int c, int cls) const {
        return cells[(std::size_t(r) * cols + c) * classes + cls];
    }
};

/// Pure reshape of one image's contributions onto the focus grid.
template <typename T>
DensityMap<T> assemble_density_map(const ContributionMap<T>& contribs, std::size_t batch_index = 0) {
    if (batch_index >= contribs.batch_size())
        throw BoundsError("assemble_density_map: image index " + std::to_string(batch_index) +
                          " out of " + std::to_string(contribs.batch_size()));
    const TileGrid& g = contribs.grid;
    const std::size_t l = contribs.classes(), nt = g.tile_count();
    DensityMap<T> map;
    map.rows = g.rows;
    map.cols = g.cols;
    map.classes = static_cast<int>(l);
    map.focus = g.focus;
    map.cells = Tensor<T>({std::size_t(g.rows), std::size_t(g.cols), l});
    const T* src = contribs.values.ptr() + batch_index * nt * l;
    std::copy(src, src + nt * l, map.cells.ptr());
    return map;
}

/// Rectangle in focus-grid units.
struct GridRect {
    int row = 0, col = 0;
    int rows = 0, cols = 0;
};

/// Order-invariant sum of the cells inside rect, per class. Disjoint
/// rectangles covering the grid partition the total count exactly.
template <typename T>
std::vector<double> region_sum(const DensityMap<T>& map, const GridRect& rect) {
    if (rect.rows < 0 || rect.cols < 0 || rect.row < 0 || rect.col < 0 ||
        rect.row + rect.rows > map.rows || rect.col + rect.cols > map.cols)
        throw BoundsError("region_sum: rect outside the " + std::to_string(map.rows) + "x" +
                          std::to_string(map.cols) + " focus grid");
    std::vector<double> sums(map.classes, 0.0);
    for (int cls = 0; cls < map.classes; ++cls) {
        ExactAccumulator acc;
        for (int r = rect.row; r < rect.row + rect.rows; ++r)
            for (int c = rect.col; c < rect.col + rect.cols; ++c)
                acc.add(static_cast<double>(map.cell(r, c, cls)));
        sums[cls] = acc.result();
    }
    return sums;
}

}  // namespace ednn
