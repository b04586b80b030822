#include <catch2/catch_amalgamated.hpp>

#include <ednn/tiler.hpp>

#include "oracles.hpp"

using namespace ednn;

namespace {

Image random_image(int w, int h, int d, std::mt19937_64& rng) {
    Image img(w, h, d);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() % 256);
    return img;
}

/// Index-arithmetic oracle: the tile pixel (y, x) of tile (tr, tc) must
/// equal padded(tr*f - c + y, tc*f - c + x), zero outside.
template <typename T>
void check_tiles_against_oracle(const Image& img, const TileBatch<T>& batch, std::size_t image_idx) {
    const TileGrid& g = batch.grid;
    const int side = g.tile_side();
    for (int tr = 0; tr < g.rows; ++tr)
        for (int tc = 0; tc < g.cols; ++tc) {
            const T* tile = batch.data.ptr() +
                            (image_idx * g.tile_count() + g.tile_index(tr, tc)) *
                                std::size_t(side) * side * g.channels;
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x)
                    for (int ch = 0; ch < g.channels; ++ch) {
                        int iy = tr * g.focus - g.context + y;
                        int ix = tc * g.focus - g.context + x;
                        T want = (iy >= 0 && iy < img.height && ix >= 0 && ix < img.width)
                                     ? static_cast<T>(img.at(iy, ix, ch))
                                     : T(0);
                        REQUIRE(tile[(std::size_t(y) * side + x) * g.channels + ch] == want);
                    }
        }
}

}  // namespace

TEST_CASE("pad_to_multiple anchors content top-left with zero fill") {
    Image img(5, 3, 1);
    for (auto& p : img.pixels) p = 200;
    Image padded = pad_to_multiple(img, 4);
    REQUIRE(padded.width == 8);
    REQUIRE(padded.height == 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 8; ++x)
            REQUIRE(padded.at(y, x) == ((y < 3 && x < 5) ? 200 : 0));
    // Already a multiple: unchanged object.
    Image exact(8, 8, 1);
    REQUIRE(pad_to_multiple(exact, 4) == exact);
}

TEST_CASE("tile extraction matches the index-arithmetic oracle over 100 random combinations") {
    std::mt19937_64 rng(17);
    int combos = 0;
    while (combos < 100) {
        int f = 1 + int(rng() % 8);
        int c = int(rng() % 6);
        int rows = 1 + int(rng() % 4), cols = 1 + int(rng() % 4);
        int d = (rng() % 2) ? 3 : 1;
        Image img = random_image(cols * f, rows * f, d, rng);
        auto batch = extract_tiles<float>(std::span<const Image>(&img, 1), f, c);
        REQUIRE(batch.grid.rows == rows);
        REQUIRE(batch.grid.cols == cols);
        check_tiles_against_oracle(img, batch, 0);
        ++combos;
    }
}

TEST_CASE("reassembling the focus windows reproduces the image bitwise") {
    std::mt19937_64 rng(23);
    const int f = 8, c = 5;
    Image img = random_image(40, 24, 1, rng);
    auto batch = extract_tiles<double>(std::span<const Image>(&img, 1), f, c);
    const TileGrid& g = batch.grid;
    const int side = g.tile_side();
    Image rebuilt(img.width, img.height, 1);
    for (int tr = 0; tr < g.rows; ++tr)
        for (int tc = 0; tc < g.cols; ++tc) {
            const double* tile = batch.data.ptr() + g.tile_index(tr, tc) * side * side;
            for (int y = 0; y < f; ++y)
                for (int x = 0; x < f; ++x)
                    rebuilt.at(tr * f + y, tc * f + x) =
                        static_cast<std::uint8_t>(tile[(y + c) * side + (x + c)]);
        }
    REQUIRE(rebuilt == img);
}

TEST_CASE("interior tile content equals the corresponding image window bitwise") {
    std::mt19937_64 rng(29);
    const int f = 6, c = 3;
    Image img = random_image(30, 30, 3, rng);
    auto batch = extract_tiles<float>(std::span<const Image>(&img, 1), f, c);
    const int side = batch.grid.tile_side();
    const int tr = 2, tc = 2;  // interior: context stays inside
    const float* tile = batch.data.ptr() +
                        batch.grid.tile_index(tr, tc) * std::size_t(side) * side * 3;
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            for (int ch = 0; ch < 3; ++ch)
                REQUIRE(tile[(std::size_t(y) * side + x) * 3 + ch] ==
                        float(img.at(tr * f - c + y, tc * f - c + x, ch)));
}

TEST_CASE("extraction rejects non-multiple extents and mixed batches") {
    Image odd(10, 8, 1);
    REQUIRE_THROWS_AS(extract_tiles<float>(std::span<const Image>(&odd, 1), 4, 2), ShapeError);
    std::vector<Image> mixed{Image(8, 8, 1), Image(16, 8, 1)};
    REQUIRE_THROWS_AS(extract_tiles<float>(std::span<const Image>(mixed), 4, 2), ShapeError);
    std::vector<Image> chans{Image(8, 8, 1), Image(8, 8, 3)};
    REQUIRE_THROWS_AS(extract_tiles<float>(std::span<const Image>(chans), 4, 2), ShapeError);
}

TEST_CASE("density map is a pure reshape of the contributions") {
    std::mt19937_64 rng(31);
    ContributionMap<double> cm;
    cm.grid.focus = 4;
    cm.grid.context = 2;
    cm.grid.rows = 3;
    cm.grid.cols = 5;
    cm.grid.width = 20;
    cm.grid.height = 12;
    cm.values = Tensor<double>({2, 15, 2});
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& v : cm.values.data) v = dist(rng);

    for (std::size_t bi : {0u, 1u}) {
        DensityMap<double> dm = assemble_density_map(cm, bi);
        REQUIRE(dm.rows == 3);
        REQUIRE(dm.cols == 5);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 5; ++c)
                for (int cls = 0; cls < 2; ++cls)
                    REQUIRE(dm.cell(r, c, cls) ==
                            cm.values[(bi * 15 + cm.grid.tile_index(r, c)) * 2 + cls]);
    }
    REQUIRE_THROWS_AS(assemble_density_map(cm, 2), BoundsError);
}

TEST_CASE("region sums are additive and exactly partition the total") {
    std::mt19937_64 rng(37);
    DensityMap<float> dm;
    dm.rows = 8;
    dm.cols = 8;
    dm.classes = 2;
    dm.focus = 8;
    dm.cells = Tensor<float>({8, 8, 2});
    std::normal_distribution<double> dist(0.0, 10.0);
    for (auto& v : dm.cells.data) v = static_cast<float>(dist(rng));

    auto whole = region_sum(dm, {0, 0, 8, 8});
    // Quadrant partition: sums of parts equal the whole exactly.
    ExactAccumulator acc0, acc1;
    for (auto rect : {GridRect{0, 0, 4, 4}, {0, 4, 4, 4}, {4, 0, 4, 4}, {4, 4, 4, 4}}) {
        auto part = region_sum(dm, rect);
        acc0.add(part[0]);
        acc1.add(part[1]);
    }
    REQUIRE(acc0.result() == whole[0]);
    REQUIRE(acc1.result() == whole[1]);

    REQUIRE_THROWS_AS(region_sum(dm, {5, 5, 4, 4}), BoundsError);
    REQUIRE_THROWS_AS(region_sum(dm, {-1, 0, 2, 2}), BoundsError);
}
