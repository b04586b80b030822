#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include <ednn/datagen.hpp>

#include "oracles.hpp"

using namespace ednn;
namespace fs = std::filesystem;

namespace {

void write_be32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<char*>(b), 4);
}

/// Hand-built IDX pair with 2x2 glyphs: per_digit examples per digit in
/// round-robin order, each pixel encoding (digit, index) so parses can be
/// checked byte-for-byte.
void write_idx_pair(const std::string& imgs, const std::string& labs, int per_digit,
                    int extra_for_zero = 0) {
    std::ofstream oi(imgs, std::ios::binary), ol(labs, std::ios::binary);
    std::uint32_t total = 10u * per_digit + extra_for_zero;
    write_be32(oi, 2051);
    write_be32(oi, total);
    write_be32(oi, 2);
    write_be32(oi, 2);
    write_be32(ol, 2049);
    write_be32(ol, total);
    auto emit = [&](int digit, int index) {
        unsigned char px[4] = {static_cast<unsigned char>(digit),
                               static_cast<unsigned char>(index & 0xff),
                               static_cast<unsigned char>((index >> 8) & 0xff), 255};
        oi.write(reinterpret_cast<char*>(px), 4);
        char lab = static_cast<char>(digit);
        ol.write(&lab, 1);
    };
    for (int i = 0; i < per_digit; ++i)
        for (int d = 0; d < 10; ++d) emit(d, i);
    for (int i = 0; i < extra_for_zero; ++i) emit(0, per_digit + i);
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is.good());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

DatasetSpec small_mnist1(std::uint64_t seed) {
    DatasetSpec spec = DatasetSpec::variant_defaults(Variant::Mnist1);
    spec.canvas = 64;
    spec.l_max = 4;
    spec.glyph_size = 12;
    spec.train_examples = 20;
    spec.test_examples = 10;
    spec.seed = seed;
    return spec;
}

}  // namespace

TEST_CASE("load_idx parses a hand-built pair byte-for-byte") {
    fs::path dir = fs::temp_directory_path() / "ednn_idx_test";
    fs::create_directories(dir);
    auto imgs = (dir / "im.idx").string(), labs = (dir / "la.idx").string();
    write_idx_pair(imgs, labs, DigitPool::kPerDigit);

    DigitPool pool = load_idx(imgs, labs);
    REQUIRE(pool.train_count == 4320);
    for (int d = 0; d < 10; ++d) {
        REQUIRE(pool.glyphs[d].size() == 4800);
        REQUIRE(pool.test_count(d) == 480);
        // Round-robin order: the i-th glyph of digit d encodes (d, i).
        for (int i : {0, 1, 4319, 4320, 4799}) {
            const Image& g = pool.glyphs[d][i];
            REQUIRE(g.width == 2);
            REQUIRE(g.at(0, 0) == d);
            REQUIRE(g.at(0, 1) == (i & 0xff));
            REQUIRE(g.at(1, 0) == ((i >> 8) & 0xff));
            REQUIRE(g.at(1, 1) == 255);
        }
        REQUIRE(pool.test_glyph(d, 0).at(0, 1) == (4320 & 0xff));
    }
}

TEST_CASE("load_idx truncates surplus glyphs and rejects deficits and corruption") {
    fs::path dir = fs::temp_directory_path() / "ednn_idx_test2";
    fs::create_directories(dir);
    auto imgs = (dir / "im.idx").string(), labs = (dir / "la.idx").string();

    // Surplus: digit 0 has 4803 examples; only the first 4800 are kept.
    write_idx_pair(imgs, labs, DigitPool::kPerDigit, 3);
    DigitPool pool = load_idx(imgs, labs);
    REQUIRE(pool.glyphs[0].size() == 4800);

    // Deficit: too few per digit is an error.
    write_idx_pair(imgs, labs, 100);
    REQUIRE_THROWS_AS(load_idx(imgs, labs), FormatError);

    // Bad magic.
    {
        std::ofstream oi(imgs, std::ios::binary);
        write_be32(oi, 1234);
        write_be32(oi, 0);
        write_be32(oi, 2);
        write_be32(oi, 2);
    }
    REQUIRE_THROWS_AS(load_idx(imgs, labs), FormatError);

    // Truncated image payload.
    write_idx_pair(imgs, labs, DigitPool::kPerDigit);
    fs::resize_file(imgs, 16 + 1000);
    REQUIRE_THROWS_AS(load_idx(imgs, labs), FormatError);

    REQUIRE_THROWS_AS(load_idx((dir / "nope").string(), labs), IoError);
}

TEST_CASE("synthetic glyph pool is deterministic with the documented partition") {
    DigitPool a = synthetic_digit_pool(42, 50);
    DigitPool b = synthetic_digit_pool(42, 50);
    REQUIRE(a.train_count == 45);
    for (int d = 0; d < 10; ++d) {
        REQUIRE(a.glyphs[d].size() == 50);
        REQUIRE(a.glyphs[d][0].width == 28);
        REQUIRE(a.glyphs[d][0].height == 28);
        for (std::size_t i = 0; i < 50; ++i) REQUIRE(a.glyphs[d][i] == b.glyphs[d][i]);
        // Jitter: different instances of the same digit differ.
        REQUIRE(a.glyphs[d][0] != a.glyphs[d][1]);
        // Non-empty ink.
        int ink = 0;
        for (auto px : a.glyphs[d][0].pixels) ink += px > 32;
        REQUIRE(ink > 20);
    }
    DigitPool c = synthetic_digit_pool(43, 50);
    REQUIRE(a.glyphs[0][0] != c.glyphs[0][0]);
}

TEST_CASE("sample_label is uniform over [0, L_max] per class (chi-square)") {
    DatasetSpec spec = DatasetSpec::variant_defaults(Variant::Mnist2);
    spec.l_max = 5;
    auto rng = derive_rng(1, 2, 3);
    std::array<std::array<long, 6>, 2> hist{};
    const int n = 12000;
    for (int i = 0; i < n; ++i) {
        CountLabel label = sample_label(spec, rng);
        REQUIRE(label.counts.size() == 2);
        for (int c = 0; c < 2; ++c) {
            REQUIRE(label.counts[c] >= 0);
            REQUIRE(label.counts[c] <= 5);
            ++hist[c][label.counts[c]];
        }
    }
    const double expected = n / 6.0;
    for (int c = 0; c < 2; ++c) {
        double chi2 = 0.0;
        for (long h : hist[c]) chi2 += (h - expected) * (h - expected) / expected;
        REQUIRE(chi2 < 30.0);  // df=5, far beyond any plausible fluctuation
    }
}

TEST_CASE("compose_collage places the labeled number of glyphs with disjoint boxes") {
    DigitPool pool = synthetic_digit_pool(3, 60);
    DatasetSpec spec = small_mnist1(0);
    auto rng = derive_rng(spec.seed, 1, 0);
    CountLabel label{{4}};
    CollageResult r = compose_collage(spec, label, pool, false, rng);
    REQUIRE(r.image.width == 64);
    REQUIRE(r.placements.size() == 4);
    for (std::size_t i = 0; i < r.placements.size(); ++i) {
        const Placement& p = r.placements[i];
        REQUIRE(p.x >= 0);
        REQUIRE(p.y >= 0);
        REQUIRE(p.x + p.w <= 64);
        REQUIRE(p.y + p.h <= 64);
        REQUIRE(p.glyph_index < pool.train_count);
        for (std::size_t j = 0; j < i; ++j) {
            const Placement& q = r.placements[j];
            bool disjoint = p.x >= q.x + q.w || q.x >= p.x + p.w || p.y >= q.y + q.h ||
                            q.y >= p.y + p.h;
            REQUIRE(disjoint);
        }
    }

    CountLabel zero{{0}};
    CollageResult blank = compose_collage(spec, zero, pool, false, rng);
    REQUIRE(blank.placements.empty());
    for (auto px : blank.image.pixels) REQUIRE(px == 0);
}

TEST_CASE("impossible packings raise GenerationError") {
    DigitPool pool = synthetic_digit_pool(3, 60);
    DatasetSpec spec = DatasetSpec::variant_defaults(Variant::Mnist1);
    spec.canvas = 32;  // native 28x28 glyphs: two disjoint ones cannot fit
    auto rng = derive_rng(1, 1, 0);
    CountLabel label{{2}};
    REQUIRE_THROWS_AS(compose_collage(spec, label, pool, false, rng), GenerationError);
}

TEST_CASE("occlusion compositing clips summed pixels at 255") {
    Image canvas(16, 16, 1), glyph(8, 8, 1);
    for (auto& p : glyph.pixels) p = 200;
    composite_add(canvas, glyph, 2, 2);
    composite_add(canvas, glyph, 6, 6);  // overlaps [6,10)x[6,10)
    REQUIRE(canvas.at(7, 7) == 255);
    REQUIRE(canvas.at(3, 3) == 200);
    REQUIRE(canvas.at(0, 0) == 0);
}

TEST_CASE("generate_dataset is byte-identical per (spec, seed) and matches its ledger") {
    DigitPool pool = synthetic_digit_pool(11, 60);
    DatasetSpec spec = small_mnist1(77);
    fs::path dir1 = fs::temp_directory_path() / "ednn_ds_a";
    fs::path dir2 = fs::temp_directory_path() / "ednn_ds_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    DatasetManifest m1 = generate_dataset(spec, pool, dir1.string());
    DatasetManifest m2 = generate_dataset(spec, pool, dir2.string());

    REQUIRE(m1.entries.size() == 30);
    for (const auto& e : m1.entries) {
        REQUIRE(slurp(dir1 / e.file) == slurp(dir2 / e.file));
        // Ledger consistency: label equals placement tally.
        std::vector<int> tally(1, 0);
        for (const auto& p : e.placements) ++tally[p.class_index];
        REQUIRE(tally == e.label.counts);
    }
    REQUIRE(slurp(dir1 / "labels.json") == slurp(dir2 / "labels.json"));

    // A different seed changes the bytes.
    DatasetSpec other = small_mnist1(78);
    fs::path dir3 = fs::temp_directory_path() / "ednn_ds_c";
    fs::remove_all(dir3);
    generate_dataset(other, pool, dir3.string());
    REQUIRE(slurp(dir1 / "train_00000.png") != slurp(dir3 / "train_00000.png"));
}

TEST_CASE("connected components recover the label on non-occluded collages") {
    DigitPool pool = synthetic_digit_pool(13, 60);
    DatasetSpec spec = small_mnist1(5);
    spec.train_examples = 40;
    spec.test_examples = 0;
    fs::path dir = fs::temp_directory_path() / "ednn_ds_cc";
    fs::remove_all(dir);
    DatasetManifest m = generate_dataset(spec, pool, dir.string());
    for (const auto& e : m.entries) {
        Image img = read_png((dir / e.file).string());
        REQUIRE(oracle::connected_components(img) == e.label.counts[0]);
    }
}

TEST_CASE("generated shapes datasets are RGB, deterministic, and never fully nest") {
    DatasetSpec spec = DatasetSpec::variant_defaults(Variant::Shapes2);
    spec.canvas = 96;
    spec.train_examples = 8;
    spec.test_examples = 4;
    spec.seed = 31;
    fs::path dir1 = fs::temp_directory_path() / "ednn_sh_a";
    fs::path dir2 = fs::temp_directory_path() / "ednn_sh_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    DatasetManifest m1 = generate_shapes(spec, dir1.string());
    generate_shapes(spec, dir2.string());

    for (const auto& e : m1.entries) {
        REQUIRE(slurp(dir1 / e.file) == slurp(dir2 / e.file));
        Image img = read_png((dir1 / e.file).string());
        REQUIRE(img.channels == 3);
        std::vector<int> tally(2, 0);
        for (const auto& p : e.placements) ++tally[p.class_index];
        REQUIRE(tally == e.label.counts);
        for (std::size_t i = 0; i < e.placements.size(); ++i)
            for (std::size_t j = 0; j < i; ++j) {
                const auto& a = e.placements[i];
                const auto& b = e.placements[j];
                bool a_in_b = b.x <= a.x && b.y <= a.y && b.x + b.w >= a.x + a.w &&
                              b.y + b.h >= a.y + a.h;
                bool b_in_a = a.x <= b.x && a.y <= b.y && a.x + a.w >= b.x + b.w &&
                              a.y + a.h >= b.y + b.h;
                REQUIRE_FALSE(a_in_b);
                REQUIRE_FALSE(b_in_a);
            }
    }
}

TEST_CASE("labels.json round-trips the spec") {
    DigitPool pool = synthetic_digit_pool(17, 60);
    DatasetSpec spec = small_mnist1(123);
    fs::path dir = fs::temp_directory_path() / "ednn_ds_spec";
    fs::remove_all(dir);
    generate_dataset(spec, pool, dir.string());
    std::ifstream is(dir / "labels.json");
    nlohmann::json root;
    is >> root;
    DatasetSpec loaded = detail::spec_from_json(root["spec"]);
    REQUIRE(loaded.variant == spec.variant);
    REQUIRE(loaded.l_max == spec.l_max);
    REQUIRE(loaded.canvas == spec.canvas);
    REQUIRE(loaded.glyph_size == spec.glyph_size);
    REQUIRE(loaded.seed == spec.seed);
    REQUIRE(loaded.class_digits == spec.class_digits);
    REQUIRE(root["images"].size() == 30);
    REQUIRE(root["images"][0]["counts"].contains("5"));
}
