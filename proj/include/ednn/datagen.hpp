#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ednn/idx.hpp"
#include "ednn/image.hpp"
#include "ednn/image_io.hpp"
#include "ednn/resample.hpp"

namespace ednn {

// ---------------------------------------------------------------------------
// Seed derivation and portable uniform draws. std:: distributions are
// implementation-defined, so datasets would not be reproducible across
// standard libraries; these are fixed algorithms.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Independent substream for (seed, a, b), e.g. (dataset seed, split, image).
inline std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return std::mt19937_64(splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b));
}

inline std::int64_t uniform_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
}

// ---------------------------------------------------------------------------
// Dataset specification.

enum class Variant { Mnist1, Mnist2, Mnist10, Mnist2Occ, Mnist2OccVs, Shapes1, Shapes2 };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Mnist1: return "MNIST-1";
        case Variant::Mnist2: return "MNIST-2";
        case Variant::Mnist10: return "MNIST-10";
        case Variant::Mnist2Occ: return "MNIST-2-occ";
        case Variant::Mnist2OccVs: return "MNIST-2-occ-vs";
        case Variant::Shapes1: return "SHAPES-1";
        case Variant::Shapes2: return "SHAPES-2";
    }
    return "?";
}

inline Variant variant_from_name(const std::string& name) {
    for (Variant v : {Variant::Mnist1, Variant::Mnist2, Variant::Mnist10, Variant::Mnist2Occ,
                      Variant::Mnist2OccVs, Variant::Shapes1, Variant::Shapes2})
        if (name == variant_name(v)) return v;
    throw ConfigError("unknown dataset variant '" + name + "'");
}

/// Per-class integer count labels.
struct CountLabel {
    std::vector<int> counts;
};

struct DatasetSpec {
    Variant variant = Variant::Mnist1;
    std::vector<int> class_digits;  // MNIST variants: which numerals are counted
    int l_max = 25;
    int canvas = 256;
    bool occlusion = false;
    double scale_min = 1.0, scale_max = 1.0;  // glyph scaling (variant e)
    int glyph_size = 0;  // pre-scale glyphs to this square side; 0 keeps 28x28
    int train_examples = 0, test_examples = 0;
    std::uint64_t seed = 0;

    bool is_shapes() const { return variant == Variant::Shapes1 || variant == Variant::Shapes2; }

    int classes() const {
        if (is_shapes()) return variant == Variant::Shapes1 ? 1 : 2;
        return static_cast<int>(class_digits.size());
    }

    std::vector<std::string> class_names() const {
        if (variant == Variant::Shapes1) return {"disc"};
        if (variant == Variant::Shapes2) return {"disc", "triangle"};
        std::vector<std::string> names;
        for (int d : class_digits) names.push_back(std::to_string(d));
        return names;
    }

    /// Class sets, L_max and flags as tabulated for each variant.
    static DatasetSpec variant_defaults(Variant v) {
        DatasetSpec s;
        s.variant = v;
        switch (v) {
            case Variant::Mnist1: s.class_digits = {5}; s.l_max = 25; break;
            case Variant::Mnist2: s.class_digits = {4, 8}; s.l_max = 12; break;
            case Variant::Mnist10:
                s.class_digits = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
                s.l_max = 6;
                break;
            case Variant::Mnist2Occ:
                s.class_digits = {4, 8};
                s.l_max = 15;
                s.occlusion = true;
                break;
            case Variant::Mnist2OccVs:
                s.class_digits = {4, 8};
                s.l_max = 15;
                s.occlusion = true;
                s.scale_min = 0.5;
                s.scale_max = 1.5;
                break;
            case Variant::Shapes1:
            case Variant::Shapes2:
                s.l_max = 5;
                s.occlusion = true;  // partial overlap permitted
                break;
        }
        return s;
    }

    void validate() const {
        if (l_max < 0) throw ConfigError("L_max must be >= 0");
        if (canvas < 8) throw ConfigError("canvas too small");
        if (scale_min <= 0 || scale_max < scale_min) throw ConfigError("bad scale range");
        if (!is_shapes() && class_digits.empty()) throw ConfigError("no classes selected");
        for (int d : class_digits)
            if (d < 0 || d > 9) throw ConfigError("class digit out of range");
    }
};

/// Independent uniform draw in [0, L_max] per class.
inline CountLabel sample_label(const DatasetSpec& spec, std::mt19937_64& rng) {
    CountLabel label;
    label.counts.resize(spec.classes());
    for (int& c : label.counts) c = static_cast<int>(uniform_int(rng, 0, spec.l_max));
    return label;
}

// ---------------------------------------------------------------------------
// Synthetic glyph pool. A stand-in digit source for environments without the
// original IDX files: a 5x7 seed font warped per glyph (size, aspect, slant,
// intensity) into 28x28 frames.

namespace detail {

inline const std::array<std::array<const char*, 7>, 10>& seed_font() {
    static const std::array<std::array<const char*, 7>, 10> font = {{
        {"01110", "10001", "10011", "10101", "11001", "10001", "01110"},  // 0
        {"00100", "01100", "00100", "00100", "00100", "00100", "01110"},  // 1
        {"01110", "10001", "00001", "00110", "01000", "10000", "11111"},  // 2
        {"11111", "00010", "00100", "00010", "00001", "10001", "01110"},  // 3
        {"00010", "00110", "01010", "10010", "11111", "00010", "00010"},  // 4
        {"11111", "10000", "11110", "00001", "00001", "10001", "01110"},  // 5
        {"00110", "01000", "10000", "11110", "10001", "10001", "01110"},  // 6
        {"11111", "00001", "00010", "00100", "01000", "01000", "01000"},  // 7
        {"01110", "10001", "10001", "01110", "10001", "10001", "01110"},  // 8
        {"01110", "10001", "10001", "01111", "00001", "00010", "01100"},  // 9
    }};
    return font;
}

inline double bilinear_at(const Image& img, double y, double x) {
    if (y <= -1 || x <= -1 || y >= img.height || x >= img.width) return 0.0;
    int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
    double fy = y - y0, fx = x - x0;
    auto px = [&](int yy, int xx) -> double {
        if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) return 0.0;
        return img.at(yy, xx);
    };
    return px(y0, x0) * (1 - fy) * (1 - fx) + px(y0, x0 + 1) * (1 - fy) * fx +
           px(y0 + 1, x0) * fy * (1 - fx) + px(y0 + 1, x0 + 1) * fy * fx;
}

inline Image render_synthetic_glyph(int digit, std::mt19937_64& rng) {
    const auto& rows = seed_font()[digit];
    Image font(5, 7, 1);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 5; ++x) font.at(y, x) = rows[y][x] == '1' ? 255 : 0;

    int h = static_cast<int>(uniform_int(rng, 18, 24));
    int w = static_cast<int>(std::lround(h * 5.0 / 7.0 * uniform_real(rng, 0.8, 1.1)));
    Image scaled = scale_bicubic(font, w, h);

    double slant = uniform_real(rng, -0.25, 0.25);
    double gain = uniform_real(rng, 0.65, 1.0);
    int max_shift = static_cast<int>(std::ceil(std::fabs(slant) * h / 2.0));
    int x0 = static_cast<int>(uniform_int(rng, max_shift, std::max(max_shift, 27 - w - max_shift)));
    int y0 = static_cast<int>(uniform_int(rng, 0, 27 - h));

    Image out(28, 28, 1);
    for (int y = 0; y < 28; ++y)
        for (int x = 0; x < 28; ++x) {
            double sy = y - y0;
            double sx = x - x0 - slant * (sy - h / 2.0);
            double v = bilinear_at(scaled, sy, sx) * gain;
            long q = std::lround(v);
            out.at(y, x) = static_cast<std::uint8_t>(q < 0 ? 0 : (q > 255 ? 255 : q));
        }
    return out;
}

}  // namespace detail

/// Deterministic procedural digit pool with the same partition layout as the
/// IDX-derived one.
inline DigitPool synthetic_digit_pool(std::uint64_t seed, int per_digit = DigitPool::kPerDigit) {
    if (per_digit < 10) throw ConfigError("per_digit too small");
    DigitPool pool;
    pool.train_count = per_digit * 9 / 10;
    for (int d = 0; d < 10; ++d) {
        pool.glyphs[d].reserve(per_digit);
        for (int i = 0; i < per_digit; ++i) {
            auto rng = derive_rng(seed, static_cast<std::uint64_t>(d) + 100, i);
            pool.glyphs[d].push_back(detail::render_synthetic_glyph(d, rng));
        }
    }
    return pool;
}

// ---------------------------------------------------------------------------
// Collage composition.

/// One placed object: where it landed and what it was. The generator's
/// internal ledger; label soundness checks compare against it.
struct Placement {
    int class_index = 0;
    int x = 0, y = 0, w = 0, h = 0;  // bounding box (glyph frame) on the canvas
    int glyph_index = -1;            // index within the split partition; -1 for shapes
};

struct CollageResult {
    Image image;
    std::vector<Placement> placements;
};

namespace detail {

inline bool boxes_intersect(const Placement& a, const Placement& b) {
    return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
}

inline bool box_contains(const Placement& outer, const Placement& inner) {
    return outer.x <= inner.x && outer.y <= inner.y && outer.x + outer.w >= inner.x + inner.w &&
           outer.y + outer.h >= inner.y + inner.h;
}

}  // namespace detail

inline constexpr int kPlaceAttempts = 1000;
inline constexpr int kPlaceRestarts = 10;

/// Random collage for one label: N_i glyphs per class drawn from the chosen
/// partition, composited by element-wise summation with clipping at 255.
/// Non-occlusion variants keep glyph bounding boxes pairwise disjoint via
/// rejection sampling.
inline CollageResult compose_collage(const DatasetSpec& spec, const CountLabel& label,
                                     const DigitPool& pool, bool test_split,
                                     std::mt19937_64& rng) {
    spec.validate();
    if (spec.is_shapes()) throw ConfigError("compose_collage handles MNIST variants only");
    if (static_cast<int>(label.counts.size()) != spec.classes())
        throw ConfigError("label class count does not match spec");
    for (int c : label.counts)
        if (c < 0 || c > spec.l_max) throw ConfigError("label count outside [0, L_max]");

    for (int restart = 0; restart < kPlaceRestarts; ++restart) {
        CollageResult result;
        result.image = Image(spec.canvas, spec.canvas, 1);
        bool failed = false;
        for (std::size_t cls = 0; cls < label.counts.size() && !failed; ++cls) {
            int digit = spec.class_digits[cls];
            int partition = test_split ? pool.test_count(digit) : pool.train_count;
            if (partition <= 0) throw ConfigError("empty glyph partition for digit " + std::to_string(digit));
            for (int n = 0; n < label.counts[cls] && !failed; ++n) {
                int gi = static_cast<int>(uniform_int(rng, 0, partition - 1));
                const Image& raw = test_split ? pool.test_glyph(digit, gi) : pool.train_glyph(digit, gi);
                Image glyph = raw;
                if (spec.glyph_size > 0)
                    glyph = scale_bicubic(glyph, spec.glyph_size, spec.glyph_size);
                if (spec.scale_min != 1.0 || spec.scale_max != 1.0) {
                    double s = uniform_real(rng, spec.scale_min, spec.scale_max);
                    int w = std::max(4, static_cast<int>(std::lround(glyph.width * s)));
                    int h = std::max(4, static_cast<int>(std::lround(glyph.height * s)));
                    glyph = scale_bicubic(glyph, w, h);
                }
                if (glyph.width > spec.canvas || glyph.height > spec.canvas)
                    throw GenerationError("glyph larger than canvas");

                Placement p;
                p.class_index = static_cast<int>(cls);
                p.w = glyph.width;
                p.h = glyph.height;
                p.glyph_index = gi;
                bool placed = false;
                for (int attempt = 0; attempt < kPlaceAttempts; ++attempt) {
                    p.x = static_cast<int>(uniform_int(rng, 0, spec.canvas - glyph.width));
                    p.y = static_cast<int>(uniform_int(rng, 0, spec.canvas - glyph.height));
                    bool clash = false;
                    if (!spec.occlusion) {
                        // Inflate by one pixel: disjoint boxes never touch,
                        // so objects stay separable components.
                        Placement infl = p;
                        infl.x -= 1;
                        infl.y -= 1;
                        infl.w += 2;
                        infl.h += 2;
                        for (const Placement& q : result.placements)
                            if (detail::boxes_intersect(infl, q)) {
                                clash = true;
                                break;
                            }
                    }
                    if (!clash) {
                        placed = true;
                        break;
                    }
                }
                if (!placed) {
                    failed = true;
                    break;
                }
                composite_add(result.image, glyph, p.x, p.y);
                result.placements.push_back(p);
            }
        }
        if (!failed) return result;
    }
    throw GenerationError("could not place glyphs after " + std::to_string(kPlaceRestarts) +
                          " restarts (label too dense for canvas?)");
}

// ---------------------------------------------------------------------------
// Procedural RGB shapes (discs and triangles) on gradient backgrounds.
// Partial bounding-box overlap is allowed, full containment is rejected.

namespace detail {

struct ShapeDesc {
    int kind;  // 0 disc, 1 triangle
    double cx, cy, radius, angle;
    std::array<std::uint8_t, 3> color;
};

inline double shape_coverage(const ShapeDesc& s, double px, double py) {
    // 4x4 supersampled coverage in [0,1].
    int hit = 0;
    for (int sy = 0; sy < 4; ++sy)
        for (int sx = 0; sx < 4; ++sx) {
            double x = px + (sx + 0.5) / 4.0, y = py + (sy + 0.5) / 4.0;
            double dx = x - s.cx, dy = y - s.cy;
            if (s.kind == 0) {
                if (dx * dx + dy * dy <= s.radius * s.radius) ++hit;
            } else {
                // Triangle as three half-plane tests on rotated vertices.
                bool inside = true;
                double prev_x = 0, prev_y = 0;
                for (int v = 0; v <= 3; ++v) {
                    double a = s.angle + v * 2.0 * 3.14159265358979323846 / 3.0;
                    double vx = s.cx + s.radius * std::cos(a);
                    double vy = s.cy + s.radius * std::sin(a);
                    if (v > 0) {
                        double cross = (vx - prev_x) * (y - prev_y) - (vy - prev_y) * (x - prev_x);
                        if (cross < 0) {
                            inside = false;
                            break;
                        }
                    }
                    prev_x = vx;
                    prev_y = vy;
                }
                if (inside) ++hit;
            }
        }
    return hit / 16.0;
}

inline Image gradient_background(int canvas, std::mt19937_64& rng) {
    // Small palette of two-color gradients.
    static const std::array<std::array<std::uint8_t, 6>, 5> palette = {{
        {30, 40, 60, 90, 110, 140},
        {60, 30, 30, 140, 90, 80},
        {35, 55, 35, 100, 140, 100},
        {50, 50, 70, 130, 120, 150},
        {25, 25, 25, 95, 95, 95},
    }};
    const auto& p = palette[static_cast<std::size_t>(uniform_int(rng, 0, palette.size() - 1))];
    bool horizontal = uniform_int(rng, 0, 1) == 1;
    Image bg(canvas, canvas, 3);
    for (int y = 0; y < canvas; ++y)
        for (int x = 0; x < canvas; ++x) {
            double t = horizontal ? double(x) / (canvas - 1) : double(y) / (canvas - 1);
            for (int c = 0; c < 3; ++c)
                bg.at(y, x, c) = static_cast<std::uint8_t>(std::lround(p[c] * (1 - t) + p[c + 3] * t));
        }
    return bg;
}

}  // namespace detail

/// Shapes analogue of compose_collage. Class 0 is discs; class 1 (SHAPES-2)
/// is triangles.
inline CollageResult compose_shapes(const DatasetSpec& spec, const CountLabel& label,
                                    std::mt19937_64& rng) {
    spec.validate();
    if (!spec.is_shapes()) throw ConfigError("compose_shapes handles SHAPES variants only");
    if (static_cast<int>(label.counts.size()) != spec.classes())
        throw ConfigError("label class count does not match spec");

    const double rmin = spec.canvas * 0.05, rmax = spec.canvas * 0.12;
    for (int restart = 0; restart < kPlaceRestarts; ++restart) {
        CollageResult result;
        result.image = detail::gradient_background(spec.canvas, rng);
        std::vector<detail::ShapeDesc> shapes;
        bool failed = false;
        for (std::size_t cls = 0; cls < label.counts.size() && !failed; ++cls) {
            for (int n = 0; n < label.counts[cls] && !failed; ++n) {
                detail::ShapeDesc s;
                s.kind = static_cast<int>(cls);
                s.radius = uniform_real(rng, rmin, rmax);
                s.angle = uniform_real(rng, 0.0, 6.28318530717958648);
                // Color jitter: discs warm, triangles cool, both clearly
                // brighter than the background palette.
                if (s.kind == 0) {
                    s.color = {static_cast<std::uint8_t>(uniform_int(rng, 190, 255)),
                               static_cast<std::uint8_t>(uniform_int(rng, 140, 220)),
                               static_cast<std::uint8_t>(uniform_int(rng, 0, 80))};
                } else {
                    s.color = {static_cast<std::uint8_t>(uniform_int(rng, 0, 80)),
                               static_cast<std::uint8_t>(uniform_int(rng, 150, 230)),
                               static_cast<std::uint8_t>(uniform_int(rng, 190, 255))};
                }
                Placement p;
                p.class_index = static_cast<int>(cls);
                bool placed = false;
                for (int attempt = 0; attempt < kPlaceAttempts; ++attempt) {
                    double r = s.radius;
                    s.cx = uniform_real(rng, r, spec.canvas - r);
                    s.cy = uniform_real(rng, r, spec.canvas - r);
                    p.x = static_cast<int>(std::floor(s.cx - r));
                    p.y = static_cast<int>(std::floor(s.cy - r));
                    p.w = static_cast<int>(std::ceil(2 * r));
                    p.h = p.w;
                    bool clash = false;
                    for (const Placement& q : result.placements)
                        if (detail::box_contains(p, q) || detail::box_contains(q, p)) {
                            clash = true;
                            break;
                        }
                    if (!clash) {
                        placed = true;
                        break;
                    }
                }
                if (!placed) {
                    failed = true;
                    break;
                }
                shapes.push_back(s);
                result.placements.push_back(p);
            }
        }
        if (failed) continue;
        // Paint in placement order; later shapes occlude earlier ones.
        for (const auto& s : shapes) {
            int x0 = std::max(0, static_cast<int>(std::floor(s.cx - s.radius)) - 1);
            int y0 = std::max(0, static_cast<int>(std::floor(s.cy - s.radius)) - 1);
            int x1 = std::min(spec.canvas - 1, static_cast<int>(std::ceil(s.cx + s.radius)) + 1);
            int y1 = std::min(spec.canvas - 1, static_cast<int>(std::ceil(s.cy + s.radius)) + 1);
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    double cov = detail::shape_coverage(s, x, y);
                    if (cov <= 0.0) continue;
                    for (int c = 0; c < 3; ++c) {
                        double v = result.image.at(y, x, c) * (1 - cov) + s.color[c] * cov;
                        result.image.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v));
                    }
                }
        }
        return result;
    }
    throw GenerationError("could not place shapes after " + std::to_string(kPlaceRestarts) +
                          " restarts");
}

// ---------------------------------------------------------------------------
// On-disk dataset: PNG images plus one JSON label file.

struct DatasetEntry {
    std::string file;
    std::string split;  // "train" or "test"
    CountLabel label;
    std::vector<Placement> placements;  // generator ledger, not serialized
};

struct DatasetManifest {
    DatasetSpec spec;
    std::vector<DatasetEntry> entries;
};

namespace detail {

inline nlohmann::json spec_to_json(const DatasetSpec& spec) {
    nlohmann::json j;
    j["variant"] = variant_name(spec.variant);
    j["classes"] = spec.class_names();
    j["l_max"] = spec.l_max;
    j["canvas"] = spec.canvas;
    j["occlusion"] = spec.occlusion;
    j["scale_min"] = spec.scale_min;
    j["scale_max"] = spec.scale_max;
    j["glyph_size"] = spec.glyph_size;
    j["train_examples"] = spec.train_examples;
    j["test_examples"] = spec.test_examples;
    j["seed"] = spec.seed;
    if (!spec.is_shapes()) j["class_digits"] = spec.class_digits;
    return j;
}

inline DatasetSpec spec_from_json(const nlohmann::json& j) {
    DatasetSpec spec = DatasetSpec::variant_defaults(variant_from_name(j.at("variant")));
    spec.l_max = j.at("l_max");
    spec.canvas = j.at("canvas");
    spec.occlusion = j.at("occlusion");
    spec.scale_min = j.at("scale_min");
    spec.scale_max = j.at("scale_max");
    spec.glyph_size = j.at("glyph_size");
    spec.train_examples = j.at("train_examples");
    spec.test_examples = j.at("test_examples");
    spec.seed = j.at("seed");
    if (j.contains("class_digits")) spec.class_digits = j.at("class_digits").get<std::vector<int>>();
    return spec;
}

template <typename ComposeFn>
DatasetManifest generate_common(const DatasetSpec& spec, const std::string& out_dir,
                                ComposeFn&& compose) {
    spec.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create dataset directory " + out_dir + ": " + ec.message());

    DatasetManifest manifest;
    manifest.spec = spec;
    auto names = spec.class_names();
    nlohmann::json images = nlohmann::json::array();

    for (int split = 0; split < 2; ++split) {
        bool test_split = split == 1;
        int count = test_split ? spec.test_examples : spec.train_examples;
        for (int i = 0; i < count; ++i) {
            auto rng = derive_rng(spec.seed, test_split ? 2 : 1, i);
            CountLabel label;
            CollageResult collage;
            // Shapes packing may reject dense labels; draw another.
            for (int attempt = 0;; ++attempt) {
                label = sample_label(spec, rng);
                try {
                    collage = compose(spec, label, test_split, rng);
                    break;
                } catch (const GenerationError&) {
                    if (attempt >= 20) throw;
                }
            }
            char name[64];
            std::snprintf(name, sizeof(name), "%s_%05d.png", test_split ? "test" : "train", i);
            write_png((fs::path(out_dir) / name).string(), collage.image);

            DatasetEntry entry;
            entry.file = name;
            entry.split = test_split ? "test" : "train";
            entry.label = label;
            entry.placements = std::move(collage.placements);
            nlohmann::json je;
            je["file"] = entry.file;
            je["split"] = entry.split;
            nlohmann::json counts;
            for (std::size_t c = 0; c < names.size(); ++c) counts[names[c]] = label.counts[c];
            je["counts"] = counts;
            images.push_back(je);
            manifest.entries.push_back(std::move(entry));
        }
    }

    nlohmann::json root;
    root["images"] = images;
    root["spec"] = spec_to_json(spec);
    std::ofstream os(fs::path(out_dir) / "labels.json");
    if (!os) throw IoError("cannot write labels.json in " + out_dir);
    os << root.dump(2) << "\n";
    if (!os) throw IoError("write failed for labels.json in " + out_dir);
    return manifest;
}

}  // namespace detail

/// Generates a full MNIST-style dataset on disk and returns the ledger.
inline DatasetManifest generate_dataset(const DatasetSpec& spec, const DigitPool& pool,
                                        const std::string& out_dir) {
    if (spec.is_shapes()) throw ConfigError("use generate_shapes for SHAPES variants");
    return detail::generate_common(
        spec, out_dir, [&pool](const DatasetSpec& s, const CountLabel& label, bool test_split,
                               std::mt19937_64& rng) {
            return compose_collage(s, label, pool, test_split, rng);
        });
}

/// Generates a SHAPES dataset (procedural RGB discs/triangles).
inline DatasetManifest generate_shapes(const DatasetSpec& spec, const std::string& out_dir) {
    if (!spec.is_shapes()) throw ConfigError("generate_shapes handles SHAPES variants only");
    return detail::generate_common(
        spec, out_dir, [](const DatasetSpec& s, const CountLabel& label, bool, std::mt19937_64& rng) {
            return compose_shapes(s, label, rng);
        });
}

}  // namespace ednn
