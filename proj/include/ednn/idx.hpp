#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ednn/image.hpp"

namespace ednn {

/// Per-digit glyph collections with a fixed train/test partition.
/// The MNIST-derived pool holds exactly 4800 glyphs per digit, the first
/// 4320 (file order) for training and the remaining 480 for testing.
struct DigitPool {
    static constexpr int kPerDigit = 4800;
    static constexpr int kTrainPerDigit = 4320;

    std::array<std::vector<Image>, 10> glyphs;
    int train_count = kTrainPerDigit;  // per digit; indices >= this are test glyphs

    int test_count(int digit) const { return static_cast<int>(glyphs[digit].size()) - train_count; }

    const Image& train_glyph(int digit, int index) const { return glyphs[digit][index]; }
    const Image& test_glyph(int digit, int index) const {
        return glyphs[digit][train_count + index];
    }
};

namespace detail {

inline std::uint32_t read_be32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (is.gcount() != 4) throw FormatError(path + ": truncated IDX header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

}  // namespace detail

/// Parses the big-endian IDX pair (magic 2051 images, 2049 labels) and
/// groups glyphs by digit. Digits with more than 4800 examples are
/// truncated to 4800; fewer is an error because the fixed 4320/480
/// partition would be ill-defined.
inline DigitPool load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw IoError("cannot open " + images_path);
    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw IoError("cannot open " + labels_path);

    std::uint32_t magic = detail::read_be32(imgs, images_path);
    if (magic != 2051)
        throw FormatError(images_path + ": bad IDX image magic " + std::to_string(magic));
    std::uint32_t count = detail::read_be32(imgs, images_path);
    std::uint32_t rows = detail::read_be32(imgs, images_path);
    std::uint32_t cols = detail::read_be32(imgs, images_path);
    if (rows == 0 || cols == 0 || rows > 1024 || cols > 1024)
        throw FormatError(images_path + ": implausible glyph extents");

    std::uint32_t lmagic = detail::read_be32(labs, labels_path);
    if (lmagic != 2049)
        throw FormatError(labels_path + ": bad IDX label magic " + std::to_string(lmagic));
    std::uint32_t lcount = detail::read_be32(labs, labels_path);
    if (lcount != count)
        throw FormatError("IDX image/label counts differ: " + std::to_string(count) + " vs " +
                          std::to_string(lcount));

    DigitPool pool;
    std::vector<std::uint8_t> buf(std::size_t(rows) * cols);
    for (std::uint32_t i = 0; i < count; ++i) {
        imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(imgs.gcount()) != buf.size())
            throw FormatError(images_path + ": truncated image data at record " + std::to_string(i));
        char label;
        if (!labs.read(&label, 1))
            throw FormatError(labels_path + ": truncated label data at record " + std::to_string(i));
        int digit = static_cast<unsigned char>(label);
        if (digit > 9) throw FormatError(labels_path + ": label " + std::to_string(digit) + " out of range");
        auto& bucket = pool.glyphs[digit];
        if (bucket.size() >= DigitPool::kPerDigit) continue;
        Image glyph(static_cast<int>(cols), static_cast<int>(rows), 1);
        glyph.pixels.assign(buf.begin(), buf.end());
        bucket.push_back(std::move(glyph));
    }
    for (int d = 0; d < 10; ++d)
        if (pool.glyphs[d].size() < DigitPool::kPerDigit)
            throw FormatError("digit " + std::to_string(d) + " has only " +
                              std::to_string(pool.glyphs[d].size()) + " examples, need " +
                              std::to_string(DigitPool::kPerDigit));
    pool.train_count = DigitPool::kTrainPerDigit;
    return pool;
}

}  // namespace ednn
