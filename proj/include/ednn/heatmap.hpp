#pragma once

#include <ostream>

#include "ednn/image.hpp"
#include "ednn/tiler.hpp"

namespace ednn {

/// Renders one class of a density map over the (padded) input image.
/// Cells expand to f x f blocks; positive contributions blend toward red,
/// negative toward blue, scaled per class by the largest |cell|.
template <typename T>
Image render_heatmap(const Image& input, const DensityMap<T>& dm, int class_index,
                     double alpha = 0.55) {
    if (class_index < 0 || class_index >= dm.classes)
        throw BoundsError("heatmap class index out of range");
    if (input.width != dm.cols * dm.focus || input.height != dm.rows * dm.focus)
        throw ShapeError("heatmap: image extents do not match density map grid");

    double peak = 0.0;
    for (int r = 0; r < dm.rows; ++r)
        for (int c = 0; c < dm.cols; ++c)
            peak = std::max(peak, std::fabs(static_cast<double>(dm.cell(r, c, class_index))));
    if (peak == 0.0) peak = 1.0;

    Image out(input.width, input.height, 3);
    for (int y = 0; y < input.height; ++y)
        for (int x = 0; x < input.width; ++x) {
            double v = static_cast<double>(dm.cell(y / dm.focus, x / dm.focus, class_index)) / peak;
            double w = std::fabs(v) * alpha;
            double tint[3] = {v > 0 ? 255.0 : 0.0, 0.0, v > 0 ? 0.0 : 255.0};
            for (int c = 0; c < 3; ++c) {
                double base = input.at(y, x, input.channels == 3 ? c : 0);
                long q = std::lround(base * (1.0 - w) + tint[c] * w);
                out.at(y, x, c) = static_cast<std::uint8_t>(q < 0 ? 0 : (q > 255 ? 255 : q));
            }
        }
    return out;
}

/// One class of a density map as CSV: one line per focus-grid row, cells in
/// column order.
template <typename T>
void write_density_csv_class(std::ostream& os, const DensityMap<T>& dm, int class_index) {
    if (class_index < 0 || class_index >= dm.classes)
        throw BoundsError("density CSV class index out of range");
    char buf[40];
    for (int r = 0; r < dm.rows; ++r) {
        for (int c = 0; c < dm.cols; ++c) {
            std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(dm.cell(r, c, class_index)));
            os << (c ? "," : "") << buf;
        }
        os << "\n";
    }
}

/// Density map as CSV: one row per cell, columns row, col, then one value
/// per class.
template <typename T>
void write_density_csv(std::ostream& os, const DensityMap<T>& dm,
                       const std::vector<std::string>& class_names) {
    if (static_cast<int>(class_names.size()) != dm.classes)
        throw ConfigError("density CSV: class name count mismatch");
    os << "row,col";
    for (const auto& n : class_names) os << "," << n;
    os << "\n";
    char buf[40];
    for (int r = 0; r < dm.rows; ++r)
        for (int c = 0; c < dm.cols; ++c) {
            os << r << "," << c;
            for (int k = 0; k < dm.classes; ++k) {
                std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(dm.cell(r, c, k)));
                os << "," << buf;
            }
            os << "\n";
        }
}

}  // namespace ednn
