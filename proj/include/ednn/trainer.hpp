#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>

#include "ednn/checkpoint.hpp"
#include "ednn/datagen.hpp"
#include "ednn/model.hpp"

namespace ednn {

// ---------------------------------------------------------------------------
// On-disk dataset loader (PNG images + labels.json).

struct LoadedDataset {
    DatasetSpec spec;
    std::vector<std::string> class_names;
    std::vector<Image> train_images, test_images;
    std::vector<std::vector<int>> train_labels, test_labels;  // per class counts
};

inline LoadedDataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream is(fs::path(dir) / "labels.json");
    if (!is) throw IoError("cannot open " + dir + "/labels.json");
    nlohmann::json root;
    try {
        is >> root;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(dir + "/labels.json: " + e.what());
    }

    LoadedDataset ds;
    ds.spec = detail::spec_from_json(root.at("spec"));
    ds.class_names = root.at("spec").at("classes").get<std::vector<std::string>>();
    for (const auto& je : root.at("images")) {
        std::string file = je.at("file");
        std::string split = je.at("split");
        std::vector<int> counts;
        for (const auto& name : ds.class_names) counts.push_back(je.at("counts").at(name));
        Image img = read_png((fs::path(dir) / file).string());
        if (split == "train") {
            ds.train_images.push_back(std::move(img));
            ds.train_labels.push_back(std::move(counts));
        } else if (split == "test") {
            ds.test_images.push_back(std::move(img));
            ds.test_labels.push_back(std::move(counts));
        } else {
            throw FormatError(dir + "/labels.json: unknown split '" + split + "' for " + file);
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Augmentation. Both transforms leave the count label unchanged.

/// Rotation by k quarter turns; the label is invariant because counting is
/// position-free.
inline Image augment_rotate90(const Image& img, int k) { return rotate90(img, k); }

/// Shrinks the content by factor s in (0, 1] and re-embeds it top-left in a
/// zero canvas of the original extents, so batch geometry is unchanged.
inline Image augment_downscale(const Image& img, double s) {
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("downscale factor must be in (0, 1]");
    if (s == 1.0) return img;
    int w = std::max(1, static_cast<int>(std::lround(img.width * s)));
    int h = std::max(1, static_cast<int>(std::lround(img.height * s)));
    Image small = scale_bicubic(img, w, h);
    Image out(img.width, img.height, img.channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = small.at(y, x, c);
    return out;
}

// ---------------------------------------------------------------------------
// Training loop.

struct TrainConfig {
    double lr = 1e-4;
    double loss_threshold = 1e-3;
    long epochs_max = 500;
    int batch_size = 32;
    std::uint64_t seed = 0;
    bool augment_rotate = false;
    bool augment_downscale = false;
    double downscale_min = 0.7, downscale_max = 1.0;
};

struct EpochStat {
    long epoch;
    double loss;
    double seconds;
};

template <typename T>
struct TrainResult {
    ParamSet<T> params;
    long epochs = 0;
    double final_loss = 0.0;
    bool converged = false;
    bool diverged = false;  // NaN/Inf hit; params roll back to the last good epoch
    std::vector<EpochStat> log;
};

namespace detail {

inline void fisher_yates(std::vector<std::size_t>& order, std::mt19937_64& rng) {
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(rng, 0, i - 1))]);
}

}  // namespace detail

/// Minimizes MSE between predicted and labeled counts with Adam until the
/// mean epoch loss drops below the threshold or the epoch cap is reached.
/// `progress`, when set, receives each epoch's mean loss; `log_stream`, when
/// set, receives one "epoch loss seconds" line per epoch.
template <typename T>
TrainResult<T> train(const LoadedDataset& ds, const EDNNConfig& cfg, const TrainConfig& tc,
                     std::ostream* log_stream = nullptr,
                     const ParamSet<T>* initial = nullptr, long first_epoch = 0) {
    cfg.validate();
    if (ds.train_images.empty()) throw ConfigError("dataset has no training images");
    if (tc.batch_size < 1 || tc.epochs_max < 0) throw ConfigError("bad training config");
    if (static_cast<int>(ds.class_names.size()) != cfg.classes)
        throw ConfigError("dataset has " + std::to_string(ds.class_names.size()) +
                          " classes, model expects " + std::to_string(cfg.classes));

    // Pad once; training requires uniform geometry across the whole set.
    std::vector<Image> images;
    images.reserve(ds.train_images.size());
    for (const Image& img : ds.train_images) images.push_back(pad_to_multiple(img, cfg.focus));
    for (const Image& img : images)
        if (img.width != images[0].width || img.height != images[0].height ||
            img.channels != images[0].channels)
            throw ShapeError("training images have mixed extents");
    if (images[0].channels != cfg.channels)
        throw ConfigError("dataset channel count does not match model config");

    TrainResult<T> result;
    result.params = initial ? *initial : build<T>(cfg, tc.seed);
    check_params_match(cfg, result.params);
    AdamConfig adam;
    adam.lr = tc.lr;

    const std::size_t n = images.size();
    const std::size_t bs = std::min<std::size_t>(tc.batch_size, n);
    TileGrid grid = extract_tiles<T>(std::span<const Image>(images.data(), 1), cfg.focus,
                                     cfg.context)
                        .grid;
    // One persistent graph per batch geometry (full batches plus remainder).
    TrainGraph<T> full_graph(cfg, bs, grid.tile_count());
    std::optional<TrainGraph<T>> tail_graph;
    if (n % bs != 0) tail_graph.emplace(cfg, n % bs, grid.tile_count());

    ParamSet<T> snapshot = result.params;  // last epoch known finite
    std::vector<std::size_t> order(n);
    std::vector<Image> batch_imgs;
    result.final_loss = std::numeric_limits<double>::infinity();

    for (long epoch = first_epoch; epoch < tc.epochs_max; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        auto shuffle_rng = derive_rng(tc.seed, 3, static_cast<std::uint64_t>(epoch));
        detail::fisher_yates(order, shuffle_rng);

        double loss_sum = 0.0;
        bool diverged = false;
        for (std::size_t start = 0; start < n && !diverged; start += bs) {
            std::size_t cur = std::min(bs, n - start);
            batch_imgs.clear();
            Tensor<T> labels({cur, std::size_t(cfg.classes)});
            for (std::size_t b = 0; b < cur; ++b) {
                std::size_t idx = order[start + b];
                Image img = images[idx];
                if (tc.augment_rotate || tc.augment_downscale) {
                    auto arng = derive_rng(tc.seed, 4 + static_cast<std::uint64_t>(epoch), idx);
                    if (tc.augment_rotate) {
                        if (img.width != img.height)
                            throw ConfigError("rotation augmentation requires square images");
                        img = augment_rotate90(img, static_cast<int>(uniform_int(arng, 0, 3)));
                    }
                    if (tc.augment_downscale)
                        img = augment_downscale(img, uniform_real(arng, tc.downscale_min, tc.downscale_max));
                }
                batch_imgs.push_back(std::move(img));
                for (int c = 0; c < cfg.classes; ++c)
                    labels[b * cfg.classes + c] = static_cast<T>(ds.train_labels[idx][c]);
            }
            TileBatch<T> tiles = extract_tiles<T>(std::span<const Image>(batch_imgs), cfg.focus,
                                                  cfg.context);
            TrainGraph<T>& g = cur == bs ? full_graph : *tail_graph;
            try {
                loss_sum += static_cast<double>(g.step(tiles, labels, result.params, adam)) * cur;
            } catch (const DivergenceError&) {
                diverged = true;
            }
        }
        if (diverged) {
            result.params = snapshot;
            result.diverged = true;
            break;
        }

        double mean_loss = loss_sum / n;
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.epochs = epoch + 1;
        result.final_loss = mean_loss;
        result.log.push_back({epoch, mean_loss, seconds});
        if (log_stream)
            *log_stream << epoch << " " << detail::format_double(mean_loss) << " " << seconds
                        << "\n" << std::flush;
        snapshot = result.params;
        if (mean_loss < tc.loss_threshold) {
            result.converged = true;
            break;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation.

/// Per-class accuracy and prediction-error histograms. A prediction is
/// correct iff |prediction - label| < 0.5 strictly; an error of exactly 0.5
/// scores as incorrect.
struct EvalReport {
    std::vector<std::string> class_names;
    std::vector<double> accuracy;                // per class, in [0, 1]
    std::vector<std::vector<long>> histograms;   // per class, 0.1-wide bins over [-l_max, l_max]
    int l_max = 0;
    long examples = 0;

    static constexpr double kBinWidth = 0.1;
    int bins() const { return static_cast<int>(std::lround(2 * l_max / kBinWidth)); }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["examples"] = examples;
        j["l_max"] = l_max;
        j["bin_width"] = kBinWidth;
        nlohmann::json per_class = nlohmann::json::array();
        for (std::size_t c = 0; c < class_names.size(); ++c) {
            nlohmann::json jc;
            jc["class"] = class_names[c];
            jc["accuracy"] = accuracy[c];
            jc["error_histogram"] = histograms[c];
            per_class.push_back(jc);
        }
        j["classes"] = per_class;
        return j;
    }
};

template <typename T>
EvalReport evaluate(std::span<const Image> images, const std::vector<std::vector<int>>& labels,
                    const ParamSet<T>& params, const EDNNConfig& cfg, int l_max,
                    const std::vector<std::string>& class_names) {
    if (images.size() != labels.size()) throw ConfigError("evaluate: image/label count mismatch");
    if (static_cast<int>(class_names.size()) != cfg.classes)
        throw ConfigError("evaluate: class name count does not match config");
    EvalReport report;
    report.class_names = class_names;
    report.l_max = l_max;
    report.examples = static_cast<long>(images.size());
    report.accuracy.assign(cfg.classes, 0.0);
    report.histograms.assign(cfg.classes, std::vector<long>(report.bins(), 0));
    if (images.empty()) return report;

    std::vector<long> correct(cfg.classes, 0);
    std::vector<Image> padded;
    const std::size_t eval_chunk = 16;  // bounds peak tile memory
    for (std::size_t start = 0; start < images.size(); start += eval_chunk) {
        std::size_t cur = std::min(eval_chunk, images.size() - start);
        padded.clear();
        for (std::size_t i = 0; i < cur; ++i)
            padded.push_back(pad_to_multiple(images[start + i], cfg.focus));
        Prediction<T> pred = predict(std::span<const Image>(padded), params, cfg);
        for (std::size_t i = 0; i < cur; ++i)
            for (int c = 0; c < cfg.classes; ++c) {
                double err = static_cast<double>(pred.counts[i * cfg.classes + c]) -
                             labels[start + i][c];
                if (std::fabs(err) < 0.5) ++correct[c];
                int bin = static_cast<int>(std::floor((err + l_max) / EvalReport::kBinWidth));
                bin = std::clamp(bin, 0, report.bins() - 1);
                ++report.histograms[c][bin];
            }
    }
    for (int c = 0; c < cfg.classes; ++c)
        report.accuracy[c] = static_cast<double>(correct[c]) / static_cast<double>(images.size());
    return report;
}

}  // namespace ednn
