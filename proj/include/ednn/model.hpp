#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "ednn/adam.hpp"
#include "ednn/graph.hpp"
#include "ednn/tiler.hpp"

namespace ednn {

/// Network hyperparameters. The conv depth follows from the tile side:
/// N = floor(log2(f+2c) - 1), each layer halving the spatial extent under
/// same padding until the remainder is flattened.
struct EDNNConfig {
    int focus = 8;
    int context = 8;
    int channels = 1;
    int classes = 1;
    int kernels = 64;
    int kernel_size = 4;
    int stride = 2;
    int dense_width = 1024;

    int tile_side() const { return focus + 2 * context; }

    int conv_layers() const {
        int side = tile_side();
        if (side < 2) return 0;
        return static_cast<int>(std::bit_width(static_cast<unsigned>(side))) - 2;
    }

    /// Spatial extents through the conv stack: tile side, then repeated
    /// ceil-division by the stride.
    std::vector<int> spatial_chain() const {
        std::vector<int> chain{tile_side()};
        for (int i = 0; i < conv_layers(); ++i)
            chain.push_back((chain.back() + stride - 1) / stride);
        return chain;
    }

    int flatten_size() const {
        int s = spatial_chain().back();
        return s * s * kernels;
    }

    void validate() const {
        if (focus < 1) throw ConfigError("focus must be >= 1");
        if (context < 0) throw ConfigError("context must be >= 0");
        if (channels != 1 && channels != 3) throw ConfigError("channels must be 1 or 3");
        if (classes < 1) throw ConfigError("classes must be >= 1");
        if (kernels < 1 || kernel_size < 1 || stride < 1 || dense_width < 1)
            throw ConfigError("network sizes must be positive");
        if (conv_layers() < 1)
            throw ConfigError("tile side " + std::to_string(tile_side()) +
                              " yields no conv layers; increase focus or context");
        if (spatial_chain().back() < 1)
            throw ConfigError("conv stack collapses below one pixel");
    }

    bool operator==(const EDNNConfig&) const = default;
};

/// Parameter names in build order; checkpoint and graph wiring both rely on
/// this ordering.
inline std::vector<std::string> param_names(const EDNNConfig& cfg) {
    std::vector<std::string> names;
    for (int i = 0; i < cfg.conv_layers(); ++i) {
        names.push_back("conv" + std::to_string(i) + "/kernels");
        names.push_back("conv" + std::to_string(i) + "/bias");
    }
    names.push_back("dense/weights");
    names.push_back("dense/bias");
    names.push_back("output/weights");
    names.push_back("output/bias");
    return names;
}

inline std::vector<Shape> param_shapes(const EDNNConfig& cfg) {
    std::vector<Shape> shapes;
    const auto k = std::size_t(cfg.kernel_size);
    const auto kk = std::size_t(cfg.kernels);
    std::size_t cin = std::size_t(cfg.channels);
    for (int i = 0; i < cfg.conv_layers(); ++i) {
        shapes.push_back({k, k, cin, kk});
        shapes.push_back({kk});
        cin = kk;
    }
    shapes.push_back({std::size_t(cfg.flatten_size()), std::size_t(cfg.dense_width)});
    shapes.push_back({std::size_t(cfg.dense_width)});
    shapes.push_back({std::size_t(cfg.dense_width), std::size_t(cfg.classes)});
    shapes.push_back({std::size_t(cfg.classes)});
    return shapes;
}

/// Fresh parameters: fan-in-scaled normal weights (std = sqrt(2/fan_in)),
/// zero biases. Deterministic in the seed.
template <typename T>
ParamSet<T> build(const EDNNConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    ParamSet<T> params;
    auto names = param_names(cfg);
    auto shapes = param_shapes(cfg);
    for (std::size_t i = 0; i < names.size(); ++i) {
        bool is_bias = shapes[i].size() == 1;
        if (is_bias) {
            params.add(names[i], Tensor<T>(shapes[i]));
        } else {
            std::size_t fan_in = shape_numel(shapes[i]) / shapes[i].back();
            T stddev = static_cast<T>(std::sqrt(2.0 / static_cast<double>(fan_in)));
            params.add(names[i], Tensor<T>::randn(shapes[i], stddev, rng));
        }
    }
    return params;
}

/// Raises ShapeError naming the first tensor whose stored shape does not
/// match what cfg requires.
template <typename T>
void check_params_match(const EDNNConfig& cfg, const ParamSet<T>& params) {
    auto names = param_names(cfg);
    auto shapes = param_shapes(cfg);
    if (params.entries.size() != names.size())
        throw ShapeError("parameter count " + std::to_string(params.entries.size()) +
                         " does not match config (" + std::to_string(names.size()) + " expected)");
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (params.entries[i].name != names[i])
            throw ShapeError("parameter " + params.entries[i].name + " where " + names[i] +
                             " expected");
        if (params.entries[i].value.shape != shapes[i])
            throw ShapeError("tensor " + names[i] + " has shape " +
                             shape_str(params.entries[i].value.shape) + ", config requires " +
                             shape_str(shapes[i]));
    }
}

namespace detail {

template <typename T>
struct ModelNodes {
    typename Graph<T>::NodeRef tiles;
    typename Graph<T>::NodeRef contrib;  // [n_tiles, l], pre-summation
    std::vector<typename Graph<T>::NodeRef> params;  // build order
};

/// Wires the shared per-tile network: conv/ReLU stack, flatten, ReLU dense
/// layer, linear output head (contributions may go negative, so no
/// activation after the head).
template <typename T>
ModelNodes<T> build_model_graph(Graph<T>& g, const EDNNConfig& cfg, std::size_t n_tiles) {
    cfg.validate();
    ModelNodes<T> nodes;
    const auto side = std::size_t(cfg.tile_side());
    nodes.tiles = g.input({n_tiles, side, side, std::size_t(cfg.channels)});
    auto shapes = param_shapes(cfg);
    for (const Shape& s : shapes) nodes.params.push_back(g.param(s));

    auto x = nodes.tiles;
    std::size_t p = 0;
    for (int i = 0; i < cfg.conv_layers(); ++i) {
        auto w = nodes.params[p++], b = nodes.params[p++];
        x = g.relu(g.conv2d(x, w, b, cfg.stride));
    }
    x = g.relu(g.dense(x, nodes.params[p], nodes.params[p + 1]));
    p += 2;
    nodes.contrib = g.dense(x, nodes.params[p], nodes.params[p + 1]);
    return nodes;
}

template <typename T>
void load_params(Graph<T>& g, const ModelNodes<T>& nodes, const ParamSet<T>& params) {
    for (std::size_t i = 0; i < nodes.params.size(); ++i)
        g.val(nodes.params[i]).data = params.entries[i].value.data;
}

/// Fills the tile input with pixel values normalized to [0, 1].
template <typename T>
void load_tiles(Graph<T>& g, const ModelNodes<T>& nodes, const TileBatch<T>& tiles,
                std::size_t first_tile, std::size_t count) {
    Tensor<T>& in = g.val(nodes.tiles);
    const std::size_t tile_len = in.size() / in.dim(0);
    const T* src = tiles.data.ptr() + first_tile * tile_len;
    for (std::size_t i = 0; i < count * tile_len; ++i) in[i] = src[i] / T(255);
}

template <typename T>
void check_tile_side(const EDNNConfig& cfg, const TileBatch<T>& tiles) {
    if (static_cast<int>(tiles.data.dim(1)) != cfg.tile_side() ||
        static_cast<int>(tiles.data.dim(3)) != cfg.channels)
        throw ShapeError("tile batch " + shape_str(tiles.data.shape) +
                         " does not match config tile side " + std::to_string(cfg.tile_side()) +
                         " x " + std::to_string(cfg.channels) + " channels");
}

}  // namespace detail

/// Applies the shared network to every tile. Output [N_batch*N_tiles, l].
template <typename T>
Tensor<T> forward_tiles(const TileBatch<T>& tiles, const ParamSet<T>& params,
                        const EDNNConfig& cfg) {
    detail::check_tile_side(cfg, tiles);
    check_params_match(cfg, params);
    const std::size_t total = tiles.data.dim(0);
    // Bounded graph size; large inputs just mean more chunks.
    const std::size_t chunk = total < 4096 ? total : 4096;
    Tensor<T> out({total, std::size_t(cfg.classes)});

    Graph<T> g;
    auto nodes = detail::build_model_graph(g, cfg, chunk);
    detail::load_params(g, nodes, params);
    std::size_t done = 0;
    while (done < total) {
        std::size_t n = std::min(chunk, total - done);
        if (n != g.val(nodes.tiles).dim(0)) {
            g = Graph<T>();
            nodes = detail::build_model_graph(g, cfg, n);
            detail::load_params(g, nodes, params);
        }
        detail::load_tiles(g, nodes, tiles, done, n);
        g.forward();
        const Tensor<T>& contrib = g.val(nodes.contrib);
        std::copy(contrib.ptr(), contrib.ptr() + n * cfg.classes,
                  out.ptr() + done * cfg.classes);
        done += n;
    }
    return out;
}

template <typename T>
struct Prediction {
    Tensor<T> counts;  // [N_batch, l]
    ContributionMap<T> contribs;
};

/// Counts and per-tile contributions from one pass. Counts are the
/// order-invariant exact sum over each image's tiles, the same reduction
/// the contribution map yields when re-summed.
template <typename T>
Prediction<T> predict(std::span<const Image> images, const ParamSet<T>& params,
                      const EDNNConfig& cfg) {
    TileBatch<T> tiles = extract_tiles<T>(images, cfg.focus, cfg.context);
    Tensor<T> per_tile = forward_tiles(tiles, params, cfg);

    const std::size_t nb = images.size();
    const std::size_t nt = tiles.grid.tile_count();
    const std::size_t l = std::size_t(cfg.classes);
    Prediction<T> pred;
    pred.contribs.grid = tiles.grid;
    pred.contribs.values = Tensor<T>({nb, nt, l}, std::move(per_tile.data));
    pred.counts = Tensor<T>({nb, l});
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t j = 0; j < l; ++j) {
            ExactAccumulator acc;
            for (std::size_t t = 0; t < nt; ++t)
                acc.add(static_cast<double>(pred.contribs.values[(b * nt + t) * l + j]));
            pred.counts[b * l + j] = static_cast<T>(acc.result());
        }
    return pred;
}

/// Persistent training graph: built once per (config, batch geometry) and
/// re-filled each step.
template <typename T>
class TrainGraph {
public:
    TrainGraph(const EDNNConfig& cfg, std::size_t n_batch, std::size_t tiles_per_image)
        : cfg_(cfg), n_batch_(n_batch) {
        nodes_ = detail::build_model_graph(graph_, cfg, n_batch * tiles_per_image);
        counts_ = graph_.sum_tiles(nodes_.contrib, n_batch);
        labels_ = graph_.input({n_batch, std::size_t(cfg.classes)});
        loss_ = graph_.mse(counts_, labels_);
    }

    /// Forward + backward + one Adam step. Returns the pre-step loss.
    T step(const TileBatch<T>& tiles, const Tensor<T>& labels, ParamSet<T>& params,
           const AdamConfig& adam) {
        T loss = forward_backward(tiles, labels, params);
        if (!std::isfinite(static_cast<double>(loss)))
            throw DivergenceError("training loss is not finite");
        std::vector<Tensor<T>> grads;
        grads.reserve(nodes_.params.size());
        for (auto p : nodes_.params) grads.push_back(graph_.grad(p));
        adam_step(params, std::span<const Tensor<T>>(grads), adam);
        return loss;
    }

    /// Forward + backward without an update; gradients stay readable.
    T forward_backward(const TileBatch<T>& tiles, const Tensor<T>& labels, const ParamSet<T>& params) {
        detail::check_tile_side(cfg_, tiles);
        if (labels.shape != graph_.val(labels_).shape)
            throw ShapeError("labels " + shape_str(labels.shape) + ", expected " +
                             shape_str(graph_.val(labels_).shape));
        detail::load_params(graph_, nodes_, params);
        detail::load_tiles(graph_, nodes_, tiles, 0, tiles.data.dim(0));
        graph_.val(labels_).data = labels.data;
        graph_.forward();
        graph_.backward(loss_);
        return graph_.val(loss_)[0];
    }

    const Tensor<T>& grad(std::size_t param_index) const {
        return graph_.grad(nodes_.params[param_index]);
    }
    const Tensor<T>& counts() { return graph_.val(counts_); }
    T loss() { return graph_.val(loss_)[0]; }

private:
    EDNNConfig cfg_;
    std::size_t n_batch_;
    Graph<T> graph_;
    detail::ModelNodes<T> nodes_;
    typename Graph<T>::NodeRef counts_, labels_, loss_;
};

template <typename T>
struct StepResult {
    T loss_before;
    T loss_after;
};

/// One optimizer step on a batch of images, reporting the loss on both
/// sides of the update.
template <typename T>
StepResult<T> training_step(std::span<const Image> images, const Tensor<T>& labels,
                            ParamSet<T>& params, const EDNNConfig& cfg, const AdamConfig& adam) {
    TileBatch<T> tiles = extract_tiles<T>(images, cfg.focus, cfg.context);
    TrainGraph<T> g(cfg, images.size(), tiles.grid.tile_count());
    StepResult<T> r;
    r.loss_before = g.step(tiles, labels, params, adam);
    r.loss_after = g.forward_backward(tiles, labels, params);
    return r;
}

}  // namespace ednn
