#pragma once

#include <cstddef>
#include <vector>

#include "ednn/exact_sum.hpp"
#include "ednn/kernels.hpp"
#include "ednn/tensor.hpp"

namespace ednn {

/// Reverse-mode computation graph over the layer primitives. Nodes are
/// appended in execution order; value and gradient buffers persist across
/// runs so a graph can be re-evaluated with fresh leaf contents (the
/// training loop rebuilds nothing between steps).
template <typename T>
class Graph {
public:
    struct NodeRef {
        std::size_t id;
    };

    enum class Op { Leaf, Conv2d, Dense, Relu, SumTiles, Mse };

    /// Leaf that carries no gradient (inputs, labels).
    NodeRef input(Shape shape) { return add_leaf(std::move(shape), false); }

    /// Leaf whose gradient is accumulated by backward().
    NodeRef param(Shape shape) { return add_leaf(std::move(shape), true); }

    NodeRef conv2d(NodeRef x, NodeRef w, NodeRef b, int stride) {
        const auto& xv = val(x);
        const auto& wv = val(w);
        ConvGeom g = detail::conv_check(xv, wv, val(b), stride);
        Node n;
        n.op = Op::Conv2d;
        n.inputs = {x.id, w.id, b.id};
        n.stride = stride;
        n.value = Tensor<T>({xv.dim(0), g.out_h, g.out_w, g.out_c});
        return push(std::move(n));
    }

    NodeRef dense(NodeRef x, NodeRef w, NodeRef b) {
        dense_check(val(x), val(w), val(b));
        Node n;
        n.op = Op::Dense;
        n.inputs = {x.id, w.id, b.id};
        n.value = Tensor<T>({val(x).dim(0), val(w).dim(1)});
        return push(std::move(n));
    }

    NodeRef relu(NodeRef x) {
        Node n;
        n.op = Op::Relu;
        n.inputs = {x.id};
        n.value = Tensor<T>(val(x).shape);
        return push(std::move(n));
    }

    /// [NB*NT, l] -> [NB, l], order-invariant exact reduction over tiles.
    NodeRef sum_tiles(NodeRef x, std::size_t n_batch) {
        const auto& xv = val(x);
        if (xv.rank() != 2 || xv.dim(0) % n_batch != 0)
            throw ShapeError("sum_tiles: rows of " + shape_str(xv.shape) +
                             " not divisible into " + std::to_string(n_batch) + " images");
        Node n;
        n.op = Op::SumTiles;
        n.inputs = {x.id};
        n.aux = n_batch;
        n.value = Tensor<T>({n_batch, xv.dim(1)});
        return push(std::move(n));
    }

    NodeRef mse(NodeRef pred, NodeRef labels) {
        require_same_shape(val(pred), val(labels), "mse_loss");
        Node n;
        n.op = Op::Mse;
        n.inputs = {pred.id, labels.id};
        n.value = Tensor<T>({std::size_t(1)});
        return push(std::move(n));
    }

    Tensor<T>& val(NodeRef r) { return nodes_[r.id].value; }
    const Tensor<T>& val(NodeRef r) const { return nodes_[r.id].value; }
    const Tensor<T>& grad(NodeRef r) const { return nodes_[r.id].grad; }

    /// Recomputes every non-leaf node in insertion order.
    void forward() {
        for (auto& n : nodes_) {
            switch (n.op) {
                case Op::Leaf:
                    break;
                case Op::Conv2d:
                    conv2d_forward(value_of(n.inputs[0]), value_of(n.inputs[1]),
                                   value_of(n.inputs[2]), n.stride, n.value);
                    break;
                case Op::Dense:
                    dense_forward(value_of(n.inputs[0]), value_of(n.inputs[1]),
                                  value_of(n.inputs[2]), n.value);
                    break;
                case Op::Relu:
                    relu_forward(value_of(n.inputs[0]), n.value);
                    break;
                case Op::SumTiles: {
                    const auto& x = value_of(n.inputs[0]);
                    const std::size_t nb = n.aux, l = x.dim(1), nt = x.dim(0) / nb;
                    for (std::size_t b = 0; b < nb; ++b)
                        for (std::size_t j = 0; j < l; ++j) {
                            ExactAccumulator acc;
                            for (std::size_t t = 0; t < nt; ++t)
                                acc.add(static_cast<double>(x[(b * nt + t) * l + j]));
                            n.value[b * l + j] = static_cast<T>(acc.result());
                        }
                    break;
                }
                case Op::Mse:
                    n.value[0] = mse_forward(value_of(n.inputs[0]), value_of(n.inputs[1]));
                    break;
            }
        }
    }

    /// Seeds d(root)=1 and accumulates gradients into every grad-carrying
    /// leaf reachable from it. A graph without parameters is fine: there is
    /// simply nothing to fill in.
    void backward(NodeRef root) {
        for (auto& n : nodes_)
            if (n.needs_grad) n.grad.fill(T(0));
        nodes_[root.id].grad.fill(T(1));
        for (std::size_t i = root.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.needs_grad || n.op == Op::Leaf) continue;
            backward_node(n);
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Op op = Op::Leaf;
        std::vector<std::size_t> inputs;
        int stride = 1;
        std::size_t aux = 0;
        bool needs_grad = false;
        Tensor<T> value;
        Tensor<T> grad;
    };

    Tensor<T>& value_of(std::size_t id) { return nodes_[id].value; }
    Tensor<T>* grad_of(std::size_t id) {
        return nodes_[id].needs_grad ? &nodes_[id].grad : nullptr;
    }

    NodeRef add_leaf(Shape shape, bool needs_grad) {
        Node n;
        n.op = Op::Leaf;
        n.needs_grad = needs_grad;
        n.value = Tensor<T>(std::move(shape));
        return push(std::move(n));
    }

    NodeRef push(Node n) {
        if (n.op != Op::Leaf)
            for (std::size_t in : n.inputs) n.needs_grad = n.needs_grad || nodes_[in].needs_grad;
        if (n.needs_grad) n.grad = Tensor<T>(n.value.shape);
        nodes_.push_back(std::move(n));
        return NodeRef{nodes_.size() - 1};
    }

    void backward_node(Node& n) {
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Conv2d: {
                Tensor<T>& x = value_of(n.inputs[0]);
                Tensor<T>& w = value_of(n.inputs[1]);
                Tensor<T>* dx = grad_of(n.inputs[0]);
                Tensor<T>* dw = grad_of(n.inputs[1]);
                Tensor<T>* db = grad_of(n.inputs[2]);
                if (dw && db) {
                    conv2d_backward(x, w, n.stride, n.grad, dx, *dw, *db);
                } else if (dx) {
                    // Inputs need gradients but the kernel does not: still
                    // accumulate throwaway weight grads to reuse one path.
                    Tensor<T> tw(value_of(n.inputs[1]).shape), tb(value_of(n.inputs[2]).shape);
                    conv2d_backward(x, w, n.stride, n.grad, dx, tw, tb);
                }
                break;
            }
            case Op::Dense: {
                Tensor<T>& x = value_of(n.inputs[0]);
                Tensor<T>& w = value_of(n.inputs[1]);
                Tensor<T>* dx = grad_of(n.inputs[0]);
                Tensor<T>* dw = grad_of(n.inputs[1]);
                Tensor<T>* db = grad_of(n.inputs[2]);
                if (dw && db) {
                    dense_backward(x, w, n.grad, dx, *dw, *db);
                } else if (dx) {
                    Tensor<T> tw(value_of(n.inputs[1]).shape), tb(value_of(n.inputs[2]).shape);
                    dense_backward(x, w, n.grad, dx, tw, tb);
                }
                break;
            }
            case Op::Relu:
                if (Tensor<T>* dx = grad_of(n.inputs[0]))
                    relu_backward(value_of(n.inputs[0]), n.grad, *dx);
                break;
            case Op::SumTiles: {
                if (Tensor<T>* dx = grad_of(n.inputs[0])) {
                    const std::size_t nb = n.aux, l = n.value.dim(1);
                    const std::size_t nt = dx->dim(0) / nb;
                    for (std::size_t b = 0; b < nb; ++b)
                        for (std::size_t t = 0; t < nt; ++t)
                            for (std::size_t j = 0; j < l; ++j)
                                (*dx)[(b * nt + t) * l + j] += n.grad[b * l + j];
                }
                break;
            }
            case Op::Mse:
                if (Tensor<T>* dp = grad_of(n.inputs[0]))
                    mse_backward(value_of(n.inputs[0]), value_of(n.inputs[1]), n.grad[0], *dp);
                break;
        }
    }

    std::vector<Node> nodes_;
};

}  // namespace ednn
