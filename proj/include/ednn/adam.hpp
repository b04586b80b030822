#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ednn/tensor.hpp"

namespace ednn {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Ordered collection of named parameters with per-parameter Adam moments
/// and one shared step counter.
template <typename T>
struct ParamSet {
    struct Entry {
        std::string name;
        Tensor<T> value;
        Tensor<T> m;  // first moment, same shape as value
        Tensor<T> v;  // second moment, same shape as value
    };

    std::vector<Entry> entries;
    long step_count = 0;

    void add(std::string name, Tensor<T> value) {
        Entry e;
        e.name = std::move(name);
        e.m = Tensor<T>(value.shape);
        e.v = Tensor<T>(value.shape);
        e.value = std::move(value);
        entries.push_back(std::move(e));
    }

    Entry* find(const std::string& name) {
        for (auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }

    std::size_t size() const { return entries.size(); }
};

/// Element-wise precision conversion of parameters and moments.
template <typename U, typename T>
ParamSet<U> params_cast(const ParamSet<T>& src) {
    ParamSet<U> out;
    out.step_count = src.step_count;
    for (const auto& e : src.entries) {
        typename ParamSet<U>::Entry ne;
        ne.name = e.name;
        ne.value = e.value.template cast<U>();
        ne.m = e.m.template cast<U>();
        ne.v = e.v.template cast<U>();
        out.entries.push_back(std::move(ne));
    }
    return out;
}

/// One bias-corrected Adam update. Grads must match parameter order and
/// shapes; a NaN gradient aborts the step before any parameter changes.
template <typename T>
void adam_step(ParamSet<T>& params, std::span<const Tensor<T>> grads, const AdamConfig& cfg) {
    if (grads.size() != params.entries.size())
        throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.entries.size()) + " parameters");
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (grads[i].shape != params.entries[i].value.shape)
            throw ShapeError("adam_step: gradient shape " + shape_str(grads[i].shape) +
                             " for parameter " + params.entries[i].name + " " +
                             shape_str(params.entries[i].value.shape));
        if (!grads[i].all_finite())
            throw DivergenceError("non-finite gradient for parameter " + params.entries[i].name);
    }
    params.step_count += 1;
    const double t = static_cast<double>(params.step_count);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < grads.size(); ++i) {
        auto& e = params.entries[i];
        const Tensor<T>& g = grads[i];
        for (std::size_t j = 0; j < g.size(); ++j) {
            double gj = static_cast<double>(g[j]);
            double m = cfg.beta1 * static_cast<double>(e.m[j]) + (1.0 - cfg.beta1) * gj;
            double v = cfg.beta2 * static_cast<double>(e.v[j]) + (1.0 - cfg.beta2) * gj * gj;
            e.m[j] = static_cast<T>(m);
            e.v[j] = static_cast<T>(v);
            double mhat = m / bc1;
            double vhat = v / bc2;
            e.value[j] = static_cast<T>(static_cast<double>(e.value[j]) -
                                        cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

}  // namespace ednn
