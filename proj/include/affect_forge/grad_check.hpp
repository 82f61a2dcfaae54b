#pragma once

// Finite-difference verification of reverse-mode gradients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "affect_forge/layers.hpp"
#include "affect_forge/rng.hpp"

namespace affect_forge {

inline constexpr double kFiniteDifferenceStep = 1e-5;

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t coordinates_checked = 0;
    std::string worst;  // "<variable>[<index>]" of the largest error
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero gradients from
/// amplifying round-off in the finite difference into a large ratio.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

struct CheckedVariable {
    std::string name;
    Tensor* value;
    const Tensor* analytic_grad;
};

/// Compares analytic gradients to central differences of `loss`. When
/// `max_per_variable` is non-zero only that many randomly chosen coordinates
/// of each variable are probed.
inline GradCheckReport finite_difference_check(const std::vector<CheckedVariable>& vars,
                                               const std::function<double()>& loss, Rng& rng,
                                               std::size_t max_per_variable = 0, double h = kFiniteDifferenceStep) {
    GradCheckReport report;
    for (const auto& var : vars) {
        std::vector<std::size_t> coords(var.value->size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (max_per_variable && coords.size() > max_per_variable) {
            shuffle(std::span<std::size_t>(coords), rng);
            coords.resize(max_per_variable);
        }
        for (std::size_t i : coords) {
            double& x = (*var.value)[i];
            const double saved = x;
            x = saved + h;
            const double up = loss();
            x = saved - h;
            const double down = loss();
            x = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double err = relative_error((*var.analytic_grad)[i], numeric);
            ++report.coordinates_checked;
            if (report.worst.empty() || err > report.max_relative_error) {
                report.max_relative_error = err;
                report.worst = var.name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return report;
}

/// Fills `t` with distinct, well-separated values in [-1, 1] that stay away
/// from zero, so max-pool argmaxes and ReLU kinks are stable under the
/// finite-difference step.
inline void fill_separated(Tensor& t, Rng& rng) {
    const std::size_t n = t.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(order), rng);
    const double gap = 2.0 / static_cast<double>(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        double v = -1.0 + gap * (static_cast<double>(order[i]) + 0.5) + rng.uniform(-0.1, 0.1) * gap;
        if (std::abs(v) < 0.2 * gap) v = v < 0 ? -0.2 * gap : 0.2 * gap;
        t[i] = v;
    }
}

/// Gradient check for a single layer: loss = sum(output * r) for a fixed random r.
inline GradCheckReport grad_check(const LayerSpec& spec, const Shape& input_shape, std::uint64_t seed) {
    Rng rng(seed);
    ParameterStore params;
    Layer layer(spec);
    const Shape out_shape = layer.bind(params, input_shape);
    for (auto& p : params)
        for (double& v : p.value.data()) v = rng.uniform(-1.0, 1.0);

    Tensor input(input_shape);
    fill_separated(input, rng);
    Tensor projection(out_shape);
    for (double& v : projection.data()) v = rng.uniform(-1.0, 1.0);
    const std::uint64_t dropout_seed = rng.next_u64();

    auto loss = [&]() {
        Rng r(dropout_seed);
        LayerCache cache;
        const Tensor out = layer.forward(params, input, cache, true, r);
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * projection[i];
        return s;
    };

    Rng r(dropout_seed);
    LayerCache cache;
    layer.forward(params, input, cache, true, r);
    Gradients grads = params.zero_gradients();
    const Tensor grad_in = layer.backward(params, projection, cache, grads, true);

    std::vector<CheckedVariable> vars{{"input", &input, &grad_in}};
    for (std::size_t i = 0; i < params.size(); ++i) vars.push_back({params[i].name, &params[i].value, &grads[i]});
    return finite_difference_check(vars, loss, rng);
}

} // namespace affect_forge
