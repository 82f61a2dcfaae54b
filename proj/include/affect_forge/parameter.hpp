#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "affect_forge/rng.hpp"
#include "affect_forge/tensor.hpp"

namespace affect_forge {

/// A learnable tensor together with its gradient and Adam moment estimates.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor gradient;
    Tensor adam_m;
    Tensor adam_v;
    std::uint64_t step_count = 0;
    /// Set when a backward pass deposits gradients, cleared by the optimizer.
    bool gradient_pending = false;

    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), gradient(value.shape()), adam_m(value.shape()), adam_v(value.shape()) {}
};

/// Gradient buffers aligned index-for-index with a ParameterStore.
using Gradients = std::vector<Tensor>;

/// Ordered collection of named parameters. Order is the registration order and
/// is part of the serialized weights layout.
class ParameterStore {
public:
    std::size_t add(const std::string& name, Tensor value) {
        if (index_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
        index_[name] = params_.size();
        params_.emplace_back(name, std::move(value));
        return params_.size() - 1;
    }

    std::size_t size() const noexcept { return params_.size(); }
    Parameter& operator[](std::size_t i) { return params_[i]; }
    const Parameter& operator[](std::size_t i) const { return params_[i]; }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    std::size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
        return it->second;
    }
    Parameter& at(const std::string& name) { return params_[index_of(name)]; }
    const Parameter& at(const std::string& name) const { return params_[index_of(name)]; }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    Gradients zero_gradients() const {
        Gradients g;
        g.reserve(params_.size());
        for (const auto& p : params_) g.emplace_back(p.value.shape());
        return g;
    }

    /// Adds `grads` into each parameter's gradient and marks them pending.
    void accumulate(const Gradients& grads, double scale = 1.0) {
        if (grads.size() != params_.size()) throw std::invalid_argument("gradient set does not match parameter store");
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& dst = params_[i].gradient;
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * grads[i][k];
            params_[i].gradient_pending = true;
        }
    }

    std::size_t total_elements() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value.size();
        return n;
    }

private:
    std::vector<Parameter> params_;
    std::map<std::string, std::size_t> index_;
};

/// Fills `t` from uniform(-limit, +limit) with limit = sqrt(6 / (fan_in + fan_out)).
inline void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.data()) v = rng.uniform(-limit, limit);
}

struct AdamOptions {
    double learning_rate = 7e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// One Adam update with bias correction on every parameter, then clears gradients.
inline void adam_step(ParameterStore& params, const AdamOptions& opt) {
    for (Parameter& p : params) {
        assert(p.gradient_pending && "adam_step called with already-consumed gradients");
        ++p.step_count;
        const double t = static_cast<double>(p.step_count);
        const double c1 = 1.0 - std::pow(opt.beta1, t);
        const double c2 = 1.0 - std::pow(opt.beta2, t);
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.gradient[i];
            p.adam_m[i] = opt.beta1 * p.adam_m[i] + (1.0 - opt.beta1) * g;
            p.adam_v[i] = opt.beta2 * p.adam_v[i] + (1.0 - opt.beta2) * g * g;
            const double m_hat = p.adam_m[i] / c1;
            const double v_hat = p.adam_v[i] / c2;
            p.value[i] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
        }
        p.gradient.fill(0.0);
        p.gradient_pending = false;
    }
}

} // namespace affect_forge
