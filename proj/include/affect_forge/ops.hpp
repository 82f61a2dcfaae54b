#pragma once

// Forward and backward kernels for the layer set used by the affect model.
// Image tensors are laid out H x W x C, filters Fh x Fw x Cin x Cout, dense
// weights N x M. Backward kernels accumulate (+=) into the gradient tensors
// they are handed so that shared weights collect contributions from every use.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "affect_forge/error.hpp"
#include "affect_forge/rng.hpp"
#include "affect_forge/tensor.hpp"

namespace affect_forge {

enum class Padding { same, valid };

/// `tflearn_quirk` reproduces a pooling layer that loses one extra output cell
/// on the second axis whenever that axis is not a multiple of the pool width.
enum class PoolMode { standard, tflearn_quirk };

inline const char* to_string(Padding p) { return p == Padding::same ? "same" : "valid"; }
inline const char* to_string(PoolMode m) { return m == PoolMode::standard ? "standard" : "tflearn_quirk"; }

struct ConvGeometry {
    std::size_t in_h, in_w, in_c;
    std::size_t f_h, f_w, out_c;
    std::size_t out_h, out_w;
    std::size_t pad_top, pad_left;
};

inline ConvGeometry conv_geometry(const Shape& input, const Shape& filters, Padding padding) {
    if (input.size() != 3 || filters.size() != 4)
        throw ShapeError("conv2d expects HxWxC input and FhxFwxCinxCout filters, got input " + to_string(input) +
                         " and filters " + to_string(filters));
    if (input[2] != filters[2])
        throw ShapeError("conv2d channel mismatch: input " + to_string(input) + " vs filters " + to_string(filters));
    ConvGeometry g{input[0], input[1], input[2], filters[0], filters[1], filters[3], 0, 0, 0, 0};
    if (padding == Padding::same) {
        g.out_h = g.in_h;
        g.out_w = g.in_w;
        // Extra padding goes to the bottom/right for even filter sizes.
        g.pad_top = (g.f_h - 1) / 2;
        g.pad_left = (g.f_w - 1) / 2;
    } else {
        if (g.f_h > g.in_h || g.f_w > g.in_w)
            throw ShapeError("conv2d valid padding: filters " + to_string(filters) + " larger than input " +
                             to_string(input));
        g.out_h = g.in_h - g.f_h + 1;
        g.out_w = g.in_w - g.f_w + 1;
    }
    return g;
}

/// Stride-1 2-D convolution (cross-correlation) with optional per-filter bias.
inline Tensor conv2d(const Tensor& input, const Tensor& filters, const Tensor* bias, Padding padding) {
    const ConvGeometry g = conv_geometry(input.shape(), filters.shape(), padding);
    if (bias && bias->size() != g.out_c)
        throw ShapeError("conv2d bias " + to_string(bias->shape()) + " does not match " + std::to_string(g.out_c) +
                         " filters");
    Tensor out({g.out_h, g.out_w, g.out_c});
    const double* in = input.data().data();
    const double* w = filters.data().data();
    double* o = out.data().data();
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            double* acc = o + (oy * g.out_w + ox) * g.out_c;
            if (bias)
                for (std::size_t co = 0; co < g.out_c; ++co) acc[co] = (*bias)[co];
            for (std::size_t fy = 0; fy < g.f_h; ++fy) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + fy) - static_cast<std::ptrdiff_t>(g.pad_top);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                for (std::size_t fx = 0; fx < g.f_w; ++fx) {
                    const std::ptrdiff_t ix =
                        static_cast<std::ptrdiff_t>(ox + fx) - static_cast<std::ptrdiff_t>(g.pad_left);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                    const double* px = in + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * g.in_c;
                    const double* wk = w + (fy * g.f_w + fx) * g.in_c * g.out_c;
                    for (std::size_t ci = 0; ci < g.in_c; ++ci) {
                        const double a = px[ci];
                        if (a == 0.0) continue;  // one-hot inputs are mostly zero
                        const double* wrow = wk + ci * g.out_c;
                        for (std::size_t co = 0; co < g.out_c; ++co) acc[co] += a * wrow[co];
                    }
                }
            }
        }
    }
    return out;
}

/// Accumulates d(loss)/d(input, filters, bias). Any output pointer may be null.
inline void conv2d_backward(const Tensor& input, const Tensor& filters, Padding padding, const Tensor& grad_out,
                            Tensor* grad_input, Tensor* grad_filters, Tensor* grad_bias) {
    const ConvGeometry g = conv_geometry(input.shape(), filters.shape(), padding);
    if (grad_out.shape() != Shape{g.out_h, g.out_w, g.out_c})
        throw ShapeError("conv2d backward: gradient " + to_string(grad_out.shape()) + " does not match output");
    const double* in = input.data().data();
    const double* w = filters.data().data();
    const double* go = grad_out.data().data();
    double* gi = grad_input ? grad_input->data().data() : nullptr;
    double* gw = grad_filters ? grad_filters->data().data() : nullptr;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const double* gpix = go + (oy * g.out_w + ox) * g.out_c;
            if (grad_bias)
                for (std::size_t co = 0; co < g.out_c; ++co) (*grad_bias)[co] += gpix[co];
            for (std::size_t fy = 0; fy < g.f_h; ++fy) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + fy) - static_cast<std::ptrdiff_t>(g.pad_top);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                for (std::size_t fx = 0; fx < g.f_w; ++fx) {
                    const std::ptrdiff_t ix =
                        static_cast<std::ptrdiff_t>(ox + fx) - static_cast<std::ptrdiff_t>(g.pad_left);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                    const std::size_t in_off =
                        (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * g.in_c;
                    const std::size_t w_off = (fy * g.f_w + fx) * g.in_c * g.out_c;
                    for (std::size_t ci = 0; ci < g.in_c; ++ci) {
                        const double a = in[in_off + ci];
                        const double* wrow = w + w_off + ci * g.out_c;
                        if (gw && a != 0.0) {
                            double* gwrow = gw + w_off + ci * g.out_c;
                            for (std::size_t co = 0; co < g.out_c; ++co) gwrow[co] += a * gpix[co];
                        }
                        if (gi) {
                            double s = 0.0;
                            for (std::size_t co = 0; co < g.out_c; ++co) s += wrow[co] * gpix[co];
                            gi[in_off + ci] += s;
                        }
                    }
                }
            }
        }
    }
}

inline Shape maxpool_output_shape(const Shape& input, std::size_t pool_h, std::size_t pool_w, PoolMode mode) {
    if (input.size() != 3) throw ShapeError("maxpool2d expects HxWxC input, got " + to_string(input));
    if (pool_h == 0 || pool_w == 0) throw ShapeError("maxpool2d pool dimensions must be >= 1");
    if (pool_h > input[0] || pool_w > input[1])
        throw ShapeError("maxpool2d pool " + std::to_string(pool_h) + "x" + std::to_string(pool_w) +
                         " larger than input " + to_string(input));
    const std::size_t out_h = input[0] / pool_h;
    std::size_t out_w = input[1] / pool_w;
    if (mode == PoolMode::tflearn_quirk && input[1] % pool_w != 0) --out_w;
    if (out_w == 0)
        throw ShapeError("maxpool2d (" + std::string(to_string(mode)) + ") leaves no output columns for input " +
                         to_string(input));
    return {out_h, out_w, input[2]};
}

struct PoolResult {
    Tensor output;
    std::vector<std::size_t> argmax;  // flat input index feeding each output element
};

/// Max pooling with stride equal to the pool size. Ties resolve to the first
/// element in row-major window order.
inline PoolResult maxpool2d(const Tensor& input, std::size_t pool_h, std::size_t pool_w,
                            PoolMode mode = PoolMode::standard) {
    const Shape out_shape = maxpool_output_shape(input.shape(), pool_h, pool_w, mode);
    const std::size_t in_w = input.dim(1), ch = input.dim(2);
    PoolResult r{Tensor(out_shape), std::vector<std::size_t>(element_count(out_shape))};
    for (std::size_t oy = 0; oy < out_shape[0]; ++oy)
        for (std::size_t ox = 0; ox < out_shape[1]; ++ox)
            for (std::size_t c = 0; c < ch; ++c) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_idx = 0;
                for (std::size_t py = 0; py < pool_h; ++py)
                    for (std::size_t px = 0; px < pool_w; ++px) {
                        const std::size_t idx = ((oy * pool_h + py) * in_w + (ox * pool_w + px)) * ch + c;
                        if (input[idx] > best) {
                            best = input[idx];
                            best_idx = idx;
                        }
                    }
                const std::size_t o = (oy * out_shape[1] + ox) * ch + c;
                r.output[o] = best;
                r.argmax[o] = best_idx;
            }
    return r;
}

inline void maxpool2d_backward(const std::vector<std::size_t>& argmax, const Tensor& grad_out, Tensor& grad_input) {
    if (argmax.size() != grad_out.size()) throw ShapeError("maxpool2d backward: argmax/gradient size mismatch");
    for (std::size_t o = 0; o < grad_out.size(); ++o) grad_input[argmax[o]] += grad_out[o];
}

/// output[j] = sum_i input[i] * weights[i][j] + bias[j]
inline Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (weights.rank() != 2) throw ShapeError("dense weights must be NxM, got " + to_string(weights.shape()));
    const std::size_t n = weights.dim(0), m = weights.dim(1);
    if (input.size() != n)
        throw ShapeError("dense input length " + std::to_string(input.size()) + " does not match weights " +
                         to_string(weights.shape()));
    if (bias.size() != m) throw ShapeError("dense bias " + to_string(bias.shape()) + " does not match " + std::to_string(m));
    Tensor out({m}, bias.values());
    const double* w = weights.data().data();
    double* o = out.data().data();
    for (std::size_t i = 0; i < n; ++i) {
        const double a = input[i];
        if (a == 0.0) continue;
        const double* row = w + i * m;
        for (std::size_t j = 0; j < m; ++j) o[j] += a * row[j];
    }
    return out;
}

inline void dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out, Tensor* grad_input,
                           Tensor* grad_weights, Tensor* grad_bias) {
    const std::size_t n = weights.dim(0), m = weights.dim(1);
    if (grad_out.size() != m) throw ShapeError("dense backward: gradient length mismatch");
    const double* w = weights.data().data();
    const double* g = grad_out.data().data();
    if (grad_bias)
        for (std::size_t j = 0; j < m; ++j) (*grad_bias)[j] += g[j];
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = w + i * m;
        if (grad_weights && input[i] != 0.0) {
            double* grow = grad_weights->data().data() + i * m;
            const double a = input[i];
            for (std::size_t j = 0; j < m; ++j) grow[j] += a * g[j];
        }
        if (grad_input) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += row[j] * g[j];
            (*grad_input)[i] += s;
        }
    }
}

inline Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

/// Gradient through ReLU given the layer's output (positive where the unit was active).
inline Tensor relu_backward(const Tensor& output, const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (output[i] <= 0.0) g[i] = 0.0;
    return g;
}

inline Tensor softmax(const Tensor& logits) {
    if (logits.empty()) throw ShapeError("softmax of an empty tensor");
    double mx = logits[0];
    for (double v : logits.data()) mx = std::max(mx, v);
    Tensor out = logits;
    double sum = 0.0;
    for (double& v : out.data()) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : out.data()) v /= sum;
    return out;
}

struct DropoutResult {
    Tensor output;
    std::vector<double> mask;  // 0 or 1/keep_p per element; empty when inactive
};

/// Inverted dropout: kept units are scaled by 1/keep_p during training,
/// identity otherwise.
inline DropoutResult dropout(const Tensor& input, double keep_p, bool training, Rng& rng) {
    if (!(keep_p > 0.0 && keep_p <= 1.0)) throw std::invalid_argument("dropout keep probability must be in (0, 1]");
    if (!training || keep_p == 1.0) return {input, {}};
    DropoutResult r{input, std::vector<double>(input.size())};
    const double scale = 1.0 / keep_p;
    for (std::size_t i = 0; i < input.size(); ++i) {
        r.mask[i] = rng.uniform() < keep_p ? scale : 0.0;
        r.output[i] *= r.mask[i];
    }
    return r;
}

inline Tensor dropout_backward(const std::vector<double>& mask, const Tensor& grad_out) {
    if (mask.empty()) return grad_out;
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
    return g;
}

inline Tensor flatten(const Tensor& input) { return input.reshaped({input.size()}); }

/// Flattened a followed by flattened b.
inline Tensor concat(const Tensor& a, const Tensor& b) {
    std::vector<double> v;
    v.reserve(a.size() + b.size());
    v.insert(v.end(), a.data().begin(), a.data().end());
    v.insert(v.end(), b.data().begin(), b.data().end());
    const std::size_t n = v.size();
    return Tensor({n}, std::move(v));
}

inline constexpr double kLogEpsilon = 1e-12;

inline double cross_entropy_loss(const Tensor& probs, std::size_t label) {
    if (label >= probs.size())
        throw std::invalid_argument("label " + std::to_string(label) + " out of range for " +
                                    std::to_string(probs.size()) + " classes");
    return -std::log(probs[label] + kLogEpsilon);
}

/// d(cross-entropy)/d(logits) for a softmax output: probs - onehot(label).
inline Tensor softmax_cross_entropy_grad(const Tensor& probs, std::size_t label) {
    if (label >= probs.size())
        throw std::invalid_argument("label " + std::to_string(label) + " out of range for " +
                                    std::to_string(probs.size()) + " classes");
    Tensor g = probs;
    g[label] -= 1.0;
    return g;
}

} // namespace affect_forge
