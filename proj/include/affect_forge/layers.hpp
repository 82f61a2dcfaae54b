#pragma once

#include <cstddef>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "affect_forge/ops.hpp"
#include "affect_forge/parameter.hpp"

namespace affect_forge {

enum class LayerKind { conv2d, maxpool2d, dense, relu, softmax, dropout, flatten, concat };

inline const char* to_string(LayerKind k) {
    switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::softmax: return "softmax";
    case LayerKind::dropout: return "dropout";
    case LayerKind::flatten: return "flatten";
    case LayerKind::concat: return "concat";
    }
    return "?";
}

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::string name;  // parameter prefix for conv2d/dense; layers sharing a name share weights
    std::size_t filter_h = 0, filter_w = 0, filters = 0;
    std::size_t pool_h = 0, pool_w = 0;
    std::size_t units = 0;
    double keep_prob = 1.0;
    Padding padding = Padding::same;
    PoolMode pool_mode = PoolMode::standard;

    static LayerSpec conv(std::string name, std::size_t count, std::size_t fh, std::size_t fw, Padding pad) {
        LayerSpec s;
        s.kind = LayerKind::conv2d;
        s.name = std::move(name);
        s.filters = count;
        s.filter_h = fh;
        s.filter_w = fw;
        s.padding = pad;
        return s;
    }
    static LayerSpec pool(std::size_t ph, std::size_t pw, PoolMode mode = PoolMode::standard) {
        LayerSpec s;
        s.kind = LayerKind::maxpool2d;
        s.pool_h = ph;
        s.pool_w = pw;
        s.pool_mode = mode;
        return s;
    }
    static LayerSpec fully_connected(std::string name, std::size_t units) {
        LayerSpec s;
        s.kind = LayerKind::dense;
        s.name = std::move(name);
        s.units = units;
        return s;
    }
    static LayerSpec drop(double keep) {
        LayerSpec s;
        s.kind = LayerKind::dropout;
        s.keep_prob = keep;
        return s;
    }
    static LayerSpec simple(LayerKind k) {
        LayerSpec s;
        s.kind = k;
        return s;
    }

    void validate() const {
        switch (kind) {
        case LayerKind::conv2d:
            if (filter_h < 1 || filter_w < 1 || filters < 1) throw std::invalid_argument("conv2d dims must be >= 1");
            break;
        case LayerKind::maxpool2d:
            if (pool_h < 1 || pool_w < 1) throw std::invalid_argument("maxpool2d dims must be >= 1");
            break;
        case LayerKind::dense:
            if (units < 1) throw std::invalid_argument("dense units must be >= 1");
            break;
        case LayerKind::dropout:
            if (!(keep_prob > 0.0 && keep_prob <= 1.0))
                throw std::invalid_argument("dropout keep probability must be in (0, 1]");
            break;
        default: break;
        }
    }

    /// Canonical one-line description; feeds the architecture fingerprint.
    std::string describe() const {
        std::ostringstream os;
        os << to_string(kind);
        switch (kind) {
        case LayerKind::conv2d:
            os << ' ' << name << ' ' << filters << '@' << filter_h << 'x' << filter_w << ' ' << to_string(padding);
            break;
        case LayerKind::maxpool2d: os << ' ' << pool_h << 'x' << pool_w << ' ' << to_string(pool_mode); break;
        case LayerKind::dense: os << ' ' << name << ' ' << units; break;
        case LayerKind::dropout: os << ' ' << keep_prob; break;
        default: break;
        }
        return os.str();
    }
};

/// Per-invocation state a layer needs for its backward pass.
struct LayerCache {
    Tensor input;
    Tensor output;
    std::vector<std::size_t> argmax;
    std::vector<double> mask;
};

class Layer {
public:
    explicit Layer(LayerSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

    const LayerSpec& spec() const noexcept { return spec_; }
    std::optional<std::size_t> weight_index() const noexcept { return weight_; }
    std::optional<std::size_t> bias_index() const noexcept { return bias_; }

    /// Registers (or re-uses, for shared names) this layer's parameters and
    /// returns the output shape for the given input shape.
    Shape bind(ParameterStore& params, const Shape& in) {
        switch (spec_.kind) {
        case LayerKind::conv2d: {
            if (in.size() != 3) throw ShapeError("conv2d '" + spec_.name + "' expects HxWxC input, got " + to_string(in));
            const Shape w{spec_.filter_h, spec_.filter_w, in[2], spec_.filters};
            weight_ = bind_param(params, spec_.name + ".w", w);
            bias_ = bind_param(params, spec_.name + ".b", {spec_.filters});
            const ConvGeometry g = conv_geometry(in, w, spec_.padding);
            return {g.out_h, g.out_w, g.out_c};
        }
        case LayerKind::maxpool2d: return maxpool_output_shape(in, spec_.pool_h, spec_.pool_w, spec_.pool_mode);
        case LayerKind::dense: {
            const std::size_t n = element_count(in);
            weight_ = bind_param(params, spec_.name + ".w", {n, spec_.units});
            bias_ = bind_param(params, spec_.name + ".b", {spec_.units});
            return {spec_.units};
        }
        case LayerKind::flatten: return {element_count(in)};
        case LayerKind::concat: throw std::logic_error("concat is a graph join, not a sequential layer");
        default: return in;
        }
    }

    Tensor forward(const ParameterStore& params, const Tensor& in, LayerCache& cache, bool training, Rng& rng) const {
        cache.input = in;
        Tensor out;
        switch (spec_.kind) {
        case LayerKind::conv2d:
            out = conv2d(in, params[*weight_].value, &params[*bias_].value, spec_.padding);
            break;
        case LayerKind::maxpool2d: {
            PoolResult r = maxpool2d(in, spec_.pool_h, spec_.pool_w, spec_.pool_mode);
            cache.argmax = std::move(r.argmax);
            out = std::move(r.output);
            break;
        }
        case LayerKind::dense: out = dense(in, params[*weight_].value, params[*bias_].value); break;
        case LayerKind::relu: out = relu(in); break;
        case LayerKind::softmax: out = softmax(in); break;
        case LayerKind::dropout: {
            DropoutResult r = dropout(in, spec_.keep_prob, training, rng);
            cache.mask = std::move(r.mask);
            out = std::move(r.output);
            break;
        }
        case LayerKind::flatten: out = flatten(in); break;
        case LayerKind::concat: throw std::logic_error("concat is a graph join, not a sequential layer");
        }
        cache.output = out;
        return out;
    }

    /// Returns d(loss)/d(input) (empty tensor when not requested) and
    /// accumulates parameter gradients into `grads`.
    Tensor backward(const ParameterStore& params, const Tensor& grad_out, const LayerCache& cache, Gradients& grads,
                    bool need_input_grad) const {
        switch (spec_.kind) {
        case LayerKind::conv2d: {
            Tensor gi = need_input_grad ? Tensor(cache.input.shape()) : Tensor();
            conv2d_backward(cache.input, params[*weight_].value, spec_.padding, grad_out, need_input_grad ? &gi : nullptr,
                            &grads[*weight_], &grads[*bias_]);
            return gi;
        }
        case LayerKind::maxpool2d: {
            Tensor gi(cache.input.shape());
            maxpool2d_backward(cache.argmax, grad_out, gi);
            return gi;
        }
        case LayerKind::dense: {
            Tensor gi = need_input_grad ? Tensor(cache.input.shape()) : Tensor();
            dense_backward(cache.input, params[*weight_].value, grad_out, need_input_grad ? &gi : nullptr,
                           &grads[*weight_], &grads[*bias_]);
            return gi;
        }
        case LayerKind::relu: return relu_backward(cache.output, grad_out);
        case LayerKind::softmax: {
            double dot = 0.0;
            for (std::size_t i = 0; i < grad_out.size(); ++i) dot += grad_out[i] * cache.output[i];
            Tensor gi = grad_out;
            for (std::size_t i = 0; i < gi.size(); ++i) gi[i] = cache.output[i] * (grad_out[i] - dot);
            return gi;
        }
        case LayerKind::dropout: return dropout_backward(cache.mask, grad_out);
        case LayerKind::flatten: return grad_out.reshaped(cache.input.shape());
        case LayerKind::concat: break;
        }
        throw std::logic_error("concat is a graph join, not a sequential layer");
    }

private:
    static std::size_t bind_param(ParameterStore& params, const std::string& name, const Shape& shape) {
        if (params.contains(name)) {
            const std::size_t idx = params.index_of(name);
            if (params[idx].value.shape() != shape)
                throw ShapeError("shared parameter '" + name + "' bound with shape " + to_string(shape) + " but holds " +
                                 to_string(params[idx].value.shape()));
            return idx;
        }
        return params.add(name, Tensor(shape));
    }

    LayerSpec spec_;
    std::optional<std::size_t> weight_, bias_;
};

/// A chain of layers applied in order.
class Sequential {
public:
    Sequential() = default;
    explicit Sequential(std::vector<LayerSpec> specs) {
        for (auto& s : specs) layers_.emplace_back(std::move(s));
    }

    Shape bind(ParameterStore& params, Shape in) {
        input_shape_ = in;
        for (auto& l : layers_) in = l.bind(params, in);
        output_shape_ = in;
        return in;
    }

    const Shape& input_shape() const noexcept { return input_shape_; }
    const Shape& output_shape() const noexcept { return output_shape_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }

    /// Shape after the first `n` layers.
    Shape shape_after(std::size_t n) const {
        ParameterStore scratch;
        Shape s = input_shape_;
        for (std::size_t i = 0; i < n && i < layers_.size(); ++i) {
            Layer copy(layers_[i].spec());
            s = copy.bind(scratch, s);
        }
        return s;
    }

    Tensor forward(const ParameterStore& params, Tensor x, std::vector<LayerCache>& caches, bool training,
                   Rng& rng) const {
        caches.resize(layers_.size());
        for (std::size_t i = 0; i < layers_.size(); ++i) x = layers_[i].forward(params, x, caches[i], training, rng);
        return x;
    }

    Tensor backward(const ParameterStore& params, Tensor grad, const std::vector<LayerCache>& caches, Gradients& grads,
                    bool need_input_grad) const {
        for (std::size_t i = layers_.size(); i-- > 0;)
            grad = layers_[i].backward(params, grad, caches[i], grads, i > 0 || need_input_grad);
        return grad;
    }

private:
    std::vector<Layer> layers_;
    Shape input_shape_, output_shape_;
};

} // namespace affect_forge
