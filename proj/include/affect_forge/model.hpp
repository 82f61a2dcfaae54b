#pragma once

// Two-headed affect classifier.
//
//   log window 10x37 --transpose--> 37x10x1
//     conv 8@5x5 same, relu -> maxpool 3x3 (tflearn quirk) -> 12x2x8
//     conv 16@3x3 same, relu -> flatten 384
//   each of 3 chunks 10x10x17 (shared weights by default)
//     conv 8@5x5 same, relu -> maxpool 2x2 -> 5x5x8
//     conv 8@5x5 same, relu -> flatten 200            (x3 = 600)
//   concat [chunks 600 | logs 384] = 984
//     dropout(keep 0.98) -> dense 632, relu -> dense 3 -> softmax

#include <array>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "affect_forge/digest.hpp"
#include "affect_forge/event_schema.hpp"
#include "affect_forge/layers.hpp"
#include "affect_forge/level.hpp"
#include "affect_forge/text_io.hpp"

namespace affect_forge {

inline constexpr std::size_t kWindow = 10;
inline constexpr std::size_t kChunksPerPoint = 3;
inline constexpr std::size_t kClasses = 3;

namespace shape_contract {
// Stride-1 same-padded convolutions keep spatial size; pooling floors.
inline constexpr std::size_t kChunkFlatten = (kChunkSize / 2) * (kChunkSize / 2) * 8;
inline constexpr std::size_t kChunksFlatten = kChunksPerPoint * kChunkFlatten;
inline constexpr std::size_t kLogsPooledRows = log_columns::kCount / 3;
inline constexpr std::size_t kLogsPooledCols = kWindow / 3 - (kWindow % 3 != 0 ? 1 : 0);
inline constexpr std::size_t kLogsFlatten = kLogsPooledRows * kLogsPooledCols * 16;
inline constexpr std::size_t kConcat = kChunksFlatten + kLogsFlatten;
static_assert(kChunksFlatten == 600, "chunk head must flatten to 600");
static_assert(kLogsPooledRows == 12 && kLogsPooledCols == 2, "logs head must pool 37x10 to 12x2");
static_assert(kConcat == 984, "full model concat width must be 984");
} // namespace shape_contract

enum class ModelVariant { full, level_only };

inline const char* to_string(ModelVariant v) { return v == ModelVariant::full ? "full" : "level-only"; }

inline ModelVariant parse_variant(std::string_view s) {
    if (s == "full") return ModelVariant::full;
    if (s == "level-only") return ModelVariant::level_only;
    throw ConfigError("variant must be full or level-only, got '" + std::string(s) + "'");
}

struct ModelConfig {
    ModelVariant variant = ModelVariant::full;
    std::vector<LayerSpec> logs_head;
    std::vector<LayerSpec> chunk_head;
    double keep_prob = 0.98;
    std::size_t hidden_units = 632;
    std::size_t outputs = kClasses;
    bool tie_chunk_weights = true;
    std::string metric = "fun";

    static ModelConfig standard() {
        ModelConfig c;
        c.logs_head = {
            LayerSpec::conv("conv1", 8, 5, 5, Padding::same),  LayerSpec::simple(LayerKind::relu),
            LayerSpec::pool(3, 3, PoolMode::tflearn_quirk),    LayerSpec::conv("conv2", 16, 3, 3, Padding::same),
            LayerSpec::simple(LayerKind::relu),                LayerSpec::simple(LayerKind::flatten),
        };
        c.chunk_head = {
            LayerSpec::conv("conv1", 8, 5, 5, Padding::same), LayerSpec::simple(LayerKind::relu),
            LayerSpec::pool(2, 2),                           LayerSpec::conv("conv2", 8, 5, 5, Padding::same),
            LayerSpec::simple(LayerKind::relu),               LayerSpec::simple(LayerKind::flatten),
        };
        return c;
    }

    bool uses_logs() const noexcept { return variant == ModelVariant::full; }

    /// Architecture description; the metric is deliberately excluded.
    std::string canonical() const {
        std::ostringstream os;
        os << "variant=" << to_string(variant) << "\n";
        if (uses_logs())
            for (const auto& l : logs_head) os << "logs=" << l.describe() << "\n";
        for (const auto& l : chunk_head) os << "chunks=" << l.describe() << "\n";
        os << "tie_chunk_weights=" << (tie_chunk_weights ? 1 : 0) << "\n";
        os << "keep_prob=" << format_double(keep_prob) << "\n";
        os << "hidden_units=" << hidden_units << "\n";
        os << "outputs=" << outputs << "\n";
        return os.str();
    }
    Digest fingerprint() const { return sha256(canonical()); }

    static ModelConfig from_canonical(std::string_view text) {
        ModelConfig c;
        for (std::string_view line : lines(text)) {
            const std::size_t eq = line.find('=');
            if (eq == std::string_view::npos) throw ParseError("bad model config line '" + std::string(line) + "'");
            const std::string_view key = line.substr(0, eq), value = line.substr(eq + 1);
            if (key == "variant") c.variant = parse_variant(value);
            else if (key == "logs") c.logs_head.push_back(parse_layer(value));
            else if (key == "chunks") c.chunk_head.push_back(parse_layer(value));
            else if (key == "tie_chunk_weights") c.tie_chunk_weights = value == "1";
            else if (key == "keep_prob") c.keep_prob = parse_double(value).value_or(-1.0);
            else if (key == "hidden_units") c.hidden_units = parse_int<std::size_t>(value).value_or(0);
            else if (key == "outputs") c.outputs = parse_int<std::size_t>(value).value_or(0);
            else throw ParseError("unknown model config key '" + std::string(key) + "'");
        }
        if (!c.uses_logs()) c.logs_head.clear();
        return c;
    }

private:
    static LayerSpec parse_layer(std::string_view text) {
        const auto f = split_ws(text);
        auto fail = [&] { return ParseError("bad layer description '" + std::string(text) + "'"); };
        if (f.empty()) throw fail();
        auto dims = [&](std::string_view s, std::size_t& a, std::size_t& b) {
            const auto parts = split(s, 'x');
            if (parts.size() != 2) throw fail();
            auto pa = parse_int<std::size_t>(parts[0]), pb = parse_int<std::size_t>(parts[1]);
            if (!pa || !pb) throw fail();
            a = *pa;
            b = *pb;
        };
        if (f[0] == "conv2d" && f.size() == 4) {
            const auto at = split(f[2], '@');
            if (at.size() != 2) throw fail();
            std::size_t fh, fw;
            dims(at[1], fh, fw);
            auto n = parse_int<std::size_t>(at[0]);
            if (!n) throw fail();
            return LayerSpec::conv(std::string(f[1]), *n, fh, fw, f[3] == "same" ? Padding::same : Padding::valid);
        }
        if (f[0] == "maxpool2d" && f.size() == 3) {
            std::size_t ph, pw;
            dims(f[1], ph, pw);
            return LayerSpec::pool(ph, pw, f[2] == "tflearn_quirk" ? PoolMode::tflearn_quirk : PoolMode::standard);
        }
        if (f[0] == "dense" && f.size() == 3) {
            auto n = parse_int<std::size_t>(f[2]);
            if (!n) throw fail();
            return LayerSpec::fully_connected(std::string(f[1]), *n);
        }
        if (f[0] == "dropout" && f.size() == 2) return LayerSpec::drop(parse_double(f[1]).value_or(-1.0));
        if (f.size() == 1) {
            if (f[0] == "relu") return LayerSpec::simple(LayerKind::relu);
            if (f[0] == "softmax") return LayerSpec::simple(LayerKind::softmax);
            if (f[0] == "flatten") return LayerSpec::simple(LayerKind::flatten);
        }
        throw fail();
    }
};

/// The same configuration with the logs head removed (chunks only, concat 600).
inline ModelConfig build_level_only_variant(ModelConfig config) {
    config.variant = ModelVariant::level_only;
    config.logs_head.clear();
    return config;
}

/// One model input: the 10-step log window and the three level chunks.
struct ModelInput {
    Tensor log_window;  // 10 x 37
    Tensor chunks;      // 3 x 10 x 10 x 17
};

struct ForwardTrace {
    std::vector<LayerCache> logs;
    std::vector<std::vector<LayerCache>> chunks;
    std::vector<LayerCache> head;
    std::size_t logs_width = 0;
    Tensor probs;
};

class AffectModel {
public:
    explicit AffectModel(ModelConfig config) : config_(std::move(config)) {
        if (config_.uses_logs() && config_.logs_head.empty())
            throw std::invalid_argument("full model needs a logs head");
        const std::size_t heads = config_.tie_chunk_weights ? 1 : kChunksPerPoint;
        std::size_t concat = 0;
        for (std::size_t c = 0; c < heads; ++c) {
            const std::string prefix = config_.tie_chunk_weights ? "chunks." : "chunks" + std::to_string(c) + ".";
            chunk_heads_.emplace_back(prefixed(config_.chunk_head, prefix));
            chunk_width_ = element_count(
                chunk_heads_.back().bind(layout_, {kChunkSize, kLevelHeight, kTileTypes}));
        }
        concat += kChunksPerPoint * chunk_width_;
        if (config_.uses_logs()) {
            logs_head_ = Sequential(prefixed(config_.logs_head, "logs."));
            logs_width_ = element_count(logs_head_.bind(layout_, {log_columns::kCount, kWindow, 1}));
            concat += logs_width_;
        }
        concat_width_ = concat;
        head_ = Sequential({LayerSpec::drop(config_.keep_prob), LayerSpec::fully_connected("fc1", config_.hidden_units),
                            LayerSpec::simple(LayerKind::relu), LayerSpec::fully_connected("out", config_.outputs)});
        head_.bind(layout_, {concat_width_});
    }

    const ModelConfig& config() const noexcept { return config_; }
    std::size_t concat_width() const noexcept { return concat_width_; }
    std::size_t chunk_head_width() const noexcept { return chunk_width_; }
    std::size_t logs_head_width() const noexcept { return logs_width_; }
    const Sequential& logs_head() const noexcept { return logs_head_; }
    const Sequential& chunk_head(std::size_t i = 0) const { return chunk_heads_.at(i); }

    /// Parameters with zero values, in the canonical registration order.
    ParameterStore zero_parameters() const {
        ParameterStore p;
        for (const auto& src : layout_) p.add(src.name, Tensor(src.value.shape()));
        return p;
    }

    /// Glorot-uniform weights, zero biases.
    ParameterStore init_parameters(Rng& rng) const {
        ParameterStore p = zero_parameters();
        for (auto& param : p) {
            const Shape& s = param.value.shape();
            if (s.size() == 4) glorot_uniform(param.value, s[0] * s[1] * s[2], s[0] * s[1] * s[3], rng);
            else if (s.size() == 2) glorot_uniform(param.value, s[0], s[1], rng);
        }
        return p;
    }

    /// Verifies that `params` carries every expected tensor with the right shape.
    void check_parameters(const ParameterStore& params) const {
        if (params.size() != layout_.size())
            throw IncompatibleError("expected " + std::to_string(layout_.size()) + " parameter tensors, got " +
                                    std::to_string(params.size()));
        for (std::size_t i = 0; i < layout_.size(); ++i)
            if (params[i].name != layout_[i].name || params[i].value.shape() != layout_[i].value.shape())
                throw IncompatibleError("parameter " + std::to_string(i) + " is " + params[i].name + " " +
                                        to_string(params[i].value.shape()) + ", expected " + layout_[i].name + " " +
                                        to_string(layout_[i].value.shape()));
    }

    ForwardTrace forward_trace(const ParameterStore& params, const ModelInput& in, bool training, Rng& rng) const {
        if (in.chunks.shape() != Shape{kChunksPerPoint, kChunkSize, kLevelHeight, kTileTypes})
            throw ShapeError("chunks head expects 3x10x10x17 input, got " + to_string(in.chunks.shape()));
        ForwardTrace tr;
        std::vector<double> concat;
        concat.reserve(concat_width_);
        tr.chunks.resize(kChunksPerPoint);
        const std::size_t per_chunk = kChunkSize * kLevelHeight * kTileTypes;
        for (std::size_t c = 0; c < kChunksPerPoint; ++c) {
            Tensor chunk({kChunkSize, kLevelHeight, kTileTypes},
                         std::vector<double>(in.chunks.data().begin() + static_cast<std::ptrdiff_t>(c * per_chunk),
                                             in.chunks.data().begin() + static_cast<std::ptrdiff_t>((c + 1) * per_chunk)));
            const Tensor out = chunk_heads_[head_for(c)].forward(params, std::move(chunk), tr.chunks[c], training, rng);
            concat.insert(concat.end(), out.data().begin(), out.data().end());
        }
        if (config_.uses_logs()) {
            if (in.log_window.shape() != Shape{kWindow, log_columns::kCount})
                throw ShapeError("logs head expects a 10x37 window, got " + to_string(in.log_window.shape()));
            Tensor transposed({log_columns::kCount, kWindow, 1});
            for (std::size_t t = 0; t < kWindow; ++t)
                for (std::size_t col = 0; col < log_columns::kCount; ++col)
                    transposed[col * kWindow + t] = in.log_window.at(t, col);
            const Tensor out = logs_head_.forward(params, std::move(transposed), tr.logs, training, rng);
            concat.insert(concat.end(), out.data().begin(), out.data().end());
        }
        const std::size_t width = concat.size();
        const Tensor logits = head_.forward(params, Tensor({width}, std::move(concat)), tr.head, training, rng);
        tr.probs = softmax(logits);
        return tr;
    }

    Tensor forward(const ParameterStore& params, const ModelInput& in, bool training, Rng& rng) const {
        return forward_trace(params, in, training, rng).probs;
    }

    /// Accumulates d(cross-entropy)/d(params) for `label` into `grads` and
    /// returns the loss.
    double backward(const ParameterStore& params, const ForwardTrace& tr, std::size_t label, Gradients& grads) const {
        const double loss = cross_entropy_loss(tr.probs, label);
        const Tensor g_concat = head_.backward(params, softmax_cross_entropy_grad(tr.probs, label), tr.head, grads, true);
        for (std::size_t c = 0; c < kChunksPerPoint; ++c) {
            Tensor g({chunk_width_}, std::vector<double>(g_concat.data().begin() + static_cast<std::ptrdiff_t>(c * chunk_width_),
                                                        g_concat.data().begin() + static_cast<std::ptrdiff_t>((c + 1) * chunk_width_)));
            chunk_heads_[head_for(c)].backward(params, std::move(g), tr.chunks[c], grads, false);
        }
        if (config_.uses_logs()) {
            const std::size_t off = kChunksPerPoint * chunk_width_;
            Tensor g({logs_width_}, std::vector<double>(g_concat.data().begin() + static_cast<std::ptrdiff_t>(off),
                                                       g_concat.data().end()));
            logs_head_.backward(params, std::move(g), tr.logs, grads, false);
        }
        return loss;
    }

private:
    static std::vector<LayerSpec> prefixed(std::vector<LayerSpec> specs, const std::string& prefix) {
        for (auto& s : specs)
            if (!s.name.empty()) s.name = prefix + s.name;
        return specs;
    }
    std::size_t head_for(std::size_t chunk) const noexcept { return config_.tie_chunk_weights ? 0 : chunk; }

    ModelConfig config_;
    ParameterStore layout_;
    Sequential logs_head_;
    std::vector<Sequential> chunk_heads_;
    Sequential head_;
    std::size_t chunk_width_ = 0, logs_width_ = 0, concat_width_ = 0;
};

/// Everything needed to reproduce predictions from a trained model.
struct ModelWeights {
    ModelConfig config;
    ParameterStore params;
    Digest palette_fingerprint{};
    std::uint64_t seed = 0;
};

} // namespace affect_forge
