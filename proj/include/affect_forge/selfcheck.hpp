#pragma once

// Built-in verification run by `affect_forge selftest`.

#include <array>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "affect_forge/grad_check.hpp"
#include "affect_forge/level.hpp"
#include "affect_forge/model.hpp"
#include "affect_forge/spearman.hpp"
#include "affect_forge/weights_io.hpp"

namespace affect_forge {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct OpCheckCase {
    const char* label;
    LayerSpec spec;
    Shape input;
};

inline std::vector<OpCheckCase> op_check_cases() {
    return {
        {"dense", LayerSpec::fully_connected("fc", 3), {4}},
        {"conv_same", LayerSpec::conv("c", 2, 3, 3, Padding::same), {6, 6, 2}},
        {"conv_valid", LayerSpec::conv("c", 2, 3, 3, Padding::valid), {6, 6, 2}},
        {"conv_5x5_same", LayerSpec::conv("c", 2, 5, 5, Padding::same), {7, 6, 3}},
        {"maxpool", LayerSpec::pool(2, 2), {6, 6, 2}},
        {"maxpool_quirk", LayerSpec::pool(3, 3, PoolMode::tflearn_quirk), {9, 10, 2}},
        {"relu", LayerSpec::simple(LayerKind::relu), {3, 4, 2}},
        {"softmax", LayerSpec::simple(LayerKind::softmax), {5}},
        {"dropout", LayerSpec::drop(0.7), {12}},
        {"flatten", LayerSpec::simple(LayerKind::flatten), {2, 3, 2}},
    };
}

/// Random model input: 0/1 event columns with continuous demographics, level
/// tag and x, and one-hot chunks.
inline ModelInput random_model_input(Rng& rng) {
    ModelInput in{Tensor({kWindow, log_columns::kCount}), Tensor({kChunksPerPoint, kChunkSize, kLevelHeight, kTileTypes})};
    for (std::size_t t = 0; t < kWindow; ++t) {
        for (std::size_t e = 0; e < log_columns::kEvents; ++e) in.log_window.at(t, e) = rng.bernoulli(0.3) ? 1.0 : 0.0;
        for (std::size_t d = 0; d < log_columns::kDemographics; ++d)
            in.log_window.at(t, log_columns::kDemographicsBegin + d) = rng.uniform_int(0, 4);
        in.log_window.at(t, log_columns::kLevel) = rng.uniform_int(0, 15);
        in.log_window.at(t, log_columns::kX) = rng.uniform(0.0, 197.0);
    }
    const std::size_t cells = kChunksPerPoint * kChunkSize * kLevelHeight;
    for (std::size_t c = 0; c < cells; ++c) in.chunks[c * kTileTypes + rng.uniform_index(kTileTypes)] = 1.0;
    return in;
}

/// Central-difference check of the whole network on a two-point batch with
/// dropout disabled. Biases are randomised so their gradients are exercised.
inline GradCheckReport model_grad_check(const ModelConfig& config, std::uint64_t seed, std::size_t per_variable = 12) {
    const AffectModel model(config);
    Rng rng(seed);
    ParameterStore params = model.init_parameters(rng);
    for (auto& p : params)
        if (p.value.rank() == 1)
            for (double& v : p.value.data()) v = rng.uniform(-0.1, 0.1);
    const std::array<ModelInput, 2> inputs = {random_model_input(rng), random_model_input(rng)};
    const std::array<std::size_t, 2> labels = {rng.uniform_index(kClasses), rng.uniform_index(kClasses)};

    Gradients grads = params.zero_gradients();
    Rng unused(0);
    for (std::size_t i = 0; i < 2; ++i) model.backward(params, model.forward_trace(params, inputs[i], false, unused), labels[i], grads);
    for (auto& g : grads) g *= 0.5;

    auto loss = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < 2; ++i) s += cross_entropy_loss(model.forward(params, inputs[i], false, unused), labels[i]);
        return s / 2.0;
    };
    std::vector<CheckedVariable> vars;
    for (std::size_t i = 0; i < params.size(); ++i) vars.push_back({params[i].name, &params[i].value, &grads[i]});
    return finite_difference_check(vars, loss, rng, per_variable);
}

/// Published per-level prediction rates (percent of points predicted most /
/// mid / least) of a challenge model over the 15 original levels in play
/// order, and the correlations reported for them.
inline constexpr std::array<double, 15> kReferenceMostRates = {2.66,  14.75, 32.91, 39.51, 44.24, 51.74, 55.67, 57.89,
                                                               60.24, 63.14, 64.19, 61.30, 60.62, 59.81, 57.37};
inline constexpr std::array<double, 15> kReferenceMidRates = {4.37,  9.59,  17.41, 60.48, 24.92, 24.57, 26.60, 28.52,
                                                              29.58, 29.41, 29.43, 34.08, 35.41, 36.74, 38.95};
inline constexpr std::array<double, 15> kReferenceLeastRates = {92.96, 75.64, 49.66, 0.0,  30.82, 23.67, 17.72, 13.58,
                                                                10.16, 7.43,  6.36,  4.60, 3.95,  3.43,  3.66};
inline constexpr double kReferenceMostRho = 0.8143, kReferenceMostP = 2.194e-4;
inline constexpr double kReferenceMidRho = 0.75, kReferenceMidP = 1.281e-3;
inline constexpr double kReferenceLeastRho = -0.7607, kReferenceLeastP = 9.911e-4;

inline SpearmanResult reference_correlation(const std::array<double, 15>& rates) {
    std::array<double, 15> order{};
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<double>(i);
    return spearman_rho(order, rates);
}

/// Straight copy of the 10 columns starting at the clamped left edge.
inline bool chunk_matches_copy(const LevelGrid& grid, double x) {
    const Tensor chunk = extract_chunk(grid, x);
    long left = static_cast<long>(std::floor(x)) - 4;
    left = std::max(0L, std::min(left, static_cast<long>(grid.width()) - 10));
    for (std::size_t dx = 0; dx < 10; ++dx)
        for (std::size_t y = 0; y < grid.height(); ++y)
            for (std::size_t c = 0; c < kTileTypes; ++c) {
                const double want = grid.tile(static_cast<std::size_t>(left) + dx, y) == c ? 1.0 : 0.0;
                if (chunk.at(dx, y, c) != want) return false;
            }
    return true;
}

inline std::vector<CheckResult> run_selftest(const std::optional<std::filesystem::path>& weights_file = std::nullopt) {
    std::vector<CheckResult> out;
    auto add = [&](std::string name, bool ok, std::string detail) { out.push_back({std::move(name), ok, std::move(detail)}); };

    for (const auto& c : op_check_cases()) {
        double worst = 0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) worst = std::max(worst, grad_check(c.spec, c.input, seed).max_relative_error);
        add(std::string("gradient ") + c.label, worst < 1e-4, "max relative error " + format_double(worst));
    }
    for (const ModelVariant v : {ModelVariant::full, ModelVariant::level_only}) {
        ModelConfig cfg = ModelConfig::standard();
        if (v == ModelVariant::level_only) cfg = build_level_only_variant(cfg);
        double worst = 0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) worst = std::max(worst, model_grad_check(cfg, seed).max_relative_error);
        add(std::string("gradient end-to-end ") + to_string(v), worst < 1e-3, "max relative error " + format_double(worst));
    }
    {
        const AffectModel full(ModelConfig::standard());
        const AffectModel chunks_only(build_level_only_variant(ModelConfig::standard()));
        const bool ok = full.concat_width() == 984 && full.chunk_head_width() * kChunksPerPoint == 600 &&
                        full.logs_head().shape_after(3) == Shape{12, 2, 8} && chunks_only.concat_width() == 600;
        add("shape contract", ok, "concat " + std::to_string(full.concat_width()) + ", level-only " +
                                      std::to_string(chunks_only.concat_width()));
    }
    {
        Rng rng(7);
        bool ok = true;
        for (int i = 0; i < 100 && ok; ++i) {
            LevelGrid g(0, 10 + rng.uniform_index(200), kLevelHeight);
            for (std::size_t x = 0; x < g.width(); ++x)
                for (std::size_t y = 0; y < g.height(); ++y) g.set_tile(x, y, static_cast<std::uint8_t>(rng.uniform_index(kTileTypes)));
            ok = chunk_matches_copy(g, rng.uniform(-2.0, static_cast<double>(g.width()) + 2.0));
        }
        add("chunk extraction", ok, "100 random levels and positions");
    }
    {
        const SpearmanResult most = reference_correlation(kReferenceMostRates);
        const SpearmanResult mid = reference_correlation(kReferenceMidRates);
        const SpearmanResult least = reference_correlation(kReferenceLeastRates);
        const bool ok = std::abs(most.rho - kReferenceMostRho) < 5e-4 && std::abs(most.p_value - kReferenceMostP) < 1e-5 &&
                        std::abs(mid.rho - kReferenceMidRho) < 5e-4 && std::abs(mid.p_value - kReferenceMidP) < 1e-5 &&
                        std::abs(least.rho - kReferenceLeastRho) < 5e-4 &&
                        std::abs(least.p_value - kReferenceLeastP) < 1e-5;
        std::ostringstream os;
        os << "rho most " << format_fixed(most.rho, 4) << " p " << most.p_value << ", mid " << format_fixed(mid.rho, 4)
           << ", least " << format_fixed(least.rho, 4);
        add("spearman reference", ok, os.str());
    }
    {
        Rng rng(11);
        const AffectModel model(ModelConfig::standard());
        ModelWeights w{model.config(), model.init_parameters(rng), TilePalette::default_palette().fingerprint(), 11};
        const ModelWeights back = decode_weights(encode_weights(w));
        bool ok = back.params.size() == w.params.size();
        for (std::size_t i = 0; ok && i < w.params.size(); ++i) ok = back.params[i].value == w.params[i].value;
        add("weights round trip", ok, std::to_string(w.params.total_elements()) + " values");
    }
    if (weights_file) {
        try {
            const ModelWeights w = load_weights(*weights_file);
            add("weights file " + weights_file->string(), true,
                "metric " + w.config.metric + ", variant " + to_string(w.config.variant));
        } catch (const std::exception& e) {
            add("weights file " + weights_file->string(), false, e.what());
        }
    }
    return out;
}

} // namespace affect_forge
