#include <gtest/gtest.h>

#include <cmath>

#include "affect_forge/selfcheck.hpp"
#include "affect_forge/synth.hpp"
#include "affect_forge/train.hpp"
#include "affect_forge/weights_io.hpp"

using namespace affect_forge;

namespace {

ModelConfig level_only() { return build_level_only_variant(ModelConfig::standard()); }

ModelConfig untied() {
    ModelConfig c = ModelConfig::standard();
    c.tie_chunk_weights = false;
    return c;
}

// Small planted-signal corpus: one player's three sessions cut to 60 steps.
Dataset small_corpus(std::uint64_t seed, std::size_t players = 1, std::size_t length = 60) {
    SynthSpec spec;
    spec.seed = seed;
    spec.players = players;
    spec.levels = 3;
    const SynthCorpus c = generate(spec);
    LevelSet levels;
    for (std::size_t i = 0; i < c.levels.size(); ++i)
        levels.emplace(static_cast<int>(i), parse_level(crop_text(c.levels[i].text, 198, 3, true),
                                                         TilePalette::default_palette(), static_cast<int>(i)));
    std::vector<LogMatrix> enc;
    for (const auto& s : c.sessions) enc.push_back(encode_session(s, 198));
    const LogMatrix logs = crop_and_stack(enc, length);
    const auto labels = segment_labels(logs, c.labels, "fun");
    return assemble_dataset(logs, std::move(levels), labels);
}

std::vector<std::size_t> all_indices(const Dataset& d) {
    std::vector<std::size_t> v(d.size());
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

} // namespace

TEST(Model, ShapeContract) {
    const AffectModel full(ModelConfig::standard());
    EXPECT_EQ(full.chunk_head_width(), 200u);
    EXPECT_EQ(full.chunk_head_width() * kChunksPerPoint, 600u);
    EXPECT_EQ(full.logs_head_width(), 384u);
    EXPECT_EQ(full.logs_head().shape_after(3), (Shape{12, 2, 8}));
    EXPECT_EQ(full.concat_width(), 984u);
    EXPECT_EQ(AffectModel(level_only()).concat_width(), 600u);
    EXPECT_EQ(AffectModel(untied()).concat_width(), 984u);
    const ParameterStore p = full.zero_parameters();
    EXPECT_EQ(p.at("fc1.w").value.shape(), (Shape{984, 632}));
    EXPECT_EQ(p.at("out.w").value.shape(), (Shape{632, 3}));
    EXPECT_EQ(p.at("chunks.conv1.w").value.shape(), (Shape{5, 5, 17, 8}));
    EXPECT_EQ(p.at("logs.conv1.w").value.shape(), (Shape{5, 5, 1, 8}));
    EXPECT_FALSE(AffectModel(level_only()).zero_parameters().contains("logs.conv1.w"));
}

TEST(Model, ProbabilitiesSumToOne) {
    Rng rng(1);
    for (const ModelConfig& cfg : {ModelConfig::standard(), level_only(), untied()}) {
        const AffectModel m(cfg);
        const ParameterStore p = m.init_parameters(rng);
        for (int i = 0; i < 5; ++i) {
            const Tensor probs = m.forward(p, random_model_input(rng), i % 2 == 0, rng);
            ASSERT_EQ(probs.size(), 3u);
            EXPECT_NEAR(probs[0] + probs[1] + probs[2], 1.0, 1e-9);
        }
    }
}

TEST(Model, ZeroWeightsGiveUniformAndLn3) {
    Rng rng(2);
    for (const ModelConfig& cfg : {ModelConfig::standard(), level_only()}) {
        const AffectModel m(cfg);
        const ParameterStore p = m.zero_parameters();
        const ModelInput in = random_model_input(rng);
        const Tensor probs = m.forward(p, in, false, rng);
        for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(probs[c], 1.0 / 3.0, 1e-15);
        Gradients g = p.zero_gradients();
        EXPECT_NEAR(m.backward(p, m.forward_trace(p, in, false, rng), 1, g), std::log(3.0), 1e-10);
    }
}

TEST(Model, ForcedOneHotGivesNearZeroLoss) {
    const AffectModel m(level_only());
    ParameterStore p = m.zero_parameters();
    p.at("out.b").value[2] = 50.0;
    Rng rng(3);
    Gradients g = p.zero_gradients();
    EXPECT_LT(m.backward(p, m.forward_trace(p, random_model_input(rng), false, rng), 2, g), 1e-10);
    EXPECT_THROW(m.backward(p, m.forward_trace(p, random_model_input(rng), false, rng), 3, g), std::invalid_argument);
}

TEST(Model, EvalModeIgnoresSeedAndTrainingModeUsesIt) {
    const AffectModel m(ModelConfig::standard());
    Rng init(4);
    const ParameterStore p = m.init_parameters(init);
    const ModelInput in = random_model_input(init);
    Rng a(10), b(99);
    EXPECT_EQ(m.forward(p, in, false, a), m.forward(p, in, false, b));
    Rng c(10), d(10);
    EXPECT_EQ(m.forward(p, in, true, c), m.forward(p, in, true, d));
}

TEST(Model, ShapeErrorsNameTheHead) {
    const AffectModel m(ModelConfig::standard());
    const ParameterStore p = m.zero_parameters();
    Rng rng(5);
    ModelInput in = random_model_input(rng);
    ModelInput bad_logs{Tensor({37, 10}), in.chunks};
    ModelInput bad_chunks{in.log_window, Tensor({3, 10, 10, 16})};
    try {
        m.forward(p, bad_logs, false, rng);
        FAIL();
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("logs head"), std::string::npos);
    }
    try {
        m.forward(p, bad_chunks, false, rng);
        FAIL();
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("chunks head"), std::string::npos);
    }
}

TEST(Model, RegressionLockedOutput) {
    const AffectModel m(ModelConfig::standard());
    Rng rng(20240607);
    const ParameterStore p = m.init_parameters(rng);
    const Tensor probs = m.forward(p, random_model_input(rng), false, rng);
    const std::array<double, 3> golden = {0.34138463352950482, 0.61149948315030023, 0.047115883320194882};
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(probs[c], golden[c], 1e-12) << c;
}

// With untied heads initialised to copies of the tied head, the tied head's
// gradient is the sum of the three untied gradients.
TEST(Model, TiedChunkGradientSumsAllPositions) {
    const AffectModel tied(ModelConfig::standard()), separate(untied());
    Rng rng(6);
    ParameterStore pt = tied.init_parameters(rng);
    for (auto& prm : pt)
        if (prm.value.rank() == 1)
            for (double& v : prm.value.data()) v = rng.uniform(-0.1, 0.1);
    ParameterStore pu = separate.zero_parameters();
    for (auto& prm : pu) {
        std::string name = prm.name;
        if (name.rfind("chunks", 0) == 0) name = "chunks." + name.substr(name.find('.') + 1);
        prm.value = pt.at(name).value;
    }
    const ModelInput in = random_model_input(rng);
    Gradients gt = pt.zero_gradients(), gu = pu.zero_gradients();
    const double lt = tied.backward(pt, tied.forward_trace(pt, in, false, rng), 0, gt);
    const double lu = separate.backward(pu, separate.forward_trace(pu, in, false, rng), 0, gu);
    EXPECT_DOUBLE_EQ(lt, lu);
    for (const char* layer : {"conv1.w", "conv1.b", "conv2.w", "conv2.b"}) {
        const Tensor& g = gt[pt.index_of(std::string("chunks.") + layer)];
        double max_abs = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            double sum = 0;
            for (int c = 0; c < 3; ++c) sum += gu[pu.index_of("chunks" + std::to_string(c) + "." + layer)][i];
            ASSERT_NEAR(g[i], sum, 1e-12 * (1.0 + std::abs(sum))) << layer << " " << i;
            max_abs = std::max(max_abs, std::abs(gu[pu.index_of(std::string("chunks1.") + layer)][i]));
        }
        EXPECT_GT(max_abs, 0.0) << "middle chunk contributes to " << layer;
    }
}

TEST(Model, EndToEndGradientCheck) {
    for (const ModelConfig& cfg : {ModelConfig::standard(), level_only()})
        EXPECT_LT(model_grad_check(cfg, 8).max_relative_error, 1e-3);
}

TEST(Weights, RoundTripAndRejections) {
    const AffectModel m(ModelConfig::standard());
    Rng rng(7);
    const ModelWeights w{m.config(), m.init_parameters(rng), TilePalette::default_palette().fingerprint(), 7};
    const auto path = std::filesystem::temp_directory_path() / "af_weights_test.afw";
    save_weights(w, path);
    const ModelWeights back = load_weights(path, {m.config().fingerprint(), w.palette_fingerprint});
    ASSERT_EQ(back.params.size(), w.params.size());
    for (std::size_t i = 0; i < w.params.size(); ++i) {
        EXPECT_EQ(back.params[i].name, w.params[i].name);
        EXPECT_EQ(back.params[i].value, w.params[i].value);
    }
    EXPECT_EQ(back.seed, 7u);
    EXPECT_EQ(back.config.metric, "fun");

    Digest other{};
    EXPECT_THROW(load_weights(path, {std::nullopt, other}), IncompatibleError);
    EXPECT_THROW(load_weights(path, {AffectModel(level_only()).config().fingerprint(), std::nullopt}), IncompatibleError);

    const std::string bytes = read_file(path);
    EXPECT_THROW(decode_weights(bytes.substr(0, bytes.size() / 2)), ChecksumError);
    std::string flipped = bytes;
    flipped[flipped.size() / 2] ^= 0x01;
    EXPECT_THROW(decode_weights(flipped), ChecksumError);
    EXPECT_THROW(decode_weights("XXXX"), ChecksumError);
    std::filesystem::remove(path);
}

TEST(Training, GradientsIdenticalForAnyThreadCount) {
    const Dataset d = small_corpus(1);
    const AffectModel m(ModelConfig::standard());
    Rng init(1);
    const ParameterStore p = m.init_parameters(init);
    const auto idx = all_indices(d);
    const std::span<const std::size_t> batch(idx.data(), 32);
    Rng r1(5), r3(5);
    const BatchGradients a = loss_and_grads(m, p, d, batch, r1, true, 1);
    const BatchGradients b = loss_and_grads(m, p, d, batch, r3, true, 3);
    EXPECT_EQ(a.mean_loss, b.mean_loss);
    for (std::size_t i = 0; i < a.grads.size(); ++i) ASSERT_EQ(a.grads[i], b.grads[i]) << p[i].name;
    EXPECT_EQ(r1.fork_seed(), r3.fork_seed());
}

TEST(Training, ZeroModelLossIsLn3OnAnyBatch) {
    const Dataset d = small_corpus(2);
    const AffectModel m(ModelConfig::standard());
    const auto idx = all_indices(d);
    Rng rng(1);
    EXPECT_NEAR(loss_and_grads(m, m.zero_parameters(), d, std::span<const std::size_t>(idx.data(), 17), rng).mean_loss,
                std::log(3.0), 1e-10);
}

TEST(Training, ZeroLearningRateLeavesWeightsUnchanged) {
    const Dataset d = small_corpus(3);
    const AffectModel m(level_only());
    Rng init(2);
    const ParameterStore p0 = m.init_parameters(init);
    TrainOptions opt;
    opt.epochs = 1;
    opt.adam.learning_rate = 0.0;
    opt.threads = 1;
    const TrainResult r = train(m, p0, d, Dataset{}, opt);
    for (std::size_t i = 0; i < p0.size(); ++i) EXPECT_EQ(r.params[i].value, p0[i].value);
    EXPECT_EQ(evaluate(m, r.params, d, 1).accuracy, evaluate(m, p0, d, 1).accuracy);
}

TEST(Training, BitIdenticalAcrossRunsAndThreadCounts) {
    const Dataset d = small_corpus(4);
    std::vector<std::size_t> val_idx = {0, 50, 100};
    const AffectModel m(ModelConfig::standard());
    TrainOptions opt;
    opt.epochs = 2;
    opt.seed = 11;
    auto run = [&](std::size_t threads) {
        Rng init(3);
        opt.threads = threads;
        return train(m, m.init_parameters(init), d, d.subset(val_idx), opt);
    };
    const TrainResult a = run(1), b = run(1), c = run(4);
    ASSERT_EQ(a.history.size(), 2u);
    EXPECT_EQ(history_tsv(a.history), history_tsv(b.history));
    EXPECT_EQ(history_tsv(a.history), history_tsv(c.history));
    EXPECT_EQ(a.history[1].train_loss, c.history[1].train_loss);
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        ASSERT_EQ(a.params[i].value, b.params[i].value);
        ASSERT_EQ(a.params[i].value, c.params[i].value);
    }
}

TEST(Training, EarlyStopCallbackAndDivergence) {
    const Dataset d = small_corpus(5);
    const AffectModel m(level_only());
    TrainOptions opt;
    opt.epochs = 5;
    opt.threads = 1;
    opt.on_epoch = [](const EpochRecord& r, const ParameterStore&) { return r.epoch < 2; };
    Rng init(4);
    EXPECT_EQ(train(m, m.init_parameters(init), d, Dataset{}, opt).history.size(), 2u);

    ParameterStore nan_params = m.zero_parameters();
    nan_params.at("out.b").value[0] = std::nan("");
    opt.on_epoch = nullptr;
    EXPECT_THROW(train(m, nan_params, d, Dataset{}, opt), DivergenceError);
    EXPECT_THROW(train(m, m.zero_parameters(), Dataset{}, Dataset{}, opt), std::invalid_argument);
}

TEST(Training, ZeroModelScoresChanceOnBalancedData) {
    const Dataset d = small_corpus(6, 2, 200);
    const auto counts = d.class_counts();
    EXPECT_EQ(counts[0] + counts[1] + counts[2], d.size());
    const AffectModel m(ModelConfig::standard());
    const MetricsReport r = evaluate(m, m.zero_parameters(), d, 2);
    EXPECT_NEAR(r.accuracy, 1.0 / 3.0, 0.02);
    EXPECT_EQ(r.prediction_rate[0], 1.0);  // ties go to "most"
}
