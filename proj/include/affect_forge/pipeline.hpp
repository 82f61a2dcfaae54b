#pragma once

// The commands behind the affect_forge executable. Each one reads a RunConfig,
// writes its outputs under out_dir (atomically, file by file) and throws on
// failure: ConfigError / IncompatibleError for bad settings or mismatched
// inputs, anything else for pipeline failures.

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "affect_forge/analysis.hpp"
#include "affect_forge/crossdomain.hpp"
#include "affect_forge/dataset.hpp"
#include "affect_forge/level.hpp"
#include "affect_forge/log_matrix.hpp"
#include "affect_forge/metrics.hpp"
#include "affect_forge/parallel.hpp"
#include "affect_forge/run_config.hpp"
#include "affect_forge/session.hpp"
#include "affect_forge/split.hpp"
#include "affect_forge/synth.hpp"
#include "affect_forge/train.hpp"
#include "affect_forge/weights_io.hpp"

namespace affect_forge {

using Json = nlohmann::ordered_json;

/// Every random stream of a run, forked in a fixed order from the one seed.
struct SeedPlan {
    std::uint64_t split = 0, init = 0, train = 0, empty_logs = 0;

    static SeedPlan from(std::uint64_t seed) {
        Rng master(seed);
        SeedPlan p;
        p.split = master.fork_seed();
        p.init = master.fork_seed();
        p.train = master.fork_seed();
        p.empty_logs = master.fork_seed();
        return p;
    }
};

inline CropPreset parse_crop(std::string_view name) {
    if (name == "infinite-mario") return CropPreset::infinite_mario();
    if (name == "gwario") return CropPreset::gwario();
    if (name == "smb") return CropPreset::super_mario_bros();
    throw ConfigError("unknown crop preset '" + std::string(name) + "' (expected infinite-mario, gwario or smb)");
}

inline std::string checked_metric(const std::string& metric) {
    if (!is_known_metric(metric))
        throw ConfigError("unknown metric '" + metric + "' (expected fun, frustration or challenge)");
    return metric;
}

inline ModelVariant checked_variant(const std::string& v) {
    try {
        return parse_variant(v);
    } catch (const std::exception&) {
        throw ConfigError("unknown variant '" + v + "' (expected full or level-only)");
    }
}

inline TilePalette palette_from(const RunConfig& cfg) {
    if (auto p = cfg.optional_path("palette")) return TilePalette::load(*p);
    return TilePalette::default_palette();
}

inline std::optional<RemapTable> remap_from(const RunConfig& cfg, const TilePalette& palette) {
    auto p = cfg.optional_path("remap");
    if (!p) return std::nullopt;
    RemapTable t = RemapTable::load(*p);
    t.validate(palette);
    return t;
}

inline LevelSet levels_from(const RunConfig& cfg, const TilePalette& palette, std::string_view default_crop) {
    const auto dir = cfg.existing_path("levels_dir", true);
    const CropPreset crop = parse_crop(cfg.get_or("crop", std::string(default_crop)));
    const auto remap = remap_from(cfg, palette);
    return load_levels(dir, palette, crop, remap ? &*remap : nullptr);
}

inline void check_window(const RunConfig& cfg) {
    if (cfg.positive_size("window") != kWindow)
        throw ConfigError("window must be " + std::to_string(kWindow) + " (the network input is fixed)");
}

inline ModelConfig model_config_from(const RunConfig& cfg, const std::string& metric) {
    ModelConfig c = ModelConfig::standard();
    if (checked_variant(cfg.require("variant")) == ModelVariant::level_only) c = build_level_only_variant(c);
    c.keep_prob = cfg.positive_double("keep_prob");
    if (c.keep_prob > 1.0) throw ConfigError("keep_prob must be in (0, 1]");
    c.tie_chunk_weights = cfg.flag("tie_chunk_weights");
    c.metric = metric;
    return c;
}

inline SplitSpec split_spec_from(const RunConfig& cfg, std::uint64_t seed) {
    SplitSpec s;
    s.seed = seed;
    s.unit = parse_split_unit(cfg.require("split_unit"));
    return s;
}

/// Sessions, levels and labels of a telemetry corpus as stacked data points.
inline Dataset labeled_dataset_from(const RunConfig& cfg, const TilePalette& palette, const std::string& metric) {
    const auto sessions_dir = cfg.existing_path("sessions_dir", true);
    const auto manifest = cfg.existing_path("manifest");
    const auto labels_file = cfg.existing_path("labels");
    const std::size_t length = cfg.positive_size("session_length");
    if (length < kWindow) throw ConfigError("session_length must be at least " + std::to_string(kWindow));
    const Kinematics kin{cfg.positive_double("walk_speed"), cfg.positive_double("run_multiplier")};
    if (kin.run_multiplier < 1.0) throw ConfigError("run_multiplier must be at least 1");

    auto levels = std::make_shared<const LevelSet>(levels_from(cfg, palette, "infinite-mario"));
    const std::vector<RawSession> sessions = load_sessions(sessions_dir, manifest);
    if (sessions.empty()) throw ConfigError("manifest lists no sessions: " + manifest.string());
    std::vector<LogMatrix> encoded;
    encoded.reserve(sessions.size());
    for (const RawSession& s : sessions) {
        auto it = levels->find(s.level_index);
        if (it == levels->end())
            throw ConfigError("session " + session_id(s) + " refers to missing level " + std::to_string(s.level_index));
        encoded.push_back(encode_session(s, it->second.width(), kin));
    }
    auto logs = std::make_shared<const LogMatrix>(crop_and_stack(encoded, length));
    const LabelTable table = LabelTable::load(labels_file);
    return assemble_dataset(logs, levels, segment_labels(*logs, table, metric), WindowMode::stacked);
}

inline std::filesystem::path out_dir_from(const RunConfig& cfg) {
    const std::filesystem::path dir = cfg.require("out_dir");
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

inline Json counts_json(const std::array<std::size_t, 3>& c) {
    return Json{{"most", c[0]}, {"mid", c[1]}, {"least", c[2]}};
}

inline Json metrics_json(const MetricsReport& r) {
    Json j{{"points", r.count}, {"accuracy_pct", 100.0 * r.accuracy}};
    for (std::size_t c = 0; c < 3; ++c) {
        const char* name = to_string(kRankLabels[c]);
        j["precision_pct"][name] = r.class_accuracy[c] ? Json(100.0 * *r.class_accuracy[c]) : Json(nullptr);
        j["recall_pct"][name] = r.class_recall[c] ? Json(100.0 * *r.class_recall[c]) : Json(nullptr);
        j["prediction_rate_pct"][name] = 100.0 * r.prediction_rate[c];
    }
    return j;
}

inline ModelWeights weights_for(const RunConfig& cfg, const TilePalette& palette) {
    const auto path = cfg.existing_path("weights");
    ModelWeights w = load_weights(path, {std::nullopt, palette.fingerprint()});
    if (cfg.has("variant") && checked_variant(cfg.require("variant")) != w.config.variant)
        throw IncompatibleError("weights are a " + std::string(to_string(w.config.variant)) + " model, not " +
                                cfg.require("variant"));
    return w;
}

// ---------------------------------------------------------------------------

struct TrainRun {
    ModelWeights weights;
    std::vector<EpochRecord> history;
    MetricsReport test;
    SplitSizes sizes;
    std::filesystem::path weights_path;
};

inline TrainRun cmd_train(const RunConfig& cfg, std::ostream* progress = nullptr) {
    const std::string metric = checked_metric(cfg.require("metric"));
    check_window(cfg);
    const std::uint64_t seed = cfg.seed();
    const ModelConfig mc = model_config_from(cfg, metric);
    TrainOptions opt;
    opt.epochs = cfg.positive_size("epochs");
    opt.batch_size = cfg.positive_size("batch");
    opt.adam.learning_rate = cfg.positive_double("lr");
    opt.threads = resolve_threads();
    const TilePalette palette = palette_from(cfg);
    const std::filesystem::path out = out_dir_from(cfg);
    const std::filesystem::path weights_path =
        cfg.get("weights") && !cfg.require("weights").empty() ? std::filesystem::path(cfg.require("weights"))
                                                              : out / "weights.afw";

    const Dataset data = labeled_dataset_from(cfg, palette, metric);
    const SeedPlan seeds = SeedPlan::from(seed);
    const DataSplit parts = split(data, split_spec_from(cfg, seeds.split));
    if (progress)
        *progress << "data: " << data.size() << " points, train " << parts.train.size() << ", val "
                  << parts.val.size() << ", test " << parts.test.size() << "\n";

    const AffectModel model(mc);
    Rng init_rng(seeds.init);
    opt.seed = seeds.train;
    opt.on_epoch = [&](const EpochRecord& r, const ParameterStore&) {
        if (progress) {
            *progress << "epoch " << r.epoch << "/" << opt.epochs << " loss " << format_fixed(r.train_loss, 5);
            if (r.val_accuracy) *progress << " val " << percent(*r.val_accuracy) << "%";
            *progress << "\n" << std::flush;
        }
        return true;
    };
    TrainResult result = train(model, model.init_parameters(init_rng), parts.train, parts.val, opt);

    TrainRun run;
    run.test = evaluate(model, result.params, parts.test.empty() ? parts.train : parts.test, opt.threads);
    run.sizes = {parts.train.size(), parts.val.size(), parts.test.size()};
    run.history = std::move(result.history);
    run.weights = ModelWeights{mc, std::move(result.params), palette.fingerprint(), seed};
    run.weights_path = weights_path;

    if (weights_path.has_parent_path()) std::filesystem::create_directories(weights_path.parent_path());
    save_weights(run.weights, weights_path);
    write_file_atomic(out / "history.tsv", history_tsv(run.history));
    write_file_atomic(out / "metrics.tsv", to_tsv(run.test));
    Json s{{"command", "train"},
           {"metric", metric},
           {"variant", to_string(mc.variant)},
           {"seed", seed},
           {"concat_width", model.concat_width()},
           {"points", data.size()},
           {"class_counts", counts_json(data.class_counts())},
           {"split", {{"train", parts.train.size()}, {"val", parts.val.size()}, {"test", parts.test.size()}}},
           {"epochs_run", run.history.size()},
           {"final_train_loss", run.history.empty() ? 0.0 : run.history.back().train_loss},
           {"weights_sha256", to_hex(sha256(encode_weights(run.weights)))},
           {"test", metrics_json(run.test)}};
    write_json(out / "summary.json", s);
    return run;
}

// ---------------------------------------------------------------------------

/// Re-evaluates trained weights on the telemetry corpus. The split is rebuilt
/// from the seed stored in the weights unless a seed is configured.
inline MetricsReport cmd_eval(const RunConfig& cfg) {
    check_window(cfg);
    const TilePalette palette = palette_from(cfg);
    const ModelWeights w = weights_for(cfg, palette);
    const std::string metric = checked_metric(cfg.has("metric") ? cfg.require("metric") : w.config.metric);
    const std::uint64_t seed = cfg.has("seed") ? cfg.seed() : w.seed;
    const std::string which = cfg.require("eval_split");
    if (which != "test" && which != "all") throw ConfigError("eval_split must be test or all, got '" + which + "'");
    const std::filesystem::path out = out_dir_from(cfg);

    const Dataset data = labeled_dataset_from(cfg, palette, metric);
    const Dataset target = which == "all" ? data : split(data, split_spec_from(cfg, SeedPlan::from(seed).split)).test;
    const AffectModel model(w.config);
    const MetricsReport report = evaluate(model, w.params, target, resolve_threads());
    write_file_atomic(out / "metrics.tsv", to_tsv(report));
    write_json(out / "summary.json", Json{{"command", "eval"},
                                          {"metric", metric},
                                          {"variant", to_string(w.config.variant)},
                                          {"seed", seed},
                                          {"eval_split", which},
                                          {"class_counts", counts_json(target.class_counts())},
                                          {"metrics", metrics_json(report)}});
    return report;
}

// ---------------------------------------------------------------------------

struct CrossEvalRun {
    std::optional<MetricsReport> metrics;    // rated levels
    std::optional<OrderingReport> ordering;  // ordered levels
    std::size_t points = 0;
};

/// Levels without telemetry, scored over stand-in logs. With a ratings file
/// the levels get most/mid/least labels from their mean ratings; with
/// ordered_levels the file order is taken as increasing difficulty.
inline CrossEvalRun cmd_crosseval(const RunConfig& cfg) {
    const bool ordered = cfg.flag("ordered_levels");
    const bool rated = cfg.get("ratings").has_value();
    if (ordered == rated) throw ConfigError("crosseval needs exactly one of a ratings file or ordered_levels");
    const TilePalette palette = palette_from(cfg);
    const ModelWeights w = weights_for(cfg, palette);
    const std::uint64_t seed = cfg.has("seed") ? cfg.seed() : w.seed;
    const std::filesystem::path out = out_dir_from(cfg);
    const LevelSet levels = levels_from(cfg, palette, ordered ? "smb" : "gwario");
    const AffectModel model(w.config);
    Rng rng(SeedPlan::from(seed).empty_logs);
    const std::size_t threads = resolve_threads();

    CrossEvalRun run;
    Json s{{"command", "crosseval"},
           {"mode", ordered ? "ordered" : "rated"},
           {"model_metric", w.config.metric},
           {"variant", to_string(w.config.variant)},
           {"seed", seed},
           {"levels", levels.size()}};
    if (rated) {
        const std::string metric = checked_metric(cfg.has("metric") ? cfg.require("metric") : w.config.metric);
        const RatingsTable ratings = RatingsTable::load(cfg.existing_path("ratings"));
        const Dataset data = empty_log_dataset(levels, level_labels_from_ratings(levels, ratings, metric), rng);
        run.metrics = evaluate(model, w.params, data, threads);
        run.points = data.size();
        write_file_atomic(out / "metrics.tsv", to_tsv(*run.metrics));
        s["metric"] = metric;
        s["points"] = data.size();
        s["class_counts"] = counts_json(data.class_counts());
        s["metrics"] = metrics_json(*run.metrics);
    } else {
        run.ordering = challenge_ordering_report(model_predictor(model, w.params), levels, rng, threads);
        for (const auto& r : run.ordering->rows) run.points += r.points;
        write_file_atomic(out / "ordering.tsv", ordering_tsv(*run.ordering));
        write_file_atomic(out / "spearman.tsv", spearman_tsv(*run.ordering));
        s["points"] = run.points;
        for (std::size_t c = 0; c < 3; ++c) {
            const SpearmanOutcome& t = run.ordering->tests[c];
            Json row;
            if (t.result)
                row = Json{{"rho", t.result->rho}, {"p_value", t.result->p_value},
                           {"ci95", {t.result->ci_low, t.result->ci_high}}};
            else
                row = Json{{"error", t.error}};
            s["spearman"][to_string(kRankLabels[c])] = row;
        }
    }
    write_json(out / "summary.json", s);
    return run;
}

// ---------------------------------------------------------------------------

inline std::vector<ActivationRecord> cmd_analyze(const RunConfig& cfg) {
    const TilePalette palette = palette_from(cfg);
    const ModelWeights w = weights_for(cfg, palette);
    const std::size_t scale = cfg.positive_size("scale");
    const std::filesystem::path out = out_dir_from(cfg);
    const LevelSet levels = levels_from(cfg, palette, "infinite-mario");
    const AffectModel model(w.config);
    const std::vector<ActivationRecord> records = max_activating_chunks(model, w.params, levels);

    std::filesystem::create_directories(out / "chunks");
    for (const ActivationRecord& r : records) {
        write_file_atomic(out / "chunks" / (record_stem(r) + ".ppm"), render_ppm(r.patch, palette, scale));
        write_file_atomic(out / "chunks" / (record_stem(r) + ".txt"), render_ascii(r.patch, palette));
    }
    write_file_atomic(out / "activations.tsv", activation_index_tsv(records));
    return records;
}

// ---------------------------------------------------------------------------

/// A complete synthetic workspace: telemetry corpus, rated and ordered
/// foreign corpora, tile configs, and ready-to-run config files.
inline void cmd_synth(const RunConfig& cfg) {
    const std::uint64_t seed = cfg.seed();
    const std::filesystem::path out = out_dir_from(cfg);
    SynthSpec spec;
    spec.seed = seed;
    spec.players = cfg.positive_size("synth_players");
    spec.levels = cfg.positive_size("synth_levels");
    spec.session_length = cfg.positive_size("synth_length");
    const SynthCorpus corpus = generate(spec);
    write_corpus(corpus, out / "infinite");
    write_foreign(generate_gwario(seed), out / "gwario");
    write_foreign(generate_smb(seed), out / "smb");

    std::filesystem::create_directories(out / "configs");
    write_file_atomic(out / "configs" / "infinite-mario.palette",
                      "# Tile channels in order: tile = <name> <symbol> <#rrggbb>\n" +
                          TilePalette::default_palette().canonical_text());
    write_file_atomic(out / "configs" / "gwario.remap", kGwarioRemapText);
    write_file_atomic(out / "configs" / "smb.remap", kSmbRemapText);

    const std::string seed_line = "seed = " + std::to_string(seed) + "\n";
    write_file_atomic(out / "train.cfg", "levels_dir = infinite/levels\n"
                                         "sessions_dir = infinite/sessions\n"
                                         "manifest = infinite/manifest.txt\n"
                                         "labels = infinite/labels.tsv\n"
                                         "palette = configs/infinite-mario.palette\n"
                                         "weights = runs/train/weights.afw\n"
                                         "out_dir = runs/train\n" +
                                             seed_line);
    write_file_atomic(out / "gwario.cfg", "levels_dir = gwario/levels\n"
                                          "ratings = gwario/ratings.tsv\n"
                                          "remap = configs/gwario.remap\n"
                                          "palette = configs/infinite-mario.palette\n"
                                          "crop = gwario\n"
                                          "weights = runs/train/weights.afw\n"
                                          "out_dir = runs/gwario\n");
    write_file_atomic(out / "smb.cfg", "levels_dir = smb/levels\n"
                                       "remap = configs/smb.remap\n"
                                       "palette = configs/infinite-mario.palette\n"
                                       "crop = smb\n"
                                       "ordered_levels = true\n"
                                       "weights = runs/train/weights.afw\n"
                                       "out_dir = runs/smb\n");
}

} // namespace affect_forge
