// affect_forge: train, evaluate and inspect level/telemetry affect models.
//
// Exit status: 0 success, 1 pipeline failure, 2 bad configuration or inputs.

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "affect_forge/pipeline.hpp"
#include "affect_forge/selfcheck.hpp"

namespace af = affect_forge;

namespace {

std::string flag_name(std::string_view key) {
    std::string s = "--";
    for (char c : key) s += c == '_' ? '-' : c;
    return s;
}

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

int run_selftest(const std::string& weights) {
    std::optional<std::filesystem::path> wpath;
    if (!weights.empty()) wpath = weights;
    bool all = true;
    for (const auto& r : af::run_selftest(wpath)) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
        all = all && r.passed;
    }
    std::cout << (all ? "selftest passed" : "selftest FAILED") << std::endl;
    return all ? 0 : 1;
}

void print_metrics(const af::MetricsReport& r) {
    std::cout << "accuracy " << af::percent(r.accuracy) << "% over " << r.count << " points\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Affect prediction from platformer levels and gameplay logs"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("--config", config_path, "Key-value config file");

    // One flag per config key; flag values override the file.
    std::map<std::string, std::string> given;
    for (const auto& k : af::RunConfig::kKeys) {
        const std::string key(k.name);
        if (key == "ordered_levels") continue;
        std::string help = std::string(k.is_path ? "path" : "setting") + " " + key;
        auto* opt = app.add_option_function<std::string>(
            flag_name(key), [&given, key](const std::string& v) { given[key] = v; }, help);
        if (key == "metric") opt->check(CLI::IsMember({"fun", "frustration", "challenge"}));
        if (key == "variant") opt->check(CLI::IsMember({"full", "level-only"}));
    }
    app.add_flag_callback("--ordered-levels", [&given] { given["ordered_levels"] = "true"; },
                          "Levels are in increasing difficulty order (no ratings)");

    auto* train = app.add_subcommand("train", "Train on a telemetry corpus and report test metrics");
    auto* eval = app.add_subcommand("eval", "Evaluate trained weights on a telemetry corpus");
    auto* crosseval = app.add_subcommand("crosseval", "Evaluate trained weights on levels without telemetry");
    auto* analyze = app.add_subcommand("analyze", "Maximally activating level patches of the first chunk filters");
    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus with ready-to-run configs");
    auto* selftest = app.add_subcommand("selftest", "Gradient, shape and statistics checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "affect_forge: " << one_line(e.what()) << "\n";
        return 2;
    }

    try {
        if (selftest->parsed()) return run_selftest(given.count("weights") ? given["weights"] : "");

        af::RunConfig cfg;
        if (!config_path.empty()) cfg.merge_file(config_path);
        for (const auto& [k, v] : given) cfg.set(k, v);

        if (train->parsed()) {
            const auto run = af::cmd_train(cfg, &std::cerr);
            print_metrics(run.test);
            std::cout << "weights " << run.weights_path.string() << "\n";
        } else if (eval->parsed()) {
            print_metrics(af::cmd_eval(cfg));
        } else if (crosseval->parsed()) {
            const auto run = af::cmd_crosseval(cfg);
            if (run.metrics) print_metrics(*run.metrics);
            if (run.ordering) std::cout << af::spearman_tsv(*run.ordering);
        } else if (analyze->parsed()) {
            std::cout << af::cmd_analyze(cfg).size() << " activation records\n";
        } else if (synth->parsed()) {
            af::cmd_synth(cfg);
            std::cout << "synthetic workspace written to " << cfg.require("out_dir") << "\n";
        }
        return 0;
    } catch (const af::ConfigError& e) {
        std::cerr << "affect_forge: config error: " << one_line(e.what()) << "\n";
        return 2;
    } catch (const af::IncompatibleError& e) {
        std::cerr << "affect_forge: incompatible input: " << one_line(e.what()) << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "affect_forge: error: " << one_line(e.what()) << "\n";
        return 1;
    }
}
