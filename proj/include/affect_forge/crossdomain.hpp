#pragma once

// Evaluation on levels that come without telemetry: every level gets stand-in
// logs (see synthesize_empty_logs) and one data point per tile column.

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "affect_forge/dataset.hpp"
#include "affect_forge/log_matrix.hpp"
#include "affect_forge/metrics.hpp"
#include "affect_forge/ranking.hpp"
#include "affect_forge/spearman.hpp"

namespace affect_forge {

/// Data points over stand-in logs for `levels` (in key order), each level's
/// points carrying `labels.at(level index)`.
inline Dataset empty_log_dataset(const LevelSet& levels, const std::map<int, RankLabel>& labels, Rng& rng) {
    std::vector<EmptyLogLevel> spec;
    std::vector<RankLabel> seg_labels;
    for (const auto& [index, grid] : levels) {
        spec.push_back({index, grid.width()});
        auto it = labels.find(index);
        if (it == labels.end()) throw ConfigError("no label for level " + std::to_string(index));
        seg_labels.push_back(it->second);
    }
    auto logs = std::make_shared<const LogMatrix>(synthesize_empty_logs(spec, rng));
    return assemble_dataset(std::move(logs), std::make_shared<const LevelSet>(levels), seg_labels,
                            WindowMode::per_segment);
}

/// Level labels from mean ratings; every level in `levels` must be rated.
inline std::map<int, RankLabel> level_labels_from_ratings(const LevelSet& levels, const RatingsTable& ratings,
                                                          const std::string& metric) {
    const std::map<int, double> means = ratings.means(metric);
    std::vector<double> ordered;
    for (const auto& [index, grid] : levels) {
        auto it = means.find(index);
        if (it == means.end()) throw ConfigError("level " + std::to_string(index) + " has no " + metric + " ratings");
        ordered.push_back(it->second);
    }
    const std::vector<RankLabel> ranks = ratings_to_rankings(ordered);
    std::map<int, RankLabel> out;
    std::size_t i = 0;
    for (const auto& entry : levels) out[entry.first] = ranks[i++];
    return out;
}

struct OrderingRow {
    int level_index = 0;
    std::size_t points = 0;
    std::array<double, 3> rates{};  // fraction of points predicted most / mid / least
};

struct SpearmanOutcome {
    std::optional<SpearmanResult> result;
    std::string error;  // set when the correlation is undefined
};

struct OrderingReport {
    std::vector<OrderingRow> rows;
    std::array<SpearmanOutcome, 3> tests;  // each class rate against level order
};

/// Correlates each class's prediction rate with row order (0, 1, 2, ...).
inline OrderingReport ordering_report(std::vector<OrderingRow> rows) {
    OrderingReport rep;
    rep.rows = std::move(rows);
    std::vector<double> order(rep.rows.size());
    std::iota(order.begin(), order.end(), 0.0);
    for (std::size_t c = 0; c < 3; ++c) {
        std::vector<double> rates;
        for (const auto& r : rep.rows) rates.push_back(r.rates[c]);
        try {
            rep.tests[c].result = spearman_rho(order, rates);
        } catch (const std::exception& e) {
            rep.tests[c].error = e.what();
        }
    }
    return rep;
}

using Predictor = std::function<Tensor(const ModelInput&)>;

/// Per-level prediction rates over stand-in logs for levels given in play
/// order, plus the three Spearman tests. Labels are irrelevant here.
inline OrderingReport challenge_ordering_report(const Predictor& predictor, const LevelSet& levels, Rng& rng,
                                                std::size_t threads = resolve_threads()) {
    std::map<int, RankLabel> placeholder;
    for (const auto& entry : levels) placeholder[entry.first] = RankLabel::mid;
    const Dataset data = empty_log_dataset(levels, placeholder, rng);
    std::vector<std::size_t> predicted(data.size());
    parallel_for(data.size(), threads, [&](std::size_t i) { predicted[i] = argmax_label(predictor(data.materialize(i))); });

    std::vector<OrderingRow> rows;
    for (const auto& seg : data.logs().segments()) rows.push_back({seg.level_index, 0, {}});
    std::vector<std::array<std::size_t, 3>> counts(rows.size());
    for (std::size_t i = 0; i < data.size(); ++i) ++counts[data[i].segment][predicted[i]];
    for (std::size_t s = 0; s < rows.size(); ++s) {
        rows[s].points = counts[s][0] + counts[s][1] + counts[s][2];
        for (std::size_t c = 0; c < 3; ++c)
            rows[s].rates[c] = static_cast<double>(counts[s][c]) / static_cast<double>(rows[s].points);
    }
    return ordering_report(std::move(rows));
}

inline Predictor model_predictor(const AffectModel& model, const ParameterStore& params) {
    return [&model, &params](const ModelInput& in) {
        Rng unused(0);
        return model.forward(params, in, false, unused);
    };
}

inline std::string ordering_tsv(const OrderingReport& rep) {
    std::ostringstream os;
    os << "level\tmost_pct\tmid_pct\tleast_pct\tpoints\n";
    for (const auto& r : rep.rows)
        os << r.level_index << '\t' << percent(r.rates[0]) << '\t' << percent(r.rates[1]) << '\t'
           << percent(r.rates[2]) << '\t' << r.points << '\n';
    return os.str();
}

inline std::string spearman_tsv(const OrderingReport& rep) {
    std::ostringstream os;
    os << "class\trho\tp_value\tci95_low\tci95_high\terror\n";
    for (std::size_t c = 0; c < 3; ++c) {
        os << to_string(kRankLabels[c]);
        if (const auto& r = rep.tests[c].result)
            os << '\t' << format_fixed(r->rho, 4) << '\t' << format_double(r->p_value) << '\t'
               << format_fixed(r->ci_low, 2) << '\t' << format_fixed(r->ci_high, 2) << "\t\n";
        else
            os << "\tNA\tNA\tNA\tNA\t" << rep.tests[c].error << '\n';
    }
    return os.str();
}

} // namespace affect_forge
