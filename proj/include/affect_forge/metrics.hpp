#pragma once

#include <array>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "affect_forge/dataset.hpp"
#include "affect_forge/model.hpp"
#include "affect_forge/parallel.hpp"
#include "affect_forge/text_io.hpp"

namespace affect_forge {

/// Index of the largest probability; ties go to the lower index.
inline std::size_t argmax_label(const Tensor& probs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best]) best = i;
    return best;
}

/// Fractions in [0, 1]. `class_accuracy` is the share of predictions of a
/// class that were right (undefined when the class is never predicted), the
/// per-class figure reported next to prediction rates; `class_recall` is the
/// share of a class's points recovered.
struct MetricsReport {
    std::size_t count = 0;
    double accuracy = 0.0;
    std::array<std::optional<double>, 3> class_accuracy{};
    std::array<std::optional<double>, 3> class_recall{};
    std::array<double, 3> prediction_rate{};
    std::array<std::size_t, 3> support{};
    std::array<std::array<std::size_t, 3>, 3> confusion{};  // [true][predicted]
};

inline MetricsReport evaluate_predictions(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
    if (predicted.size() != truth.size()) throw std::invalid_argument("prediction and label counts differ");
    if (predicted.empty()) throw std::invalid_argument("cannot evaluate an empty set");
    MetricsReport r;
    r.count = predicted.size();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] >= 3 || truth[i] >= 3) throw std::invalid_argument("class index out of range");
        ++r.confusion[truth[i]][predicted[i]];
        ++r.support[truth[i]];
        if (predicted[i] == truth[i]) ++correct;
    }
    const double n = static_cast<double>(r.count);
    r.accuracy = static_cast<double>(correct) / n;
    for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t predicted_c = r.confusion[0][c] + r.confusion[1][c] + r.confusion[2][c];
        r.prediction_rate[c] = static_cast<double>(predicted_c) / n;
        if (predicted_c) r.class_accuracy[c] = static_cast<double>(r.confusion[c][c]) / static_cast<double>(predicted_c);
        if (r.support[c]) r.class_recall[c] = static_cast<double>(r.confusion[c][c]) / static_cast<double>(r.support[c]);
    }
    return r;
}

/// Eval-mode class probabilities for every point, in dataset order.
inline std::vector<Tensor> predict(const AffectModel& model, const ParameterStore& params, const Dataset& data,
                                   std::size_t threads = resolve_threads()) {
    std::vector<Tensor> out(data.size());
    parallel_for(data.size(), threads, [&](std::size_t i) {
        Rng unused(0);
        out[i] = model.forward(params, data.materialize(i), false, unused);
    });
    return out;
}

inline MetricsReport evaluate(const AffectModel& model, const ParameterStore& params, const Dataset& data,
                              std::size_t threads = resolve_threads()) {
    const std::vector<Tensor> probs = predict(model, params, data, threads);
    std::vector<std::size_t> predicted(data.size()), truth(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        predicted[i] = argmax_label(probs[i]);
        truth[i] = index_of(data[i].label);
    }
    return evaluate_predictions(predicted, truth);
}

inline std::string percent(double fraction) { return format_fixed(100.0 * fraction, 2); }

/// Per-class table: accuracy and prediction-rate rows, then the confusion matrix.
inline std::string to_tsv(const MetricsReport& r) {
    std::ostringstream os;
    os << "row\tmost\tmid\tleast\ttotal\n";
    os << "accuracy_pct";
    for (const auto& a : r.class_accuracy) os << '\t' << (a ? percent(*a) : "NA");
    os << '\t' << percent(r.accuracy) << '\n';
    os << "prediction_rate_pct";
    for (double p : r.prediction_rate) os << '\t' << percent(p);
    os << "\t100.00\n";
    os << "recall_pct";
    for (const auto& a : r.class_recall) os << '\t' << (a ? percent(*a) : "NA");
    os << "\tNA\n";
    os << "support";
    for (std::size_t s : r.support) os << '\t' << s;
    os << '\t' << r.count << '\n';
    for (std::size_t t = 0; t < 3; ++t) {
        os << "true_" << to_string(kRankLabels[t]);
        for (std::size_t p = 0; p < 3; ++p) os << '\t' << r.confusion[t][p];
        os << '\t' << r.support[t] << '\n';
    }
    return os.str();
}

} // namespace affect_forge
