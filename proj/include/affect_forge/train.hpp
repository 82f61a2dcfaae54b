#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "affect_forge/dataset.hpp"
#include "affect_forge/error.hpp"
#include "affect_forge/metrics.hpp"
#include "affect_forge/model.hpp"
#include "affect_forge/parallel.hpp"
#include "affect_forge/parameter.hpp"

namespace affect_forge {

/// A batch is cut into this many fixed shards whatever the thread count, and
/// shard gradients are summed in shard order, so results are bit-identical
/// for any AFFECT_FORGE_THREADS.
inline constexpr std::size_t kBatchShards = 4;

struct BatchGradients {
    double mean_loss = 0.0;
    Gradients grads;  // mean over the batch
};

/// Mean cross-entropy over `batch` (indices into `data`) and its gradient.
/// One dropout seed per point is drawn from `rng` in batch order before any
/// work is dispatched.
inline BatchGradients loss_and_grads(const AffectModel& model, const ParameterStore& params, const Dataset& data,
                                     std::span<const std::size_t> batch, Rng& rng, bool training = true,
                                     std::size_t threads = resolve_threads()) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    std::vector<std::uint64_t> seeds(batch.size());
    for (auto& s : seeds) s = rng.fork_seed();

    const std::size_t n = batch.size();
    const std::size_t shards = std::min(kBatchShards, n);
    std::vector<Gradients> shard_grads(shards);
    std::vector<double> shard_loss(shards, 0.0);
    parallel_for(shards, threads, [&](std::size_t s) {
        shard_grads[s] = params.zero_gradients();
        for (std::size_t i = n * s / shards; i < n * (s + 1) / shards; ++i) {
            Rng point_rng(seeds[i]);
            const ForwardTrace tr = model.forward_trace(params, data.materialize(batch[i]), training, point_rng);
            shard_loss[s] += model.backward(params, tr, index_of(data[batch[i]].label), shard_grads[s]);
        }
    });

    BatchGradients out{0.0, std::move(shard_grads[0])};
    for (std::size_t s = 1; s < shards; ++s)
        for (std::size_t p = 0; p < out.grads.size(); ++p) out.grads[p] += shard_grads[s][p];
    double loss = 0.0;
    for (double l : shard_loss) loss += l;
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& g : out.grads) g *= inv;
    out.mean_loss = loss * inv;
    return out;
}

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    std::optional<double> val_accuracy;
};

struct TrainOptions {
    std::size_t epochs = 15;
    std::size_t batch_size = 32;
    AdamOptions adam{};
    std::uint64_t seed = 0;
    std::size_t threads = resolve_threads();
    /// Called after every epoch; returning false ends training early.
    std::function<bool(const EpochRecord&, const ParameterStore&)> on_epoch;
};

struct TrainResult {
    ParameterStore params;
    std::vector<EpochRecord> history;
};

/// Adam over shuffled mini-batches for a fixed number of epochs; the returned
/// weights are those after the last epoch.
inline TrainResult train(const AffectModel& model, ParameterStore params, const Dataset& train_set,
                         const Dataset& val_set, const TrainOptions& opt) {
    if (train_set.empty()) throw std::invalid_argument("training set is empty");
    if (opt.batch_size == 0 || opt.epochs == 0) throw ConfigError("epochs and batch size must be positive");
    model.check_parameters(params);
    Rng rng(opt.seed);
    TrainResult result;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
        shuffle(std::span<std::size_t>(order), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0, b = 0; start < order.size(); start += opt.batch_size, ++b) {
            const std::size_t len = std::min(opt.batch_size, order.size() - start);
            const auto batch = std::span<const std::size_t>(order).subspan(start, len);
            BatchGradients bg = loss_and_grads(model, params, train_set, batch, rng, true, opt.threads);
            if (!std::isfinite(bg.mean_loss)) {
                std::ostringstream os;
                os << "training diverged: loss " << bg.mean_loss << " at epoch " << epoch << ", batch " << b
                   << " (learning rate " << opt.adam.learning_rate << ")";
                throw DivergenceError(os.str());
            }
            loss_sum += bg.mean_loss * static_cast<double>(len);
            params.accumulate(bg.grads);
            adam_step(params, opt.adam);
        }
        EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()), std::nullopt};
        if (!val_set.empty()) rec.val_accuracy = evaluate(model, params, val_set, opt.threads).accuracy;
        result.history.push_back(rec);
        if (opt.on_epoch && !opt.on_epoch(rec, params)) break;
    }
    result.params = std::move(params);
    return result;
}

inline std::string history_tsv(const std::vector<EpochRecord>& history) {
    std::ostringstream os;
    os << "epoch\ttrain_loss\tval_accuracy_pct\n";
    for (const auto& r : history)
        os << r.epoch << '\t' << format_double(r.train_loss) << '\t'
           << (r.val_accuracy ? percent(*r.val_accuracy) : "NA") << '\n';
    return os.str();
}

} // namespace affect_forge
