#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "affect_forge/dataset.hpp"
#include "affect_forge/error.hpp"
#include "affect_forge/rng.hpp"

namespace affect_forge {

enum class SplitUnit { point, session };

inline SplitUnit parse_split_unit(std::string_view s) {
    if (s == "point") return SplitUnit::point;
    if (s == "session") return SplitUnit::session;
    throw ConfigError("split unit must be point or session, got '" + std::string(s) + "'");
}

struct SplitSpec {
    double train = 0.8, val = 0.1, test = 0.1;
    std::uint64_t seed = 0;
    /// Point-level splitting puts neighbouring, overlapping windows on both
    /// sides of the split, which inflates test accuracy. Session-level keeps
    /// every window of a session together.
    SplitUnit unit = SplitUnit::point;

    void validate() const {
        if (train < 0 || val < 0 || test < 0 || std::abs(train + val + test - 1.0) > 1e-9)
            throw ConfigError("split fractions must be non-negative and sum to 1");
    }
};

struct SplitSizes {
    std::size_t train, val, test;
};

/// val and test sizes are the rounded fractions of n; train takes the rest.
inline SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
    const auto val = static_cast<std::size_t>(std::llround(spec.val * static_cast<double>(n)));
    const auto test = static_cast<std::size_t>(std::llround(spec.test * static_cast<double>(n)));
    if (val + test > n) throw std::invalid_argument("split leaves no room for training data");
    return {n - val - test, val, test};
}

struct DataSplit {
    Dataset train, val, test;
};

inline DataSplit split(const Dataset& data, const SplitSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    std::vector<std::size_t> train, val, test;
    if (spec.unit == SplitUnit::point) {
        if (data.size() < 10) throw std::invalid_argument("need at least 10 points to split");
        std::vector<std::size_t> order(data.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(std::span<std::size_t>(order), rng);
        const SplitSizes sz = split_sizes(data.size(), spec);
        test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sz.test));
        val.assign(order.begin() + static_cast<std::ptrdiff_t>(sz.test),
                   order.begin() + static_cast<std::ptrdiff_t>(sz.test + sz.val));
        train.assign(order.begin() + static_cast<std::ptrdiff_t>(sz.test + sz.val), order.end());
    } else {
        // Whole sessions are dealt to test, then val, until each reaches its
        // target point count; the remainder trains.
        const std::size_t n_segments = data.logs().segments().size();
        std::vector<std::vector<std::size_t>> by_segment(n_segments);
        for (std::size_t i = 0; i < data.size(); ++i) by_segment[data[i].segment].push_back(i);
        std::vector<std::size_t> order(n_segments);
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(std::span<std::size_t>(order), rng);
        const SplitSizes sz = split_sizes(data.size(), spec);
        for (std::size_t s : order) {
            auto& dst = test.size() < sz.test ? test : (val.size() < sz.val ? val : train);
            dst.insert(dst.end(), by_segment[s].begin(), by_segment[s].end());
        }
    }
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    std::sort(test.begin(), test.end());
    return {data.subset(train), data.subset(val), data.subset(test)};
}

} // namespace affect_forge
