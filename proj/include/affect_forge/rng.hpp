#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>

namespace affect_forge {

/// Seedable generator used for every random decision in the pipeline
/// (initialization, dropout masks, shuffles, synthetic data).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The std distributions are implementation-defined, so the
/// conversions to doubles and bounded integers are done here instead to keep
/// results bit-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::size_t uniform_index(std::size_t n) {
        if (n <= 1) return 0;
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return static_cast<std::size_t>(r % bound);
    }

    int uniform_int(int lo, int hi_inclusive) {
        return lo + static_cast<int>(uniform_index(static_cast<std::size_t>(hi_inclusive - lo + 1)));
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Derive an independent child seed (used to hand per-item generators to workers).
    std::uint64_t fork_seed() { return engine_() ^ 0x9E3779B97F4A7C15ULL; }

private:
    std::mt19937_64 engine_;
};

/// Fisher-Yates shuffle driven by Rng.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_index(i);
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace affect_forge
