#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

#include "affect_forge/error.hpp"
#include "affect_forge/text_io.hpp"

namespace affect_forge {

inline constexpr const char* kThreadsEnv = "AFFECT_FORGE_THREADS";

/// Worker count: AFFECT_FORGE_THREADS when set, otherwise the hardware
/// concurrency. Results never depend on this value.
inline std::size_t resolve_threads() {
    if (const char* env = std::getenv(kThreadsEnv); env && *env) {
        const auto n = parse_int<std::size_t>(env);
        if (!n || *n == 0) throw ConfigError(std::string(kThreadsEnv) + " must be a positive integer, got '" + env + "'");
        return *n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs task(i) for i in [0, n) on up to `threads` threads. Tasks are handed
/// out in contiguous blocks; the first exception is rethrown after all
/// threads join.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& task) {
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = n * w / threads; i < n * (w + 1) / threads; ++i) task(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace affect_forge
