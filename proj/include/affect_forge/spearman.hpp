#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "affect_forge/error.hpp"

namespace affect_forge {

/// 1-based ranks; tied values share the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelationError("correlation undefined: an input has zero variance");
    return sxy / std::sqrt(sxx * syy);
}

enum class PValueMethod {
    t_approximation,
    /// Enumerates every permutation of the second input; n <= 10 only.
    exact_permutation,
};

struct SpearmanResult {
    std::size_t n = 0;
    double rho = 0.0;
    double p_value = 1.0;  // two-sided
    double ci_low = 0.0, ci_high = 0.0;  // 95%, Fisher z
};

inline constexpr double kZ975 = 1.959963984540054;

/// Two-sided p from t = rho * sqrt((n - 2) / (1 - rho^2)) on n - 2 degrees of freedom.
inline double spearman_t_pvalue(double rho, std::size_t n) {
    if (std::abs(rho) >= 1.0) return 0.0;
    const double df = static_cast<double>(n - 2);
    const double t = rho * std::sqrt(df / (1.0 - rho * rho));
    const boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

inline double spearman_permutation_pvalue(const std::vector<double>& rx, const std::vector<double>& ry) {
    const std::size_t n = rx.size();
    if (n > 10) throw std::invalid_argument("exact permutation test is limited to n <= 10");
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(n);
    auto centred_dot = [&](const std::vector<double>& y) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += (rx[i] - mx) * (y[i] - my);
        return s;
    };
    const double observed = std::abs(centred_dot(ry));
    std::vector<double> perm = ry;
    std::sort(perm.begin(), perm.end());
    std::size_t hits = 0, total = 0;
    do {
        ++total;
        if (std::abs(centred_dot(perm)) >= observed - 1e-9) ++hits;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(hits) / static_cast<double>(total);
}

inline SpearmanResult spearman_rho(std::span<const double> xs, std::span<const double> ys,
                                   PValueMethod method = PValueMethod::t_approximation) {
    if (xs.size() != ys.size()) throw std::invalid_argument("spearman inputs differ in length");
    if (xs.size() < 4) throw std::invalid_argument("spearman needs at least 4 pairs");
    const std::vector<double> rx = average_ranks(xs), ry = average_ranks(ys);
    SpearmanResult r;
    r.n = xs.size();
    r.rho = std::clamp(pearson(rx, ry), -1.0, 1.0);
    r.p_value = method == PValueMethod::t_approximation ? spearman_t_pvalue(r.rho, r.n)
                                                        : spearman_permutation_pvalue(rx, ry);
    if (std::abs(r.rho) >= 1.0) {
        r.ci_low = r.ci_high = r.rho;
    } else {
        const double z = std::atanh(r.rho);
        const double half = kZ975 / std::sqrt(static_cast<double>(r.n) - 3.0);
        r.ci_low = std::tanh(z - half);
        r.ci_high = std::tanh(z + half);
    }
    return r;
}

} // namespace affect_forge
