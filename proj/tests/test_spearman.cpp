#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "affect_forge/crossdomain.hpp"
#include "affect_forge/rng.hpp"
#include "affect_forge/selfcheck.hpp"
#include "affect_forge/spearman.hpp"

using namespace affect_forge;

namespace {

std::vector<double> iota_vec(std::size_t n) {
    std::vector<double> v(n);
    std::iota(v.begin(), v.end(), 0.0);
    return v;
}

std::vector<double> as_vector(const std::array<double, 15>& a) { return {a.begin(), a.end()}; }

// No-ties closed form 1 - 6 sum d^2 / (n (n^2 - 1)), ranks found by counting.
double rho_no_ties(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double d2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double rx = 1, ry = 1;
        for (std::size_t j = 0; j < n; ++j) {
            if (x[j] < x[i]) ++rx;
            if (y[j] < y[i]) ++ry;
        }
        d2 += (rx - ry) * (rx - ry);
    }
    const double nd = static_cast<double>(n);
    return 1.0 - 6.0 * d2 / (nd * (nd * nd - 1.0));
}

} // namespace

// Reference values: scipy.stats.spearmanr, with the interval from
// tanh(atanh(rho) -/+ 1.96 / sqrt(n - 3)) in numpy.
TEST(Spearman, PublishedRatesReproduceCorrelations) {
    const auto order = iota_vec(15);
    const SpearmanResult most = spearman_rho(order, as_vector(kReferenceMostRates));
    EXPECT_NEAR(most.rho, 0.8142857142857142, 1e-12);
    EXPECT_NEAR(most.p_value, 0.000219365827727102, 1e-12);
    EXPECT_NEAR(most.ci_low, 0.518163565887721, 1e-9);
    EXPECT_NEAR(most.ci_high, 0.9360821765062555, 1e-9);
    EXPECT_NEAR(most.rho, 0.8143, 5e-4);
    EXPECT_NEAR(most.p_value, 2.194e-4, 1e-5);

    const SpearmanResult mid = spearman_rho(order, as_vector(kReferenceMidRates));
    EXPECT_NEAR(mid.rho, 0.75, 1e-12);
    EXPECT_NEAR(mid.p_value, 0.001280898450935536, 1e-12);
    EXPECT_NEAR(mid.ci_low, 0.38606048914122515, 1e-9);
    EXPECT_NEAR(mid.ci_high, 0.9119097373382463, 1e-9);

    const SpearmanResult least = spearman_rho(order, as_vector(kReferenceLeastRates));
    EXPECT_NEAR(least.rho, -0.7607142857142856, 1e-12);
    EXPECT_NEAR(least.p_value, 0.0009911286119823719, 1e-12);
    EXPECT_NEAR(least.ci_low, -0.9160180342608271, 1e-9);
    EXPECT_NEAR(least.ci_high, -0.4070876708790316, 1e-9);
    EXPECT_NEAR(least.rho, -0.7607, 5e-4);
}

TEST(Spearman, TiesUseAverageRanks) {
    const std::vector<double> x = {1, 2, 2, 3, 5, 5, 5, 8}, y = {3, 1, 4, 1, 5, 9, 2, 6};
    EXPECT_EQ(average_ranks(x), (std::vector<double>{1, 2.5, 2.5, 4, 6, 6, 6, 8}));
    const SpearmanResult r = spearman_rho(x, y);
    EXPECT_NEAR(r.rho, 0.5495502618648208, 1e-12);
    EXPECT_NEAR(r.p_value, 0.1582561276787799, 1e-10);
}

TEST(Spearman, MonotoneAndReversed) {
    const std::vector<double> x = {0.5, 1, 7, 9, 20}, y = {-3, 0, 2, 2.5, 100};
    const SpearmanResult up = spearman_rho(x, y);
    EXPECT_EQ(up.rho, 1.0);
    EXPECT_EQ(up.p_value, 0.0);
    std::vector<double> down(y.rbegin(), y.rend());
    EXPECT_EQ(spearman_rho(x, down).rho, -1.0);
}

TEST(Spearman, Errors) {
    const std::vector<double> x = {1, 2, 3, 4}, flat = {2, 2, 2, 2};
    EXPECT_THROW(spearman_rho(x, flat), UndefinedCorrelationError);
    EXPECT_THROW(spearman_rho(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}), std::invalid_argument);
    EXPECT_THROW(spearman_rho(x, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST(Spearman, PropertiesOnRandomInputs) {
    Rng rng(31);
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t n = 4 + rng.uniform_index(30);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.uniform(-10, 10);
            y[i] = rng.uniform(-10, 10);
        }
        EXPECT_DOUBLE_EQ(spearman_rho(x, x).rho, 1.0);
        const SpearmanResult r = spearman_rho(x, y);
        EXPECT_NEAR(r.rho, rho_no_ties(x, y), 1e-12);
        std::vector<double> neg(n);
        for (std::size_t i = 0; i < n; ++i) neg[i] = -y[i];
        EXPECT_NEAR(spearman_rho(x, neg).rho, -r.rho, 1e-12);
        EXPECT_NEAR(spearman_rho(y, x).rho, r.rho, 1e-12);
        EXPECT_GE(r.p_value, 0.0);
        EXPECT_LE(r.p_value, 1.0);
        EXPECT_LE(r.ci_low, r.rho);
        EXPECT_GE(r.ci_high, r.rho);
        // monotone transforms leave rho unchanged
        std::vector<double> ey(n);
        for (std::size_t i = 0; i < n; ++i) ey[i] = std::exp(y[i]);
        EXPECT_NEAR(spearman_rho(x, ey).rho, r.rho, 1e-12);
    }
}

TEST(Spearman, ExactPermutationPValue) {
    const std::vector<double> x = {1, 2, 3, 4, 5, 6}, y = {2, 1, 4, 3, 6, 5};
    const SpearmanResult r = spearman_rho(x, y, PValueMethod::exact_permutation);
    EXPECT_NEAR(r.rho, 0.8285714285714287, 1e-12);
    // 42 of the 720 orderings reach |rho| >= 29/35
    EXPECT_NEAR(r.p_value, 42.0 / 720.0, 1e-12);
    std::vector<double> big(11);
    std::iota(big.begin(), big.end(), 0.0);
    EXPECT_THROW(spearman_rho(big, big, PValueMethod::exact_permutation), std::invalid_argument);
}

TEST(OrderingReport, MonotonePredictorGivesRhoOne) {
    Rng rng(4);
    LevelSet levels;
    for (int i = 0; i < 15; ++i) {
        LevelGrid g(i, 150, kLevelHeight);
        // level i holds i rock tiles in its bottom row
        for (int k = 0; k < i; ++k) g.set_tile(static_cast<std::size_t>(10 * k), kLevelHeight - 1, 2);
        levels.emplace(i, g);
    }
    // "most" whenever a rock is in view, so the most-rate grows with the
    // number of rocks, i.e. with level order.
    std::size_t calls = 0;
    const Predictor predictor = [&](const ModelInput& in) {
        ++calls;
        double rock = 0;
        for (std::size_t c = 0; c < kChunksPerPoint * kChunkSize * kLevelHeight; ++c) rock += in.chunks[c * kTileTypes + 2];
        return rock > 0 ? Tensor({3}, {0.8, 0.1, 0.1}) : Tensor({3}, {0.1, 0.3, 0.6});
    };
    const OrderingReport rep = challenge_ordering_report(predictor, levels, rng, 1);
    ASSERT_EQ(rep.rows.size(), 15u);
    for (const auto& row : rep.rows) EXPECT_EQ(row.points, 150u);
    EXPECT_EQ(calls, 15u * 150u);
    for (std::size_t i = 1; i < 15; ++i) EXPECT_GT(rep.rows[i].rates[0], rep.rows[i - 1].rates[0]);
    ASSERT_TRUE(rep.tests[0].result);
    EXPECT_EQ(rep.tests[0].result->rho, 1.0);
}

TEST(OrderingReport, ConstantPredictorIsUndefined) {
    Rng rng(5);
    LevelSet levels;
    for (int i = 0; i < 15; ++i) levels.emplace(i, LevelGrid(i, 150, kLevelHeight));
    const Predictor always_most = [](const ModelInput&) { return Tensor({3}, {0.9, 0.05, 0.05}); };
    const OrderingReport rep = challenge_ordering_report(always_most, levels, rng, 2);
    for (const auto& row : rep.rows) EXPECT_EQ(row.rates[0], 1.0);
    for (const auto& t : rep.tests) {
        EXPECT_FALSE(t.result);
        EXPECT_FALSE(t.error.empty());
    }
    EXPECT_NE(spearman_tsv(rep).find("most\tNA"), std::string::npos);
}
