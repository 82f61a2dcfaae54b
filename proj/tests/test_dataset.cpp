#include <gtest/gtest.h>

#include <set>

#include "affect_forge/crossdomain.hpp"
#include "affect_forge/dataset.hpp"
#include "affect_forge/metrics.hpp"
#include "affect_forge/ranking.hpp"
#include "affect_forge/split.hpp"

using namespace affect_forge;

namespace {

LevelGrid random_level(Rng& rng, int index, std::size_t width = 198) {
    LevelGrid g(index, width, kLevelHeight);
    for (std::size_t x = 0; x < width; ++x)
        for (std::size_t y = 0; y < kLevelHeight; ++y) g.set_tile(x, y, static_cast<std::uint8_t>(rng.uniform_index(kTileTypes)));
    return g;
}

RawSession walking_session(const std::string& player, int level, std::uint64_t length, Rng& rng) {
    RawSession s;
    s.player_id = player;
    s.level_index = level;
    s.length = length;
    for (int& d : s.demographics) d = rng.uniform_int(0, 4);
    s.ticks.push_back({0, {{EventSchema::kRightMove, Marker::begin}}});
    s.ticks.push_back({3, {{3, Marker::fire}}});
    s.ticks.push_back({40, {{EventSchema::kRunning, Marker::begin}}});
    return s;
}

struct Corpus {
    std::shared_ptr<const LogMatrix> logs;
    std::shared_ptr<const LevelSet> levels;
};

Corpus corpus(std::size_t sessions, std::uint64_t seed = 1) {
    Rng rng(seed);
    LevelSet levels;
    for (int i = 0; i < 16; ++i) levels.emplace(i, random_level(rng, i));
    std::vector<LogMatrix> enc;
    for (std::size_t s = 0; s < sessions; ++s)
        enc.push_back(encode_session(walking_session("p" + std::to_string(s / 3), static_cast<int>(s % 16), 950, rng), 198));
    return {std::make_shared<const LogMatrix>(crop_and_stack(enc)), std::make_shared<const LevelSet>(std::move(levels))};
}

std::vector<RankLabel> cycle_labels(std::size_t n) {
    std::vector<RankLabel> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(kRankLabels[i % 3]);
    return out;
}

} // namespace

TEST(Labels, ParseAndLookup) {
    const LabelTable t = LabelTable::parse("# header\np1\tfun\t3\tmost\np1\tfun\t4\tmid\n\np1\tfun\t5\tleast\n");
    EXPECT_EQ(t.size(), 3u);
    EXPECT_EQ(t.find("p1", "fun", 4), RankLabel::mid);
    EXPECT_FALSE(t.find("p1", "challenge", 4));
    EXPECT_NO_THROW(t.check_rank_triples());
    EXPECT_THROW(LabelTable::parse("p1\tfun\t3\tbest\n"), ParseError);
    EXPECT_THROW(LabelTable::parse("p1\tfun\t3\n"), ParseError);
    try {
        LabelTable::parse("p1\tfun\t3\tmost\np1\tfun\t3\tmid\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(LabelTable::parse("p\tfun\t1\tmost\np\tfun\t2\tmost\np\tfun\t3\tleast\n").check_rank_triples(),
                 ConfigError);
}

TEST(Labels, MissingSessionLabelNamesSession) {
    const Corpus c = corpus(2);
    const LabelTable t = LabelTable::parse("p0\tfun\t0\tmost\n");
    try {
        segment_labels(*c.logs, t, "fun");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("p0/level1"), std::string::npos);
    }
}

TEST(Assemble, SingleSessionGives895Points) {
    const Corpus c = corpus(1);
    const Dataset d = assemble_dataset(c.logs, c.levels, {RankLabel::mid});
    EXPECT_EQ(d.size(), 895u);
    EXPECT_EQ(d[0].timestep, 9u);
    for (const auto& p : d.points()) EXPECT_EQ(p.segment, 0u);
}

TEST(Assemble, ScaledCorpusCount) {
    for (std::size_t s : {1u, 2u, 3u, 7u}) {
        const Corpus c = corpus(s);
        EXPECT_EQ(assemble_dataset(c.logs, c.levels, cycle_labels(s)).size(), 904 * s - 9) << s << " sessions";
    }
    EXPECT_EQ(75u * 3u * 904u - 9u, 203391u);
}

TEST(Assemble, BoundaryWindowsLabelledByFinalTimestep) {
    const Corpus c = corpus(2);
    const Dataset d = assemble_dataset(c.logs, c.levels, {RankLabel::most, RankLabel::least});
    ASSERT_EQ(d.size(), 1799u);
    std::size_t straddling = 0;
    for (const auto& p : d.points()) {
        const std::size_t first_seg = c.logs->segment_of(p.timestep - 9);
        const std::size_t last_seg = c.logs->segment_of(p.timestep);
        EXPECT_EQ(p.segment, last_seg);
        EXPECT_EQ(p.label, last_seg == 0 ? RankLabel::most : RankLabel::least);
        if (first_seg != last_seg) ++straddling;
    }
    // windows [t-9, t] with t in 904..912
    EXPECT_EQ(straddling, 9u);
}

TEST(Assemble, MaterializeWindowAndChunkRows) {
    const Corpus c = corpus(2);
    const Dataset d = assemble_dataset(c.logs, c.levels, {RankLabel::most, RankLabel::least});
    Rng rng(8);
    for (int k = 0; k < 40; ++k) {
        const std::size_t i = k < 10 ? 890 + static_cast<std::size_t>(k) : rng.uniform_index(d.size());
        const DataPoint& p = d[i];
        const ModelInput in = d.materialize(i);
        for (std::size_t r = 0; r < 10; ++r)
            for (std::size_t col = 0; col < log_columns::kCount; ++col)
                ASSERT_EQ(in.log_window.at(r, col), c.logs->at(p.timestep - 9 + r, col));
        const std::array<std::size_t, 3> rows = {p.timestep - 9, p.timestep - 4, p.timestep};
        for (std::size_t ch = 0; ch < 3; ++ch) {
            const int level = c.logs->segments()[c.logs->segment_of(rows[ch])].level_index;
            const Tensor expect = extract_chunk(c.levels->at(level), c.logs->at(rows[ch], log_columns::kX));
            for (std::size_t e = 0; e < expect.size(); ++e)
                ASSERT_EQ(in.chunks[ch * expect.size() + e], expect[e]) << "point " << i << " chunk " << ch;
        }
    }
}

TEST(Assemble, MissingLevelIsConfigError) {
    Corpus c = corpus(1);
    LevelSet few;
    few.emplace(5, c.levels->at(5));
    EXPECT_THROW(assemble_dataset(c.logs, std::make_shared<const LevelSet>(few), {RankLabel::mid}), ConfigError);
    EXPECT_THROW(assemble_dataset(c.logs, c.levels, {}), std::invalid_argument);
}

TEST(Assemble, PerSegmentModeOnePointPerColumn) {
    Rng rng(2);
    LevelSet levels;
    for (int i = 0; i < 4; ++i) levels.emplace(i, random_level(rng, i, 172));
    const std::map<int, RankLabel> labels = {
        {0, RankLabel::most}, {1, RankLabel::mid}, {2, RankLabel::mid}, {3, RankLabel::least}};
    const Dataset d = empty_log_dataset(levels, labels, rng);
    EXPECT_EQ(d.size(), 688u);
    EXPECT_EQ(d.class_counts(), (std::array<std::size_t, 3>{172, 344, 172}));
    // first point of level 2: nine zero rows, then the level's first row
    const ModelInput in = d.materialize(344);
    for (std::size_t r = 0; r < 9; ++r)
        for (std::size_t col = 0; col < log_columns::kCount; ++col) ASSERT_EQ(in.log_window.at(r, col), 0.0);
    EXPECT_EQ(in.log_window.at(9, log_columns::kX), 0.0);
    const Tensor left = extract_chunk(levels.at(2), 0.0);
    for (std::size_t e = 0; e < left.size(); ++e) ASSERT_EQ(in.chunks[e], left[e]);
}

TEST(Split, Sizes) {
    const Corpus c = corpus(1);
    const Dataset d = assemble_dataset(c.logs, c.levels, {RankLabel::mid});
    std::vector<std::size_t> first100(100), first10(10);
    std::iota(first100.begin(), first100.end(), std::size_t{0});
    std::iota(first10.begin(), first10.end(), std::size_t{0});
    const DataSplit a = split(d.subset(first100), {});
    EXPECT_EQ(a.train.size(), 80u);
    EXPECT_EQ(a.val.size(), 10u);
    EXPECT_EQ(a.test.size(), 10u);
    const DataSplit b = split(d.subset(first10), {});
    EXPECT_EQ(b.train.size(), 8u);
    EXPECT_EQ(b.val.size(), 1u);
    EXPECT_EQ(b.test.size(), 1u);
    std::vector<std::size_t> nine(9);
    std::iota(nine.begin(), nine.end(), std::size_t{0});
    EXPECT_THROW(split(d.subset(nine), {}), std::invalid_argument);
}

TEST(Split, DisjointExhaustiveAndDeterministic) {
    const Corpus c = corpus(3);
    const Dataset d = assemble_dataset(c.logs, c.levels, cycle_labels(3));
    for (SplitUnit unit : {SplitUnit::point, SplitUnit::session}) {
        SplitSpec spec;
        spec.seed = 42;
        spec.unit = unit;
        const DataSplit s1 = split(d, spec), s2 = split(d, spec);
        std::multiset<std::size_t> all;
        for (const Dataset* part : {&s1.train, &s1.val, &s1.test})
            for (const auto& p : part->points()) all.insert(p.timestep);
        EXPECT_EQ(all.size(), d.size());
        EXPECT_EQ(std::set<std::size_t>(all.begin(), all.end()).size(), d.size());
        for (std::size_t i = 0; i < s1.test.size(); ++i) EXPECT_EQ(s1.test[i].timestep, s2.test[i].timestep);
        if (unit == SplitUnit::point) {
            const SplitSizes sz = split_sizes(d.size(), spec);
            EXPECT_EQ(s1.test.size(), sz.test);
            EXPECT_EQ(s1.val.size(), sz.val);
        } else {
            std::set<std::size_t> test_segments, train_segments;
            for (const auto& p : s1.test.points()) test_segments.insert(p.segment);
            for (const auto& p : s1.train.points()) train_segments.insert(p.segment);
            for (std::size_t s : test_segments) EXPECT_FALSE(train_segments.count(s));
        }
    }
    SplitSpec other;
    other.seed = 43;
    EXPECT_NE(split(d, {}).test.points().front().timestep, split(d, other).test.points().front().timestep);
    SplitSpec bad;
    bad.train = 0.5;
    EXPECT_THROW(split(d, bad), ConfigError);
}

TEST(Metrics, PerfectPredictor) {
    const std::vector<std::size_t> truth = {0, 1, 2, 1, 0, 2, 2};
    const MetricsReport r = evaluate_predictions(truth, truth);
    EXPECT_EQ(r.accuracy, 1.0);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t p = 0; p < 3; ++p) EXPECT_EQ(r.confusion[t][p] != 0, t == p);
    for (const auto& a : r.class_accuracy) EXPECT_EQ(*a, 1.0);
}

TEST(Metrics, AllMidOnOneTwoOneMix) {
    std::vector<std::size_t> truth;
    for (int i = 0; i < 172; ++i) truth.push_back(0);
    for (int i = 0; i < 344; ++i) truth.push_back(1);
    for (int i = 0; i < 172; ++i) truth.push_back(2);
    const std::vector<std::size_t> pred(truth.size(), 1);
    const MetricsReport r = evaluate_predictions(pred, truth);
    EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
    EXPECT_EQ(r.prediction_rate, (std::array<double, 3>{0.0, 1.0, 0.0}));
    EXPECT_FALSE(r.class_accuracy[0]);
    EXPECT_DOUBLE_EQ(*r.class_accuracy[1], 0.5);
    EXPECT_DOUBLE_EQ(*r.class_recall[1], 1.0);
    EXPECT_DOUBLE_EQ(*r.class_recall[0], 0.0);
    EXPECT_NE(to_tsv(r).find("accuracy_pct\tNA\t50.00\tNA\t50.00"), std::string::npos);
}

TEST(Metrics, UniformRandomPredictorNearChance) {
    Rng rng(77);
    std::vector<std::size_t> truth, pred;
    for (int i = 0; i < 30000; ++i) {
        truth.push_back(static_cast<std::size_t>(i % 3));
        pred.push_back(rng.uniform_index(3));
    }
    EXPECT_NEAR(evaluate_predictions(pred, truth).accuracy, 1.0 / 3.0, 0.01);
}

TEST(Metrics, ReportInvariantsOnRandomPredictions) {
    Rng rng(78);
    for (int iter = 0; iter < 50; ++iter) {
        const std::size_t n = 1 + rng.uniform_index(300);
        std::vector<std::size_t> truth(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = rng.uniform_index(3);
            pred[i] = rng.uniform_index(3);
        }
        const MetricsReport r = evaluate_predictions(pred, truth);
        EXPECT_NEAR(100.0 * (r.prediction_rate[0] + r.prediction_rate[1] + r.prediction_rate[2]), 100.0, 0.01);
        for (std::size_t t = 0; t < 3; ++t)
            EXPECT_EQ(r.confusion[t][0] + r.confusion[t][1] + r.confusion[t][2], r.support[t]);
    }
}

TEST(Metrics, ArgmaxTiesGoToLowerIndex) {
    EXPECT_EQ(argmax_label(Tensor({3}, {1.0 / 3, 1.0 / 3, 1.0 / 3})), 0u);
    EXPECT_EQ(argmax_label(Tensor({3}, {0.2, 0.4, 0.4})), 1u);
    EXPECT_EQ(argmax_label(Tensor({3}, {0.1, 0.2, 0.7})), 2u);
}

TEST(Ratings, RankingExamples) {
    using L = RankLabel;
    EXPECT_EQ(ratings_to_rankings({4.2, 3.1, 2.8, 1.9}), (std::vector<L>{L::most, L::mid, L::mid, L::least}));
    EXPECT_EQ(ratings_to_rankings({3.0, 3.0, 3.0, 3.0}), (std::vector<L>{L::most, L::mid, L::mid, L::least}));
    EXPECT_EQ(ratings_to_rankings({5, 3, 1}), (std::vector<L>{L::most, L::mid, L::least}));
    EXPECT_EQ(ratings_to_rankings({1, 5, 3}), (std::vector<L>{L::least, L::most, L::mid}));
    EXPECT_EQ(ratings_to_rankings({4, 4, 1}), (std::vector<L>{L::most, L::mid, L::least}));
    EXPECT_THROW(ratings_to_rankings({1, 2}), std::invalid_argument);
}

TEST(Ratings, MeansFromRespondentRows) {
    const RatingsTable t = RatingsTable::parse("0\tfun\t4\n0\tfun\t5\n1\tfun\t2\n2\tfun\t1\n0\tchallenge\t3\n");
    const auto m = t.means("fun");
    EXPECT_DOUBLE_EQ(m.at(0), 4.5);
    EXPECT_DOUBLE_EQ(m.at(1), 2.0);
    EXPECT_THROW(t.means("frustration"), ConfigError);
    EXPECT_THROW(RatingsTable::parse("0\tfun\t6\n"), ParseError);
    EXPECT_THROW(RatingsTable::parse("0\tfun\n"), ParseError);

    Rng rng(1);
    LevelSet levels;
    for (int i = 0; i < 3; ++i) levels.emplace(i, random_level(rng, i, 20));
    const auto labels = level_labels_from_ratings(levels, t, "fun");
    EXPECT_EQ(labels.at(0), RankLabel::most);
    EXPECT_EQ(labels.at(1), RankLabel::mid);
    EXPECT_EQ(labels.at(2), RankLabel::least);
    levels.emplace(3, random_level(rng, 3, 20));
    EXPECT_THROW(level_labels_from_ratings(levels, t, "fun"), ConfigError);
}
