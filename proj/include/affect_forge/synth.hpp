#pragma once

// Synthetic corpora in the on-disk formats the pipeline reads.
//
// Infinite-Mario-style corpus: each level belongs to a tier (index % 3) and
// carries that tier's 3x3 tile motif every 7 columns, so every 10-column chunk
// shows at least one complete motif. Sessions on tier-2 levels also contain
// regular bursts of CollectCoin. Each player plays one level of every tier and
// the labels are a fixed function of the tier:
//
//   tier        fun    frustration  challenge
//   0           least  most         least
//   1           mid    mid          most
//   2           most   least        mid
//
// Foreign corpora: Gwario-style levels use four tiles outside the palette and
// come with respondent ratings; SMB-style levels use VGLC characters and grow
// denser in enemies and solid blocks with level index.

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "affect_forge/dataset.hpp"
#include "affect_forge/error.hpp"
#include "affect_forge/event_schema.hpp"
#include "affect_forge/level.hpp"
#include "affect_forge/rng.hpp"
#include "affect_forge/session.hpp"
#include "affect_forge/text_io.hpp"

namespace affect_forge {

inline constexpr std::size_t kRawLevelRows = 14;

inline constexpr std::array<std::array<const char*, 3>, 3> kTierMotifs = {{
    {"SSS", "-o-", "SSS"},
    {"?Q?", "Q-Q", "?Q?"},
    {"=k=", "-R-", "RRR"},
}};
inline constexpr std::size_t kMotifPeriod = 7;

inline constexpr std::array<const char*, 3> kSynthMetrics = {"fun", "frustration", "challenge"};

/// Label of a tier-`tier` level for `metric` (see the table above).
inline RankLabel synth_label(std::size_t tier, std::string_view metric) {
    static constexpr RankLabel fun[3] = {RankLabel::least, RankLabel::mid, RankLabel::most};
    static constexpr RankLabel frustration[3] = {RankLabel::most, RankLabel::mid, RankLabel::least};
    static constexpr RankLabel challenge[3] = {RankLabel::least, RankLabel::most, RankLabel::mid};
    if (metric == "fun") return fun[tier];
    if (metric == "frustration") return frustration[tier];
    if (metric == "challenge") return challenge[tier];
    throw ConfigError("synthetic labels exist for fun, frustration and challenge only, not '" + std::string(metric) + "'");
}

struct SynthSpec {
    std::size_t levels = 16;
    std::size_t width = 204;            // raw level width before cropping
    std::size_t players = 4;
    std::size_t session_length = 904;   // minimum ticks per session
    std::size_t length_jitter = 96;     // extra ticks drawn from [0, jitter]
    std::uint64_t seed = 0;
    double scatter_rate = 0.05;         // chance a free cell above ground holds a tile
    /// Relative weight of each palette channel for scattered tiles.
    std::array<double, kTileTypes> density = {0, 0, 3, 3, 2, 1, 4, 0, 0, 0, 0, 2, 1, 0, 0, 2, 0};

    void validate() const {
        if (levels < 3 || levels > 16) throw ConfigError("synthetic corpus needs 3 to 16 levels");
        if (width < 198 + 2) throw ConfigError("synthetic level width must be at least 200");
        if (players == 0) throw ConfigError("synthetic corpus needs at least one player");
        if (session_length < 904) throw ConfigError("synthetic sessions must be at least 904 ticks");
        double total = 0;
        for (double d : density) {
            if (d < 0) throw ConfigError("tile densities must be non-negative");
            total += d;
        }
        if (total <= 0) throw ConfigError("tile densities must not all be zero");
    }
};

struct SynthLevel {
    std::string file_name;
    LevelText text;
    std::size_t tier = 0;
};

struct SynthCorpus {
    std::vector<SynthLevel> levels;
    std::vector<RawSession> sessions;  // manifest order
    LabelTable labels;
    std::string labels_text;
};

namespace detail {

inline std::size_t weighted_pick(const std::array<double, kTileTypes>& w, Rng& rng) {
    double total = 0;
    for (double v : w) total += v;
    double r = rng.uniform() * total;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] <= 0) continue;
        if (r < w[i]) return i;
        r -= w[i];
    }
    for (std::size_t i = w.size(); i-- > 0;)
        if (w[i] > 0) return i;
    return 0;
}

inline LevelText synth_level_text(const SynthSpec& spec, std::size_t tier, Rng& rng) {
    const TilePalette& pal = TilePalette::default_palette();
    LevelText t;
    t.rows.assign(kRawLevelRows, std::string(spec.width, '-'));
    auto set = [&](std::size_t row, std::size_t col, char c) { t.rows[row][col] = c; };
    // Ground: the last two rows are identical; occasional gaps away from the edges.
    for (std::size_t x = 0; x < spec.width; ++x) {
        set(12, x, 'H');
        set(13, x, 'H');
    }
    for (std::size_t x = 12; x + 12 < spec.width; ++x)
        if (rng.bernoulli(0.03)) {
            const std::size_t gap = 2 + rng.uniform_index(2);
            for (std::size_t g = 0; g < gap; ++g) {
                set(12, x + g, '-');
                set(13, x + g, '-');
            }
            x += gap + 6;
        }
    // Scattered tiles in the playable band.
    for (std::size_t y = 4; y < 12; ++y)
        for (std::size_t x = 0; x < spec.width; ++x)
            if (rng.bernoulli(spec.scatter_rate)) set(y, x, pal[weighted_pick(spec.density, rng)].symbol);
    // A few pipes standing on the ground.
    for (std::size_t x = 15; x + 15 < spec.width; ++x)
        if (rng.bernoulli(0.02)) {
            set(10, x, '<');
            set(10, x + 1, '>');
            set(11, x, '[');
            set(11, x + 1, ']');
            x += 10;
        }
    // Tier motif every kMotifPeriod columns, resting on the ground.
    for (std::size_t x = 2; x + 3 <= spec.width; x += kMotifPeriod)
        for (std::size_t dy = 0; dy < 3; ++dy)
            for (std::size_t dx = 0; dx < 3; ++dx) set(9 + dy, x + dx, kTierMotifs[tier][dy][dx]);
    // Sparse top rows and a flag near the end.
    for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < spec.width; ++x)
            if (rng.bernoulli(0.005)) set(y, x, 'o');
    set(11, spec.width - 3, 'F');
    return t;
}

/// Plays one session: movement runs, running spurts, jumps, size changes and
/// scattered pickups; on planted levels, coin bursts every ~40 ticks.
inline RawSession synth_session(const std::string& player, int level, std::array<int, 4> demo, std::size_t length,
                                bool coin_bursts, Rng& rng) {
    using S = EventSchema;
    const EventSchema& schema = S::infinite_mario();
    const std::size_t start_level = *schema.find("StartLevel"), won = *schema.find("WonLevel");
    const std::size_t jumping = *schema.find("Jumping"), coin = *schema.find("CollectCoin");
    const std::size_t stomp = *schema.find("StompKillGoomba"), block = *schema.find("BlockCoinDestroy");

    RawSession s;
    s.player_id = player;
    s.level_index = level;
    s.demographics = demo;
    s.length = length;
    std::size_t move = S::kRightMove;  // kRightMove, kLeftMove or 0 for idle
    bool moving = false, running = false, ducking = false;
    std::size_t size_state = S::kLittle, move_left = 0, burst_left = 0;
    for (std::size_t t = 0; t < length; ++t) {
        TickEvents te{t, {}};
        auto fire = [&](std::size_t e) { te.markers.push_back({e, Marker::fire}); };
        auto mark = [&](std::size_t e, Marker m) { te.markers.push_back({e, m}); };
        if (t == 0) fire(start_level);
        if (move_left == 0) {
            const double r = rng.uniform();
            const std::size_t next = r < 0.72 ? S::kRightMove : (r < 0.82 ? S::kLeftMove : 0);
            if (moving && (next != move)) {
                mark(move, Marker::end);
                moving = false;
            }
            if (next != 0 && !moving) {
                mark(next, Marker::begin);
                moving = true;
            }
            move = next;
            move_left = 8 + rng.uniform_index(40);
        }
        --move_left;
        if (rng.bernoulli(0.02)) {
            mark(S::kRunning, running ? Marker::end : Marker::begin);
            running = !running;
        }
        if (rng.bernoulli(0.004)) {
            mark(S::kDucking, ducking ? Marker::end : Marker::begin);
            ducking = !ducking;
        }
        if (rng.bernoulli(0.002)) {
            if (size_state == S::kLittle) {
                size_state = rng.bernoulli(0.5) ? S::kLarge : S::kFire;
                mark(size_state, Marker::begin);
            } else {
                mark(size_state, Marker::end);
                size_state = S::kLittle;
            }
        }
        if (rng.bernoulli(0.03)) fire(jumping);
        if (rng.bernoulli(0.004)) fire(stomp);
        if (rng.bernoulli(0.003)) fire(block);
        if (coin_bursts && t % 40 == 20) burst_left = 4;
        if (burst_left > 0) {
            fire(coin);
            --burst_left;
        } else if (rng.bernoulli(0.004)) {
            fire(coin);
        }
        if (t + 1 == length) fire(won);
        if (!te.markers.empty()) s.ticks.push_back(std::move(te));
    }
    return s;
}

} // namespace detail

inline std::string level_file_name(std::size_t i) {
    return std::string("level") + (i < 10 ? "0" : "") + std::to_string(i) + ".txt";
}

inline std::string session_file_name(const RawSession& s) {
    return s.player_id + "_level" + std::to_string(s.level_index) + ".log";
}

inline SynthCorpus generate(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    SynthCorpus c;
    std::array<std::vector<int>, 3> by_tier;
    for (std::size_t i = 0; i < spec.levels; ++i) {
        const std::size_t tier = i % 3;
        c.levels.push_back({level_file_name(i), detail::synth_level_text(spec, tier, rng), tier});
        by_tier[tier].push_back(static_cast<int>(i));
    }
    for (std::size_t p = 0; p < spec.players; ++p) {
        const std::string player = "p" + std::to_string(p);
        std::array<int, 4> demo{};
        for (int& d : demo) d = rng.uniform_int(0, 4);
        std::array<int, 3> played{};
        for (std::size_t tier = 0; tier < 3; ++tier)
            played[tier] = by_tier[tier][rng.uniform_index(by_tier[tier].size())];
        std::array<std::size_t, 3> order = {0, 1, 2};
        shuffle(std::span<std::size_t>(order), rng);
        for (std::size_t tier : order) {
            const std::size_t length = spec.session_length + rng.uniform_index(spec.length_jitter + 1);
            c.sessions.push_back(detail::synth_session(player, played[tier], demo, length, tier == 2, rng));
            for (const char* metric : kSynthMetrics) {
                const RankLabel label = synth_label(tier, metric);
                c.labels.set(player, metric, played[tier], label);
                c.labels_text += player + "\t" + metric + "\t" + std::to_string(played[tier]) + "\t" +
                                 to_string(label) + "\n";
            }
        }
    }
    return c;
}

/// Writes levels/, sessions/, manifest.txt and labels.tsv under `dir`.
inline void write_corpus(const SynthCorpus& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "levels");
    std::filesystem::create_directories(dir / "sessions");
    for (const auto& l : c.levels) write_file_atomic(dir / "levels" / l.file_name, l.text.str());
    std::string manifest;
    for (const auto& s : c.sessions) {
        write_file_atomic(dir / "sessions" / session_file_name(s), serialize_session(s));
        manifest += session_file_name(s) + "\n";
    }
    write_file_atomic(dir / "manifest.txt", manifest);
    write_file_atomic(dir / "labels.tsv", c.labels_text);
}

inline constexpr std::string_view kGwarioRemapText =
    "# Gwario tiles outside the palette.\n"
    "char.P = paratroopa\n"
    "char.r = red-koopa\n"
    "char.p = piranha-plant\n"
    "char.# = stair-block\n"
    "paratroopa = green-koopa\n"
    "red-koopa = green-koopa\n"
    "piranha-plant = remove\n"
    "stair-block = rock\n";

inline constexpr std::string_view kSmbRemapText =
    "# VGLC Super Mario Bros. characters.\n"
    "char.X = unbreakable\n"
    "char.E = enemy\n"
    "unbreakable@bottom = hilltop\n"
    "unbreakable = rock\n"
    "enemy = goomba\n";

struct ForeignCorpus {
    std::vector<SynthLevel> levels;
    std::string ratings_text;  // empty for corpora without ratings
};

/// Gwario-style levels (raw height 14, widths from 172 up) with respondent
/// ratings whose per-level means are all distinct.
inline ForeignCorpus generate_gwario(std::uint64_t seed, std::size_t levels = 4, std::size_t respondents = 6) {
    Rng rng(seed);
    ForeignCorpus c;
    for (std::size_t i = 0; i < levels; ++i) {
        const std::size_t width = 172 + (i == 0 ? 0 : rng.uniform_index(24));
        LevelText t;
        t.rows.assign(kRawLevelRows, std::string(width, '-'));
        for (std::size_t x = 0; x < width; ++x) t.rows[12][x] = t.rows[13][x] = 'H';
        for (std::size_t x = 6; x < width; ++x) {
            const double r = rng.uniform();
            if (r < 0.03) t.rows[11][x] = 'P';
            else if (r < 0.06) t.rows[11][x] = 'r';
            else if (r < 0.08) t.rows[11][x] = 'g';
            if (rng.bernoulli(0.02) && x + 2 < width) {
                t.rows[10][x] = '<';
                t.rows[10][x + 1] = '>';
                t.rows[11][x] = '[';
                t.rows[11][x + 1] = ']';
                t.rows[9][x] = 'p';
                ++x;
            }
            if (rng.bernoulli(0.04)) t.rows[4 + rng.uniform_index(6)][x] = "S?o"[rng.uniform_index(3)];
        }
        // A staircase of stair blocks near the end.
        for (std::size_t step = 0; step < 4; ++step)
            for (std::size_t h = 0; h <= step; ++h) t.rows[11 - h][width - 12 + step] = '#';
        c.levels.push_back({level_file_name(i), std::move(t), 0});
    }
    for (const char* metric : kSynthMetrics)
        for (std::size_t i = 0; i < levels; ++i) {
            // Respondents alternate between 1 + slot and 2 + slot, so with up
            // to four levels the means 1.5, 2.5, ... are distinct. The slot is
            // rotated per metric so each metric ranks the levels differently.
            const std::size_t slot = (i + std::string_view(metric).size()) % levels;
            for (std::size_t r = 0; r < respondents; ++r) {
                const std::size_t rating = std::min<std::size_t>(5, 1 + slot + r % 2);
                c.ratings_text += std::to_string(i) + "\t" + metric + "\t" + std::to_string(rating) + "\n";
            }
        }
    return c;
}

/// VGLC-style Super Mario Bros. levels, raw height 14 with the ground on the
/// last row, getting harder with index: more enemies, gaps and solid blocks.
inline ForeignCorpus generate_smb(std::uint64_t seed, std::size_t levels = 15) {
    Rng rng(seed);
    ForeignCorpus c;
    for (std::size_t i = 0; i < levels; ++i) {
        const double difficulty = static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(1, levels - 1));
        const std::size_t width = 150 + (i == 0 ? 0 : rng.uniform_index(40));
        LevelText t;
        t.rows.assign(kRawLevelRows, std::string(width, '-'));
        for (std::size_t x = 0; x < width; ++x) t.rows[13][x] = 'X';
        for (std::size_t x = 8; x + 8 < width; ++x) {
            if (rng.bernoulli(0.01 + 0.04 * difficulty)) {
                t.rows[13][x] = t.rows[13][x + 1] = '-';
                x += 2;
                continue;
            }
            if (rng.bernoulli(0.02 + 0.10 * difficulty)) t.rows[12][x] = 'E';
            if (rng.bernoulli(0.02 + 0.12 * difficulty)) t.rows[12 - rng.uniform_index(3)][x] = 'X';
            if (rng.bernoulli(0.04)) t.rows[8][x] = "S?o"[rng.uniform_index(3)];
        }
        c.levels.push_back({level_file_name(i), std::move(t), 0});
    }
    return c;
}

inline void write_foreign(const ForeignCorpus& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "levels");
    for (const auto& l : c.levels) write_file_atomic(dir / "levels" / l.file_name, l.text.str());
    if (!c.ratings_text.empty()) write_file_atomic(dir / "ratings.tsv", c.ratings_text);
}

} // namespace affect_forge
