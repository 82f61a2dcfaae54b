#pragma once

// Windowed data points over a stacked log matrix.
//
// A point ending at timestep t covers rows [t-9, t]. Its three chunks are cut
// around the reconstructed x at rows t-9, t-4 and t, each from the level of
// the session that row belongs to, and its label is the label of the session
// owning row t. Windows that straddle a session boundary are kept.

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "affect_forge/error.hpp"
#include "affect_forge/level.hpp"
#include "affect_forge/log_matrix.hpp"
#include "affect_forge/model.hpp"
#include "affect_forge/text_io.hpp"

namespace affect_forge {

enum class RankLabel : std::uint8_t { most = 0, mid = 1, least = 2 };

inline constexpr std::array<RankLabel, 3> kRankLabels = {RankLabel::most, RankLabel::mid, RankLabel::least};

inline const char* to_string(RankLabel l) {
    switch (l) {
    case RankLabel::most: return "most";
    case RankLabel::mid: return "mid";
    case RankLabel::least: return "least";
    }
    return "?";
}

inline std::optional<RankLabel> parse_rank_label(std::string_view s) {
    if (s == "most") return RankLabel::most;
    if (s == "mid") return RankLabel::mid;
    if (s == "least") return RankLabel::least;
    return std::nullopt;
}

inline std::size_t index_of(RankLabel l) { return static_cast<std::size_t>(l); }

/// Metrics with a training path. Only the first three have reported numbers.
inline bool is_known_metric(std::string_view m) {
    return m == "fun" || m == "frustration" || m == "challenge" || m == "design" || m == "creativity";
}

/// Rank labels keyed by (player, metric, level).
///
/// File format: `player_id<TAB>metric<TAB>level_index<TAB>{most|mid|least}`,
/// one record per line, '#' comments and blank lines ignored.
class LabelTable {
public:
    void set(const std::string& player, const std::string& metric, int level, RankLabel label) {
        if (!labels_.emplace(std::tuple(player, metric, level), label).second)
            throw std::invalid_argument("duplicate label for " + player + " " + metric + " level " +
                                        std::to_string(level));
    }

    std::optional<RankLabel> find(const std::string& player, const std::string& metric, int level) const {
        auto it = labels_.find(std::tuple(player, metric, level));
        if (it == labels_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t size() const noexcept { return labels_.size(); }

    /// Each (player, metric) group with three levels must hold one most, one
    /// mid and one least.
    void check_rank_triples() const {
        std::map<std::pair<std::string, std::string>, std::array<int, 3>> seen;
        for (const auto& [key, label] : labels_) ++seen[{std::get<0>(key), std::get<1>(key)}][index_of(label)];
        for (const auto& [who, counts] : seen) {
            const int total = counts[0] + counts[1] + counts[2];
            if (total == 3 && (counts[0] != 1 || counts[1] != 1 || counts[2] != 1))
                throw ConfigError("player " + who.first + " " + who.second +
                                  " rankings are not one most, one mid, one least");
        }
    }

    static LabelTable parse(std::string_view text) {
        LabelTable t;
        std::size_t line_no = 0;
        for (std::string_view raw : lines(text)) {
            ++line_no;
            const std::string_view line = trim(raw);
            if (line.empty() || line.front() == '#') continue;
            const auto f = split(line, '\t');
            if (f.size() != 4) throw ParseError("expected player<TAB>metric<TAB>level<TAB>label", line_no);
            const auto level = parse_int<int>(f[2]);
            if (!level) throw ParseError("bad level index '" + std::string(f[2]) + "'", line_no);
            const auto label = parse_rank_label(f[3]);
            if (!label) throw ParseError("label must be most, mid or least, got '" + std::string(f[3]) + "'", line_no);
            try {
                t.set(std::string(f[0]), std::string(f[1]), *level, *label);
            } catch (const std::invalid_argument& e) {
                throw ParseError(e.what(), line_no);
            }
        }
        return t;
    }

    static LabelTable load(const std::filesystem::path& path) { return parse(read_file(path)); }

private:
    std::map<std::tuple<std::string, std::string, int>, RankLabel> labels_;
};

/// Label of every segment of `logs` for `metric`; a session without one is an error.
inline std::vector<RankLabel> segment_labels(const LogMatrix& logs, const LabelTable& table, const std::string& metric) {
    std::vector<RankLabel> out;
    for (const SessionSegment& seg : logs.segments()) {
        auto label = table.find(seg.player_id, metric, seg.level_index);
        if (!label) throw ConfigError("no " + metric + " label for session " + seg.session_id);
        out.push_back(*label);
    }
    return out;
}

/// One example, stored by position; inputs are cut from the shared logs and
/// levels when needed.
struct DataPoint {
    std::size_t timestep;  // final row of the window
    RankLabel label;
    std::size_t segment;   // segment owning `timestep`
    friend bool operator==(const DataPoint&, const DataPoint&) = default;
};

enum class WindowMode {
    /// Points from t = 9 of the whole matrix; windows may cross sessions.
    stacked,
    /// One point per timestep of every segment. Rows before the segment start
    /// are zero and their chunks repeat the segment's first position. Used for
    /// stand-in logs, where each level contributes exactly its width in points.
    per_segment,
};

class Dataset {
public:
    Dataset() = default;
    Dataset(std::shared_ptr<const LogMatrix> logs, std::shared_ptr<const LevelSet> levels, WindowMode mode,
            std::vector<DataPoint> points)
        : logs_(std::move(logs)), levels_(std::move(levels)), mode_(mode), points_(std::move(points)) {}

    std::size_t size() const noexcept { return points_.size(); }
    bool empty() const noexcept { return points_.empty(); }
    const DataPoint& operator[](std::size_t i) const { return points_[i]; }
    const std::vector<DataPoint>& points() const noexcept { return points_; }
    const LogMatrix& logs() const { return *logs_; }
    const LevelSet& levels() const { return *levels_; }
    WindowMode mode() const noexcept { return mode_; }

    const std::string& session_id(std::size_t i) const { return logs_->segments().at(points_[i].segment).session_id; }

    /// Same storage, selected points.
    Dataset subset(const std::vector<std::size_t>& indices) const {
        std::vector<DataPoint> pts;
        pts.reserve(indices.size());
        for (std::size_t i : indices) pts.push_back(points_.at(i));
        return Dataset(logs_, levels_, mode_, std::move(pts));
    }

    std::array<std::size_t, 3> class_counts() const {
        std::array<std::size_t, 3> c{};
        for (const auto& p : points_) ++c[index_of(p.label)];
        return c;
    }

    ModelInput materialize(std::size_t i) const { return materialize(points_.at(i)); }

    ModelInput materialize(const DataPoint& p) const {
        const std::size_t first = window_first(p);
        ModelInput in{Tensor({kWindow, log_columns::kCount}), Tensor({kChunksPerPoint, kChunkSize, kLevelHeight, kTileTypes})};
        // Row of window slot k is timestep + k + 1 - kWindow; slots before `first` stay zero.
        for (std::size_t k = 0; k < kWindow; ++k) {
            if (p.timestep + k + 1 < kWindow + first) continue;
            const auto src = logs_->row(p.timestep + k + 1 - kWindow);
            std::copy(src.begin(), src.end(), in.log_window.data().begin() + static_cast<std::ptrdiff_t>(k * log_columns::kCount));
        }
        constexpr std::array<std::size_t, kChunksPerPoint> offsets = {0, kWindow / 2, kWindow - 1};
        const std::size_t per_chunk = kChunkSize * kLevelHeight * kTileTypes;
        for (std::size_t c = 0; c < kChunksPerPoint; ++c) {
            const std::size_t shifted = p.timestep + offsets[c] + 1;
            const std::size_t row = shifted < kWindow + first ? first : shifted - kWindow;
            const SessionSegment& seg = logs_->segments()[logs_->segment_of(row)];
            const Tensor chunk = extract_chunk(level(seg.level_index), logs_->at(row, log_columns::kX));
            std::copy(chunk.data().begin(), chunk.data().end(),
                      in.chunks.data().begin() + static_cast<std::ptrdiff_t>(c * per_chunk));
        }
        return in;
    }

    const LevelGrid& level(int index) const {
        auto it = levels_->find(index);
        if (it == levels_->end()) throw ConfigError("no level grid for level index " + std::to_string(index));
        if (it->second.height() != kLevelHeight)
            throw ShapeError("level " + std::to_string(index) + " has height " + std::to_string(it->second.height()) +
                             ", expected " + std::to_string(kLevelHeight));
        return it->second;
    }

private:
    /// First row the window may read; earlier rows are zero padding.
    std::size_t window_first(const DataPoint& p) const {
        return mode_ == WindowMode::per_segment ? logs_->segments()[p.segment].begin : 0;
    }

    std::shared_ptr<const LogMatrix> logs_;
    std::shared_ptr<const LevelSet> levels_;
    WindowMode mode_ = WindowMode::stacked;
    std::vector<DataPoint> points_;
};

/// Builds the data points of `logs`; `labels` gives one label per segment.
inline Dataset assemble_dataset(std::shared_ptr<const LogMatrix> logs, std::shared_ptr<const LevelSet> levels,
                                const std::vector<RankLabel>& labels, WindowMode mode = WindowMode::stacked) {
    const auto& segs = logs->segments();
    if (labels.size() != segs.size())
        throw std::invalid_argument("need one label per session: " + std::to_string(segs.size()) + " sessions, " +
                                    std::to_string(labels.size()) + " labels");
    for (const SessionSegment& seg : segs)
        if (!levels->count(seg.level_index))
            throw ConfigError("session " + seg.session_id + " refers to missing level " +
                              std::to_string(seg.level_index));
    std::vector<DataPoint> points;
    const std::size_t start = mode == WindowMode::stacked ? kWindow - 1 : 0;
    if (logs->timesteps() > start) points.reserve(logs->timesteps() - start);
    std::size_t seg = 0;
    for (std::size_t t = start; t < logs->timesteps(); ++t) {
        while (t >= segs[seg].end) ++seg;
        points.push_back({t, labels[seg], seg});
    }
    return Dataset(std::move(logs), std::move(levels), mode, std::move(points));
}

inline Dataset assemble_dataset(LogMatrix logs, LevelSet levels, const std::vector<RankLabel>& labels,
                                WindowMode mode = WindowMode::stacked) {
    return assemble_dataset(std::make_shared<const LogMatrix>(std::move(logs)),
                            std::make_shared<const LevelSet>(std::move(levels)), labels, mode);
}

} // namespace affect_forge
