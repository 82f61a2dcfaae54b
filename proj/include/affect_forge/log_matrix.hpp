#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "affect_forge/error.hpp"
#include "affect_forge/event_schema.hpp"
#include "affect_forge/rng.hpp"
#include "affect_forge/session.hpp"

namespace affect_forge {

inline constexpr std::size_t kSessionTimesteps = 904;

/// Per-tick binary state of the 31 schema events for one session, T x 31.
class SessionState {
public:
    SessionState(std::size_t ticks, std::size_t events) : ticks_(ticks), events_(events), v_(ticks * events, 0) {}

    std::size_t ticks() const noexcept { return ticks_; }
    std::size_t events() const noexcept { return events_; }
    std::uint8_t at(std::size_t t, std::size_t e) const { return v_[t * events_ + e]; }
    std::uint8_t& at(std::size_t t, std::size_t e) { return v_[t * events_ + e]; }

private:
    std::size_t ticks_, events_;
    std::vector<std::uint8_t> v_;
};

/// Expands begin/end markers into per-tick state. A continuous event is set on
/// every tick in [begin, end); an unmatched begin runs to the end of the
/// session. Size states (Little/Large/Fire) are mutually exclusive and default
/// to Little: beginning one clears the others, ending the current one falls
/// back to Little.
inline SessionState expand_continuous(const RawSession& session,
                                      const EventSchema& schema = EventSchema::infinite_mario()) {
    const std::size_t n_events = schema.size();
    SessionState state(static_cast<std::size_t>(session.length), n_events);
    std::vector<bool> active(n_events, false), opened(n_events, false);
    std::size_t size_state = EventSchema::kLittle;
    opened[EventSchema::kLittle] = true;

    std::size_t next = 0;
    for (std::size_t t = 0; t < state.ticks(); ++t) {
        std::vector<std::size_t> fired;
        if (next < session.ticks.size() && session.ticks[next].tick == t) {
            for (const EventMarker& m : session.ticks[next].markers) {
                const std::string& name = schema.name(m.event);
                if (m.marker == Marker::fire) {
                    fired.push_back(m.event);
                } else if (EventSchema::is_size_state(m.event)) {
                    if (m.marker == Marker::begin) {
                        size_state = m.event;
                        opened[m.event] = true;
                    } else {
                        if (!opened[m.event])
                            throw ParseError(name + " ends at tick " + std::to_string(t) + " before it begins");
                        if (size_state == m.event) size_state = EventSchema::kLittle;
                    }
                } else if (m.marker == Marker::begin) {
                    active[m.event] = true;
                    opened[m.event] = true;
                } else {
                    if (!opened[m.event])
                        throw ParseError(name + " ends at tick " + std::to_string(t) + " before it begins");
                    active[m.event] = false;
                }
            }
            ++next;
        }
        for (std::size_t e = 0; e < n_events; ++e)
            if (schema.is_continuous(e) && !EventSchema::is_size_state(e) && active[e]) state.at(t, e) = 1;
        state.at(t, size_state) = 1;
        for (std::size_t e : fired) state.at(t, e) = 1;
    }
    return state;
}

struct Kinematics {
    double walk_speed = 0.1;      // tiles per tick
    double run_multiplier = 2.0;  // applied while Running is active
};

/// Dead-reckoned avatar x-position in tiles. Movement is taken at full speed
/// every tick it is active; Left and Right together cancel. The value recorded
/// for tick t includes that tick's movement and is clamped to [0, width - 1].
inline std::vector<double> reconstruct_x(const SessionState& state, const Kinematics& k, std::size_t level_width) {
    if (!(k.walk_speed > 0.0)) throw std::invalid_argument("walk_speed must be positive");
    if (!(k.run_multiplier >= 1.0)) throw std::invalid_argument("run_multiplier must be >= 1");
    if (level_width == 0) throw std::invalid_argument("level width must be positive");
    const double max_x = static_cast<double>(level_width - 1);
    std::vector<double> xs(state.ticks());
    double x = 0.0;
    for (std::size_t t = 0; t < state.ticks(); ++t) {
        const int dir = static_cast<int>(state.at(t, EventSchema::kRightMove)) -
                        static_cast<int>(state.at(t, EventSchema::kLeftMove));
        if (dir != 0) {
            const double speed = k.walk_speed * (state.at(t, EventSchema::kRunning) ? k.run_multiplier : 1.0);
            x = std::clamp(x + dir * speed, 0.0, max_x);
        }
        xs[t] = x;
    }
    return xs;
}

struct SessionSegment {
    std::string session_id;
    std::string player_id;
    int level_index = 0;  // key of the level grid this segment was played on
    std::size_t begin = 0, end = 0;  // [begin, end) rows of the owning matrix
    friend bool operator==(const SessionSegment&, const SessionSegment&) = default;
};

/// Timestep-major log encoding: one 37-wide row per timestep, with the
/// sessions it was built from recorded as contiguous segments.
class LogMatrix {
public:
    LogMatrix() = default;

    std::size_t timesteps() const noexcept { return values_.size() / log_columns::kCount; }
    double at(std::size_t t, std::size_t col) const { return values_[t * log_columns::kCount + col]; }
    double& at(std::size_t t, std::size_t col) { return values_[t * log_columns::kCount + col]; }
    std::span<const double> row(std::size_t t) const {
        return std::span<const double>(values_).subspan(t * log_columns::kCount, log_columns::kCount);
    }
    const std::vector<SessionSegment>& segments() const noexcept { return segments_; }

    /// Index of the segment containing timestep t.
    std::size_t segment_of(std::size_t t) const {
        auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                                   [](std::size_t v, const SessionSegment& s) { return v < s.end; });
        if (it == segments_.end()) throw std::out_of_range("timestep " + std::to_string(t) + " outside log matrix");
        return static_cast<std::size_t>(it - segments_.begin());
    }

    /// Appends `rows` timesteps (taken from the start of `other`'s first segment).
    void append_segment(const LogMatrix& other, std::size_t segment, std::size_t rows) {
        const SessionSegment& src = other.segments_.at(segment);
        if (rows > src.end - src.begin) throw std::out_of_range("segment shorter than requested rows");
        SessionSegment seg = src;
        seg.begin = timesteps();
        seg.end = seg.begin + rows;
        values_.insert(values_.end(), other.values_.begin() + static_cast<std::ptrdiff_t>(src.begin * log_columns::kCount),
                       other.values_.begin() + static_cast<std::ptrdiff_t>((src.begin + rows) * log_columns::kCount));
        segments_.push_back(std::move(seg));
    }

    /// Adds a zero-filled segment and returns its first row index.
    std::size_t add_segment(SessionSegment seg, std::size_t rows) {
        seg.begin = timesteps();
        seg.end = seg.begin + rows;
        values_.resize(values_.size() + rows * log_columns::kCount, 0.0);
        segments_.push_back(std::move(seg));
        return segments_.back().begin;
    }

private:
    std::vector<double> values_;
    std::vector<SessionSegment> segments_;
};

/// Full per-timestep encoding of one session: event/state flags, demographics,
/// level index and reconstructed x.
inline LogMatrix encode_session(const RawSession& session, std::size_t level_width, const Kinematics& kinematics = {},
                                const EventSchema& schema = EventSchema::infinite_mario()) {
    const SessionState state = expand_continuous(session, schema);
    const std::vector<double> xs = reconstruct_x(state, kinematics, level_width);
    LogMatrix m;
    const std::size_t base =
        m.add_segment({session_id(session), session.player_id, session.level_index, 0, 0}, state.ticks());
    for (std::size_t t = 0; t < state.ticks(); ++t) {
        for (std::size_t e = 0; e < schema.size(); ++e) m.at(base + t, e) = state.at(t, e);
        for (std::size_t d = 0; d < log_columns::kDemographics; ++d)
            m.at(base + t, log_columns::kDemographicsBegin + d) = session.demographics[d];
        m.at(base + t, log_columns::kLevel) = session.level_index;
        m.at(base + t, log_columns::kX) = xs[t];
    }
    return m;
}

/// Truncates every session to its first `length` timesteps and concatenates
/// them in order.
inline LogMatrix crop_and_stack(std::span<const LogMatrix> sessions, std::size_t length = kSessionTimesteps) {
    LogMatrix out;
    for (const LogMatrix& s : sessions) {
        for (std::size_t i = 0; i < s.segments().size(); ++i) {
            const SessionSegment& seg = s.segments()[i];
            if (seg.end - seg.begin < length)
                throw std::invalid_argument("session " + seg.session_id + " has " + std::to_string(seg.end - seg.begin) +
                                            " timesteps, fewer than the required " + std::to_string(length));
            out.append_segment(s, i, length);
        }
    }
    return out;
}

struct EmptyLogLevel {
    int level_index;
    std::size_t width;
};

/// Stand-in logs for levels without telemetry: one timestep per tile column,
/// all event and demographic columns zero, a uniformly random level tag in
/// [0, 15] each step, and x advancing one tile per step.
inline LogMatrix synthesize_empty_logs(std::span<const EmptyLogLevel> levels, Rng& rng) {
    LogMatrix m;
    for (const EmptyLogLevel& lvl : levels) {
        if (lvl.width == 0) throw std::invalid_argument("level width must be positive");
        const std::size_t base = m.add_segment(
            {"empty/level" + std::to_string(lvl.level_index), "", lvl.level_index, 0, 0}, lvl.width);
        for (std::size_t t = 0; t < lvl.width; ++t) {
            m.at(base + t, log_columns::kLevel) = rng.uniform_int(0, 15);
            m.at(base + t, log_columns::kX) = static_cast<double>(t);
        }
    }
    return m;
}

} // namespace affect_forge
