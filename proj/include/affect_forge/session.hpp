#pragma once

// Session log files.
//
// Canonical form (UTF-8, '\n' line endings):
//
//   #player <id>
//   #level <0-15>
//   #demo <d1> <d2> <d3> <d4>        each 0-4
//   #ticks <session length>
//   <tick>\t<EventName>\t<begin|end|fire>
//   ...
//
// Records are sorted by tick; records sharing a tick keep file order.
// `#demo` defaults to "0 0 0 0" and `#ticks` to one past the last recorded
// tick when absent. Continuous events use begin/end, all others use fire.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "affect_forge/error.hpp"
#include "affect_forge/event_schema.hpp"
#include "affect_forge/text_io.hpp"

namespace affect_forge {

enum class Marker { begin, end, fire };

inline const char* to_string(Marker m) {
    switch (m) {
    case Marker::begin: return "begin";
    case Marker::end: return "end";
    case Marker::fire: return "fire";
    }
    return "?";
}

struct EventMarker {
    std::size_t event;
    Marker marker;
    friend bool operator==(const EventMarker&, const EventMarker&) = default;
};

struct TickEvents {
    std::uint64_t tick;
    std::vector<EventMarker> markers;
    friend bool operator==(const TickEvents&, const TickEvents&) = default;
};

struct RawSession {
    std::string player_id;
    int level_index = 0;
    std::array<int, 4> demographics{};
    std::uint64_t length = 0;  // number of ticks in the session
    std::vector<TickEvents> ticks;  // strictly increasing tick numbers

    std::size_t marker_count() const {
        std::size_t n = 0;
        for (const auto& t : ticks) n += t.markers.size();
        return n;
    }
    friend bool operator==(const RawSession&, const RawSession&) = default;
};

inline RawSession parse_session(std::string_view text, const EventSchema& schema = EventSchema::infinite_mario()) {
    RawSession s;
    bool have_player = false, have_level = false;
    std::optional<std::uint64_t> declared_length;
    std::vector<std::string> unknown;
    std::size_t line_no = 0;
    for (std::string_view raw : lines(text)) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto f = split_ws(line);
            if (f[0] == "#player" && f.size() == 2) {
                s.player_id = std::string(f[1]);
                have_player = true;
            } else if (f[0] == "#level" && f.size() == 2) {
                auto v = parse_int<int>(f[1]);
                if (!v || *v < 0 || *v > 15) throw ParseError("level index must be an integer in [0, 15]", line_no);
                s.level_index = *v;
                have_level = true;
            } else if (f[0] == "#demo" && f.size() == 5) {
                for (std::size_t i = 0; i < 4; ++i) {
                    auto v = parse_int<int>(f[i + 1]);
                    if (!v || *v < 0 || *v > 4) throw ParseError("demographic values must be integers in [0, 4]", line_no);
                    s.demographics[i] = *v;
                }
            } else if (f[0] == "#ticks" && f.size() == 2) {
                auto v = parse_int<std::uint64_t>(f[1]);
                if (!v) throw ParseError("#ticks needs a non-negative integer", line_no);
                declared_length = *v;
            } else {
                throw ParseError("unrecognized header '" + std::string(line) + "'", line_no);
            }
            continue;
        }
        const auto f = split(line, '\t');
        if (f.size() != 3) throw ParseError("expected tick<TAB>event<TAB>marker", line_no);
        auto tick = parse_int<std::uint64_t>(f[0]);
        if (!tick) throw ParseError("bad tick number '" + std::string(f[0]) + "'", line_no);
        Marker marker;
        if (f[2] == "begin") marker = Marker::begin;
        else if (f[2] == "end") marker = Marker::end;
        else if (f[2] == "fire") marker = Marker::fire;
        else throw ParseError("marker must be begin, end or fire, got '" + std::string(f[2]) + "'", line_no);

        auto event = schema.find(f[1]);
        if (!event) {
            if (std::find(unknown.begin(), unknown.end(), f[1]) == unknown.end()) unknown.emplace_back(f[1]);
            continue;
        }
        if (schema.is_continuous(*event) == (marker == Marker::fire))
            throw ParseError(std::string(f[1]) + (schema.is_continuous(*event) ? " is continuous and needs begin/end"
                                                                               : " is instantaneous and needs fire"),
                             line_no);
        if (!s.ticks.empty() && *tick < s.ticks.back().tick) throw ParseError("ticks out of order", line_no);
        if (s.ticks.empty() || s.ticks.back().tick != *tick) s.ticks.push_back({*tick, {}});
        s.ticks.back().markers.push_back({*event, marker});
    }
    if (!unknown.empty()) {
        std::string names;
        for (const auto& n : unknown) names += (names.empty() ? "" : ", ") + n;
        throw SchemaError("unknown event name(s): " + names);
    }
    if (!have_player) throw ParseError("missing #player header");
    if (!have_level) throw ParseError("missing #level header");
    const std::uint64_t min_length = s.ticks.empty() ? 0 : s.ticks.back().tick + 1;
    s.length = declared_length.value_or(min_length);
    if (s.length < min_length)
        throw ParseError("event at tick " + std::to_string(min_length - 1) + " lies beyond #ticks " +
                         std::to_string(s.length));
    return s;
}

inline std::string serialize_session(const RawSession& s, const EventSchema& schema = EventSchema::infinite_mario()) {
    std::string out;
    out += "#player " + s.player_id + "\n";
    out += "#level " + std::to_string(s.level_index) + "\n";
    out += "#demo";
    for (int d : s.demographics) out += " " + std::to_string(d);
    out += "\n#ticks " + std::to_string(s.length) + "\n";
    for (const auto& t : s.ticks)
        for (const auto& m : t.markers)
            out += std::to_string(t.tick) + "\t" + schema.name(m.event) + "\t" + to_string(m.marker) + "\n";
    return out;
}

/// Identifier used in diagnostics and labels lookups.
inline std::string session_id(const RawSession& s) { return s.player_id + "/level" + std::to_string(s.level_index); }

/// Import adapter: reads the session files named in `manifest` (one relative
/// path per line, '#' comments allowed) from `dir`, in manifest order.
inline std::vector<RawSession> load_sessions(const std::filesystem::path& dir, const std::filesystem::path& manifest,
                                             const EventSchema& schema = EventSchema::infinite_mario()) {
    std::vector<RawSession> out;
    const std::string text = read_file(manifest);
    for (std::string_view raw : lines(text)) {
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto path = dir / std::string(line);
        try {
            out.push_back(parse_session(read_file(path), schema));
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ": " + e.what());
        } catch (const SchemaError& e) {
            throw SchemaError(path.string() + ": " + e.what());
        }
    }
    return out;
}

} // namespace affect_forge
