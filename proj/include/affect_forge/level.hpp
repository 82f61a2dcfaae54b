#pragma once

// Tile-grid levels: palette, cross-domain remapping, cropping and chunk slicing.
//
// Level text files are rectangular character grids, one row per line, top row
// first. Grids are indexed (x, y) with y = 0 at the top.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "affect_forge/digest.hpp"
#include "affect_forge/error.hpp"
#include "affect_forge/kv_config.hpp"
#include "affect_forge/tensor.hpp"
#include "affect_forge/text_io.hpp"

namespace affect_forge {

inline constexpr std::size_t kTileTypes = 17;
inline constexpr std::size_t kChunkSize = 10;
inline constexpr std::size_t kLevelHeight = 10;

struct Tile {
    std::string name;
    char symbol;
    std::array<std::uint8_t, 3> rgb;
};

/// The 17 tile channels, in channel order. Channel 0 is empty space.
class TilePalette {
public:
    explicit TilePalette(std::vector<Tile> tiles) : tiles_(std::move(tiles)) {
        if (tiles_.size() != kTileTypes)
            throw ConfigError("palette needs exactly 17 tiles, got " + std::to_string(tiles_.size()));
        std::set<std::string> names;
        std::set<char> symbols;
        for (const Tile& t : tiles_) {
            if (!names.insert(t.name).second) throw ConfigError("duplicate palette tile name '" + t.name + "'");
            if (!symbols.insert(t.symbol).second)
                throw ConfigError("duplicate palette symbol '" + std::string(1, t.symbol) + "'");
        }
    }

    /// Entries `tile = <name> <symbol> <#rrggbb>`, in channel order.
    static TilePalette parse(const KeyValueFile& kv) {
        std::vector<Tile> tiles;
        for (const auto& e : kv.entries()) {
            if (e.key != "tile") throw ParseError(kv.origin() + ": unknown palette key '" + e.key + "'", e.line);
            const auto f = split_ws(e.value);
            if (f.size() != 3 || f[1].size() != 1 || f[2].size() != 7 || f[2][0] != '#')
                throw ParseError(kv.origin() + ": expected 'tile = <name> <symbol> <#rrggbb>'", e.line);
            Tile t{std::string(f[0]), f[1][0], {}};
            for (std::size_t c = 0; c < 3; ++c) {
                auto v = parse_hex_byte(f[2].substr(1 + 2 * c, 2));
                if (!v) throw ParseError(kv.origin() + ": bad colour '" + std::string(f[2]) + "'", e.line);
                t.rgb[c] = *v;
            }
            tiles.push_back(std::move(t));
        }
        return TilePalette(std::move(tiles));
    }

    static TilePalette load(const std::filesystem::path& path) { return parse(KeyValueFile::load(path)); }

    static const TilePalette& default_palette() {
        static const TilePalette p({
            {"empty", '-', {135, 206, 235}},
            {"hilltop", 'H', {34, 139, 34}},
            {"rock", 'R', {139, 90, 43}},
            {"breakable-brick", 'S', {178, 34, 34}},
            {"question-block", '?', {255, 215, 0}},
            {"used-block", 'Q', {160, 120, 60}},
            {"coin", 'o', {255, 255, 102}},
            {"pipe-top-left", '<', {0, 168, 0}},
            {"pipe-top-right", '>', {0, 140, 0}},
            {"pipe-body-left", '[', {0, 200, 0}},
            {"pipe-body-right", ']', {0, 120, 0}},
            {"goomba", 'g', {150, 75, 0}},
            {"green-koopa", 'k', {50, 205, 50}},
            {"bullet-bill-cannon", 'B', {40, 40, 40}},
            {"cannon-body", 'b', {90, 90, 90}},
            {"platform", '=', {210, 180, 140}},
            {"flag", 'F', {255, 255, 255}},
        });
        return p;
    }

    std::size_t size() const noexcept { return tiles_.size(); }
    const Tile& operator[](std::size_t i) const { return tiles_.at(i); }
    const std::vector<Tile>& tiles() const noexcept { return tiles_; }

    std::optional<std::size_t> find_symbol(char c) const {
        for (std::size_t i = 0; i < tiles_.size(); ++i)
            if (tiles_[i].symbol == c) return i;
        return std::nullopt;
    }
    std::optional<std::size_t> find_name(std::string_view n) const {
        for (std::size_t i = 0; i < tiles_.size(); ++i)
            if (tiles_[i].name == n) return i;
        return std::nullopt;
    }

    /// Canonical text (the palette file format) and its SHA-256.
    std::string canonical_text() const {
        std::string s;
        for (const Tile& t : tiles_) {
            char col[8];
            std::snprintf(col, sizeof col, "#%02x%02x%02x", t.rgb[0], t.rgb[1], t.rgb[2]);
            s += "tile = " + t.name + " " + std::string(1, t.symbol) + " " + col + "\n";
        }
        return s;
    }
    Digest fingerprint() const { return sha256(canonical_text()); }

private:
    static std::optional<std::uint8_t> parse_hex_byte(std::string_view s) {
        unsigned v = 0;
        for (char c : s) {
            v <<= 4;
            if (c >= '0' && c <= '9') v |= static_cast<unsigned>(c - '0');
            else if (c >= 'a' && c <= 'f') v |= static_cast<unsigned>(c - 'a' + 10);
            else if (c >= 'A' && c <= 'F') v |= static_cast<unsigned>(c - 'A' + 10);
            else return std::nullopt;
        }
        return static_cast<std::uint8_t>(v);
    }

    std::vector<Tile> tiles_;
};

inline constexpr std::string_view kRemoveTarget = "remove";

/// Maps foreign tiles onto the palette.
///
/// File entries:
///   char.<c> = <foreign-name>      declares a foreign symbol
///   <name> = <palette-name|remove>
///   <name>@bottom = <palette-name|remove>   applies on the lowest row only
class RemapTable {
public:
    std::map<char, std::string> symbols;
    std::map<std::string, std::string> rules;
    std::map<std::string, std::string> bottom_rules;

    static RemapTable parse(const KeyValueFile& kv) {
        RemapTable t;
        for (const auto& e : kv.entries()) {
            if (e.key.rfind("char.", 0) == 0) {
                if (e.key.size() != 6) throw ParseError(kv.origin() + ": char entries need a single symbol", e.line);
                t.symbols[e.key[5]] = e.value;
            } else if (e.key.size() > 7 && e.key.ends_with("@bottom")) {
                t.bottom_rules[e.key.substr(0, e.key.size() - 7)] = e.value;
            } else {
                t.rules[e.key] = e.value;
            }
        }
        return t;
    }

    static RemapTable load(const std::filesystem::path& path) { return parse(KeyValueFile::load(path)); }

    /// Every target must be a palette tile (or `remove`), foreign symbols must
    /// not shadow palette symbols, and no rule target may itself be remapped.
    void validate(const TilePalette& palette) const {
        for (const auto& [c, name] : symbols)
            if (palette.find_symbol(c))
                throw ConfigError("remap symbol '" + std::string(1, c) + "' shadows a palette symbol");
        for (const auto* table : {&rules, &bottom_rules})
            for (const auto& [from, to] : *table) {
                if (to != kRemoveTarget && !palette.find_name(to))
                    throw ConfigError("remap target '" + to + "' for '" + from + "' is not a palette tile");
                if (rules.count(to) || bottom_rules.count(to))
                    throw ConfigError("remap target '" + to + "' is itself remapped");
            }
    }

    /// Palette tile index for tile `name`, honouring the bottom-row rules.
    /// Returns nullopt when `name` is neither remapped nor in the palette.
    std::optional<std::size_t> resolve(const std::string& name, bool bottom_row, const TilePalette& palette) const {
        const std::string* target = nullptr;
        if (bottom_row) {
            auto it = bottom_rules.find(name);
            if (it != bottom_rules.end()) target = &it->second;
        }
        if (!target) {
            auto it = rules.find(name);
            if (it != rules.end()) target = &it->second;
        }
        if (!target) return palette.find_name(name);
        if (*target == kRemoveTarget) return 0;
        return palette.find_name(*target);
    }
};

/// Raw character grid, rows top to bottom.
struct LevelText {
    std::vector<std::string> rows;

    std::size_t height() const noexcept { return rows.size(); }
    std::size_t width() const noexcept { return rows.empty() ? 0 : rows.front().size(); }

    static LevelText parse(std::string_view text) {
        LevelText t;
        std::size_t line_no = 0;
        for (std::string_view raw : lines(text)) {
            ++line_no;
            std::string_view row = raw;
            if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
            if (!t.rows.empty() && row.size() != t.rows.front().size())
                throw ParseError("ragged level row: expected " + std::to_string(t.rows.front().size()) +
                                     " columns, got " + std::to_string(row.size()),
                                 line_no);
            t.rows.emplace_back(row);
        }
        if (t.rows.empty() || t.rows.front().empty()) throw ParseError("empty level");
        return t;
    }

    std::string str() const {
        std::string s;
        for (const auto& r : rows) s += r + "\n";
        return s;
    }
};

inline LevelText crop_text(const LevelText& text, std::size_t target_width, std::size_t rows_to_drop_top,
                           bool drop_bottom_row) {
    const std::size_t dropped = rows_to_drop_top + (drop_bottom_row ? 1 : 0);
    if (target_width > text.width() || dropped >= text.height())
        throw std::invalid_argument("crop to width " + std::to_string(target_width) + " dropping " +
                                    std::to_string(dropped) + " rows exceeds level " + std::to_string(text.width()) +
                                    "x" + std::to_string(text.height()));
    LevelText out;
    for (std::size_t y = rows_to_drop_top; y < text.height() - (drop_bottom_row ? 1 : 0); ++y)
        out.rows.push_back(text.rows[y].substr(0, target_width));
    return out;
}

/// Rewrites foreign symbols and remapped tiles as palette symbols. Symbols
/// that are neither palette nor remap entries are left for parse_level to reject.
inline LevelText remap_text(const LevelText& text, const RemapTable& table, const TilePalette& palette) {
    LevelText out = text;
    for (std::size_t y = 0; y < text.height(); ++y) {
        const bool bottom = y + 1 == text.height();
        for (std::size_t x = 0; x < text.width(); ++x) {
            const char c = text.rows[y][x];
            std::string name;
            if (auto it = table.symbols.find(c); it != table.symbols.end()) name = it->second;
            else if (auto idx = palette.find_symbol(c)) name = palette[*idx].name;
            else continue;
            auto resolved = table.resolve(name, bottom, palette);
            if (!resolved)
                throw SchemaError("foreign tile '" + name + "' at (" + std::to_string(x) + "," + std::to_string(y) +
                                  ") has no remap rule");
            out.rows[y][x] = palette[*resolved].symbol;
        }
    }
    return out;
}

/// One-hot tile grid, indexed (x, y, channel).
class LevelGrid {
public:
    LevelGrid(int level_index, std::size_t width, std::size_t height)
        : level_index_(level_index), width_(width), height_(height), tiles_(width * height, 0) {}

    int level_index() const noexcept { return level_index_; }
    void set_level_index(int i) noexcept { level_index_ = i; }
    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }

    std::uint8_t tile(std::size_t x, std::size_t y) const { return tiles_[x * height_ + y]; }
    void set_tile(std::size_t x, std::size_t y, std::uint8_t channel) {
        if (channel >= kTileTypes) throw std::out_of_range("tile channel out of range");
        tiles_[x * height_ + y] = channel;
    }

    /// width x height x 17 one-hot tensor.
    Tensor one_hot() const {
        Tensor t({width_, height_, kTileTypes});
        for (std::size_t x = 0; x < width_; ++x)
            for (std::size_t y = 0; y < height_; ++y) t[(x * height_ + y) * kTileTypes + tile(x, y)] = 1.0;
        return t;
    }

    std::array<std::size_t, kTileTypes> channel_counts() const {
        std::array<std::size_t, kTileTypes> c{};
        for (std::uint8_t v : tiles_) ++c[v];
        return c;
    }

    LevelText to_text(const TilePalette& palette) const {
        LevelText t;
        t.rows.assign(height_, std::string(width_, ' '));
        for (std::size_t y = 0; y < height_; ++y)
            for (std::size_t x = 0; x < width_; ++x) t.rows[y][x] = palette[tile(x, y)].symbol;
        return t;
    }

    friend bool operator==(const LevelGrid&, const LevelGrid&) = default;

private:
    int level_index_;
    std::size_t width_, height_;
    std::vector<std::uint8_t> tiles_;  // x-major
};

/// Parses palette symbols into a grid; with a remap table, foreign symbols and
/// tiles are converted first.
inline LevelGrid parse_level(const LevelText& text, const TilePalette& palette, int level_index = 0,
                             const RemapTable* remap = nullptr) {
    const LevelText resolved = remap ? remap_text(text, *remap, palette) : text;
    LevelGrid g(level_index, resolved.width(), resolved.height());
    for (std::size_t y = 0; y < resolved.height(); ++y)
        for (std::size_t x = 0; x < resolved.width(); ++x) {
            const char c = resolved.rows[y][x];
            auto idx = palette.find_symbol(c);
            if (!idx)
                throw SchemaError("unknown tile symbol '" + std::string(1, c) + "' at (" + std::to_string(x) + "," +
                                  std::to_string(y) + ")");
            g.set_tile(x, y, static_cast<std::uint8_t>(*idx));
        }
    return g;
}

inline LevelGrid parse_level(std::string_view text, const TilePalette& palette, int level_index = 0,
                             const RemapTable* remap = nullptr) {
    return parse_level(LevelText::parse(text), palette, level_index, remap);
}

inline LevelGrid crop_level(const LevelGrid& grid, std::size_t target_width, std::size_t rows_to_drop_top,
                            bool drop_bottom_row) {
    const std::size_t dropped = rows_to_drop_top + (drop_bottom_row ? 1 : 0);
    if (target_width > grid.width() || dropped >= grid.height())
        throw std::invalid_argument("crop to width " + std::to_string(target_width) + " dropping " +
                                    std::to_string(dropped) + " rows exceeds level " + std::to_string(grid.width()) +
                                    "x" + std::to_string(grid.height()));
    LevelGrid out(grid.level_index(), target_width, grid.height() - dropped);
    for (std::size_t x = 0; x < target_width; ++x)
        for (std::size_t y = 0; y < out.height(); ++y) out.set_tile(x, y, grid.tile(x, y + rows_to_drop_top));
    return out;
}

/// Applies palette-to-palette rules of `table` to a parsed grid.
inline LevelGrid remap_tiles(const LevelGrid& grid, const RemapTable& table, const TilePalette& palette) {
    LevelGrid out = grid;
    for (std::size_t x = 0; x < grid.width(); ++x)
        for (std::size_t y = 0; y < grid.height(); ++y) {
            auto idx = table.resolve(palette[grid.tile(x, y)].name, y + 1 == grid.height(), palette);
            out.set_tile(x, y, static_cast<std::uint8_t>(*idx));
        }
    return out;
}

/// Per-corpus cropping applied before chunking.
struct CropPreset {
    std::size_t width;
    std::size_t drop_top;
    bool drop_bottom;

    static CropPreset infinite_mario() { return {198, 3, true}; }
    static CropPreset gwario() { return {172, 3, true}; }
    static CropPreset super_mario_bros() { return {150, 4, false}; }
};

/// First column of the 10-wide window around x: four columns left and five
/// right of floor(x), shifted inward at the level edges.
inline std::size_t chunk_left_column(std::size_t level_width, double x_center) {
    if (level_width < kChunkSize)
        throw std::invalid_argument("level width " + std::to_string(level_width) + " is narrower than a chunk");
    const double fx = std::floor(x_center + 1e-9);
    const double left = std::clamp(fx - 4.0, 0.0, static_cast<double>(level_width - kChunkSize));
    return static_cast<std::size_t>(left);
}

/// 10 (x) x height (y) x 17 one-hot slice of the level around x_center.
inline Tensor extract_chunk(const LevelGrid& grid, double x_center) {
    const std::size_t left = chunk_left_column(grid.width(), x_center);
    Tensor chunk({kChunkSize, grid.height(), kTileTypes});
    for (std::size_t dx = 0; dx < kChunkSize; ++dx)
        for (std::size_t y = 0; y < grid.height(); ++y)
            chunk[(dx * grid.height() + y) * kTileTypes + grid.tile(left + dx, y)] = 1.0;
    return chunk;
}

/// Levels keyed by index.
using LevelSet = std::map<int, LevelGrid>;

/// Reads every `*.txt` file in `dir` in lexicographic filename order; the
/// i-th file becomes level i. Each level is cropped, remapped and parsed.
inline LevelSet load_levels(const std::filesystem::path& dir, const TilePalette& palette, const CropPreset& crop,
                            const RemapTable* remap = nullptr) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no level files (*.txt) in " + dir.string());
    LevelSet levels;
    for (std::size_t i = 0; i < files.size(); ++i) {
        try {
            const LevelText cropped =
                crop_text(LevelText::parse(read_file(files[i])), crop.width, crop.drop_top, crop.drop_bottom);
            levels.emplace(static_cast<int>(i), parse_level(cropped, palette, static_cast<int>(i), remap));
        } catch (const std::exception& e) {
            throw std::runtime_error(files[i].string() + ": " + e.what());
        }
    }
    return levels;
}

} // namespace affect_forge
