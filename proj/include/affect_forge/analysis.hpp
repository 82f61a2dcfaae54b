#pragma once

// Maximally activating level patches for the first chunk-head convolution,
// and plain renderings of tile patches.

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "affect_forge/error.hpp"
#include "affect_forge/level.hpp"
#include "affect_forge/model.hpp"

namespace affect_forge {

struct ActivationRecord {
    std::size_t filter = 0;
    int level_index = 0;
    std::size_t x = 0, y = 0;      // top-left tile of the receptive field
    std::size_t width = 0, height = 0;
    double activation = 0.0;       // pre-ReLU, bias included
    LevelGrid patch{0, 1, 1};      // the receptive-field tiles
};

/// First convolution of the (first) chunk head.
inline const Layer& first_chunk_conv(const AffectModel& model) {
    for (const Layer& l : model.chunk_head(0).layers())
        if (l.spec().kind == LayerKind::conv2d) return l;
    throw std::invalid_argument("chunk head has no convolution layer");
}

/// Response of `filter` with its receptive field's top-left corner at (x, y).
inline double filter_response(const Tensor& w, const Tensor& b, std::size_t filter, const LevelGrid& level,
                              std::size_t x, std::size_t y) {
    const std::size_t fx_n = w.dim(0), fy_n = w.dim(1), cin = w.dim(2), cout = w.dim(3);
    double a = b[filter];
    for (std::size_t fx = 0; fx < fx_n; ++fx)
        for (std::size_t fy = 0; fy < fy_n; ++fy)
            a += w[((fx * fy_n + fy) * cin + level.tile(x + fx, y + fy)) * cout + filter];
    return a;
}

inline LevelGrid slice_level(const LevelGrid& level, std::size_t x, std::size_t y, std::size_t w, std::size_t h) {
    LevelGrid out(level.level_index(), w, h);
    for (std::size_t dx = 0; dx < w; ++dx)
        for (std::size_t dy = 0; dy < h; ++dy) out.set_tile(dx, dy, level.tile(x + dx, y + dy));
    return out;
}

/// For every (filter, level) pair, the receptive-field position with the
/// largest response over all positions that lie fully inside the level.
/// Ties keep the smallest x, then the smallest y. Records are ordered by
/// level, then filter.
inline std::vector<ActivationRecord> max_activating_chunks(const AffectModel& model, const ParameterStore& params,
                                                           const LevelSet& levels) {
    const Layer& conv = first_chunk_conv(model);
    const Tensor& w = params[*conv.weight_index()].value;
    const Tensor& b = params[*conv.bias_index()].value;
    const std::size_t fw = w.dim(0), fh = w.dim(1);
    std::vector<ActivationRecord> out;
    for (const auto& [index, level] : levels) {
        if (level.width() < fw || level.height() < fh)
            throw ShapeError("level " + std::to_string(index) + " is smaller than the filter");
        for (std::size_t f = 0; f < w.dim(3); ++f) {
            ActivationRecord best;
            bool have = false;
            for (std::size_t x = 0; x + fw <= level.width(); ++x)
                for (std::size_t y = 0; y + fh <= level.height(); ++y) {
                    const double a = filter_response(w, b, f, level, x, y);
                    if (!have || a > best.activation) {
                        best.activation = a;
                        best.x = x;
                        best.y = y;
                        have = true;
                    }
                }
            best.filter = f;
            best.level_index = index;
            best.width = fw;
            best.height = fh;
            best.patch = slice_level(level, best.x, best.y, fw, fh);
            out.push_back(std::move(best));
        }
    }
    return out;
}

/// Records sorted by activation, strongest first (ties by level, then filter).
inline std::vector<std::size_t> rank_records(const std::vector<ActivationRecord>& records) {
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return records[a].activation > records[b].activation; });
    return order;
}

inline std::string record_stem(const ActivationRecord& r) {
    return "level" + std::to_string(r.level_index) + "_filter" + std::to_string(r.filter);
}

inline std::string activation_index_tsv(const std::vector<ActivationRecord>& records) {
    std::ostringstream os;
    os << "rank\tfilter\tlevel\tx_begin\tx_end\ty_begin\ty_end\tactivation\tfile\n";
    const auto order = rank_records(records);
    for (std::size_t k = 0; k < order.size(); ++k) {
        const ActivationRecord& r = records[order[k]];
        os << k + 1 << '\t' << r.filter << '\t' << r.level_index << '\t' << r.x << '\t' << r.x + r.width - 1 << '\t'
           << r.y << '\t' << r.y + r.height - 1 << '\t' << format_double(r.activation) << '\t' << record_stem(r)
           << '\n';
    }
    return os.str();
}

/// Tile grid of a one-hot X x Y x 17 patch; anything but exactly one 1 per
/// cell is an error.
inline LevelGrid grid_from_one_hot(const Tensor& t) {
    if (t.rank() != 3 || t.dim(2) != kTileTypes)
        throw ShapeError("expected an X x Y x 17 one-hot patch, got " + to_string(t.shape()));
    LevelGrid g(0, t.dim(0), t.dim(1));
    for (std::size_t x = 0; x < t.dim(0); ++x)
        for (std::size_t y = 0; y < t.dim(1); ++y) {
            std::size_t ones = 0, channel = 0;
            for (std::size_t c = 0; c < kTileTypes; ++c) {
                const double v = t.at(x, y, c);
                if (v == 1.0) {
                    ++ones;
                    channel = c;
                } else if (v != 0.0) {
                    ones = 2;
                }
            }
            if (ones != 1)
                throw std::invalid_argument("cell (" + std::to_string(x) + "," + std::to_string(y) + ") is not one-hot");
            g.set_tile(x, y, static_cast<std::uint8_t>(channel));
        }
    return g;
}

/// Binary PPM (P6): one flat palette colour per tile, `scale` pixels square.
/// Image columns follow x, rows follow y (top row first).
inline std::string render_ppm(const LevelGrid& patch, const TilePalette& palette, std::size_t scale) {
    if (scale == 0) throw std::invalid_argument("render scale must be positive");
    const std::size_t w = patch.width() * scale, h = patch.height() * scale;
    std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    out.reserve(out.size() + w * h * 3);
    for (std::size_t py = 0; py < h; ++py)
        for (std::size_t px = 0; px < w; ++px) {
            const Tile& t = palette[patch.tile(px / scale, py / scale)];
            for (std::uint8_t c : t.rgb) out.push_back(static_cast<char>(c));
        }
    return out;
}

inline std::string render_ppm(const Tensor& one_hot, const TilePalette& palette, std::size_t scale) {
    return render_ppm(grid_from_one_hot(one_hot), palette, scale);
}

/// Palette characters, one text row per y; parse_level reads it back.
inline std::string render_ascii(const LevelGrid& patch, const TilePalette& palette) {
    return patch.to_text(palette).str();
}

inline std::string render_ascii(const Tensor& one_hot, const TilePalette& palette) {
    return render_ascii(grid_from_one_hot(one_hot), palette);
}

} // namespace affect_forge
