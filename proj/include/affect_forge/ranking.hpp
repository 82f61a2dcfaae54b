#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "affect_forge/dataset.hpp"
#include "affect_forge/error.hpp"
#include "affect_forge/text_io.hpp"

namespace affect_forge {

/// Respondent ratings, `level_index<TAB>metric<TAB>rating` per line, ratings 1-5.
class RatingsTable {
public:
    static RatingsTable parse(std::string_view text) {
        RatingsTable t;
        std::size_t line_no = 0;
        for (std::string_view raw : lines(text)) {
            ++line_no;
            const std::string_view line = trim(raw);
            if (line.empty() || line.front() == '#') continue;
            const auto f = split(line, '\t');
            if (f.size() != 3) throw ParseError("expected level<TAB>metric<TAB>rating", line_no);
            const auto level = parse_int<int>(f[0]);
            const auto rating = parse_double(f[2]);
            if (!level) throw ParseError("bad level index '" + std::string(f[0]) + "'", line_no);
            if (!rating || *rating < 1.0 || *rating > 5.0)
                throw ParseError("rating must be a number in [1, 5], got '" + std::string(f[2]) + "'", line_no);
            auto& acc = t.sums_[std::string(f[1])][*level];
            acc.first += *rating;
            ++acc.second;
        }
        return t;
    }

    static RatingsTable load(const std::filesystem::path& path) { return parse(read_file(path)); }

    /// Mean rating of every rated level for `metric`, keyed by level index.
    std::map<int, double> means(const std::string& metric) const {
        auto it = sums_.find(metric);
        if (it == sums_.end()) throw ConfigError("no ratings for metric '" + metric + "'");
        std::map<int, double> out;
        for (const auto& [level, acc] : it->second) out[level] = acc.first / static_cast<double>(acc.second);
        return out;
    }

private:
    std::map<std::string, std::map<int, std::pair<double, std::size_t>>> sums_;
};

/// Highest mean is most, lowest is least, everything else mid. Levels are
/// ordered by descending mean with ties kept in index order; the first is
/// most and the last is least, so among tied maxima the lowest index wins
/// most and among tied minima the highest index gets least.
inline std::vector<RankLabel> ratings_to_rankings(const std::vector<double>& means) {
    if (means.size() < 3)
        throw std::invalid_argument("need at least 3 levels to rank, got " + std::to_string(means.size()));
    std::vector<std::size_t> order(means.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return means[a] > means[b]; });
    std::vector<RankLabel> out(means.size(), RankLabel::mid);
    out[order.front()] = RankLabel::most;
    out[order.back()] = RankLabel::least;
    return out;
}

} // namespace affect_forge
