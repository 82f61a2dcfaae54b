#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "affect_forge/error.hpp"
#include "affect_forge/text_io.hpp"

namespace affect_forge {

/// Flat `key = value` text. Blank lines and lines starting with '#' are
/// skipped. Entries keep file order and keys may repeat.
class KeyValueFile {
public:
    struct Entry {
        std::string key;
        std::string value;
        std::size_t line;
    };

    static KeyValueFile parse(std::string_view text, const std::string& origin = "<config>") {
        KeyValueFile f;
        f.origin_ = origin;
        std::size_t line_no = 0;
        for (std::string_view raw : lines(text)) {
            ++line_no;
            const std::string_view line = trim(raw);
            if (line.empty() || line.front() == '#') continue;
            const std::size_t eq = line.find('=');
            if (eq == std::string_view::npos)
                throw ParseError(origin + ": expected 'key = value', got '" + std::string(line) + "'", line_no);
            const std::string_view key = trim(line.substr(0, eq));
            if (key.empty()) throw ParseError(origin + ": empty key", line_no);
            f.entries_.push_back({std::string(key), std::string(trim(line.substr(eq + 1))), line_no});
        }
        return f;
    }

    static KeyValueFile load(const std::filesystem::path& path) { return parse(read_file(path), path.string()); }

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    const std::string& origin() const noexcept { return origin_; }

    /// Last value for `key`, if any.
    std::optional<std::string> get(std::string_view key) const {
        std::optional<std::string> v;
        for (const auto& e : entries_)
            if (e.key == key) v = e.value;
        return v;
    }

private:
    std::vector<Entry> entries_;
    std::string origin_;
};

} // namespace affect_forge
