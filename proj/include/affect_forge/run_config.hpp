#pragma once

// Flat key-value run configuration. Every key can come from a config file
// (`key = value`) or from a command-line override; later sources win.
// Relative paths in a config file are resolved against the file's directory,
// relative paths given on the command line against the working directory.

#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "affect_forge/error.hpp"
#include "affect_forge/kv_config.hpp"
#include "affect_forge/text_io.hpp"

namespace affect_forge {

class RunConfig {
public:
    struct Key {
        std::string_view name;
        bool is_path;
        std::string_view fallback;  // empty means "no default"
    };

    static constexpr std::array<Key, 29> kKeys = {{
        {"levels_dir", true, ""},
        {"sessions_dir", true, ""},
        {"manifest", true, ""},
        {"labels", true, ""},
        {"ratings", true, ""},
        {"palette", true, ""},
        {"remap", true, ""},
        {"weights", true, ""},
        {"out_dir", true, "out"},
        {"crop", false, ""},
        {"metric", false, "fun"},
        {"variant", false, "full"},
        {"seed", false, "0"},
        {"lr", false, "7e-5"},
        {"batch", false, "32"},
        {"epochs", false, "15"},
        {"keep_prob", false, "0.98"},
        {"window", false, "10"},
        {"walk_speed", false, "0.1"},
        {"run_multiplier", false, "2.0"},
        {"split_unit", false, "point"},
        {"tie_chunk_weights", false, "true"},
        {"ordered_levels", false, "false"},
        {"eval_split", false, "test"},
        {"scale", false, "8"},
        {"synth_players", false, "4"},
        {"synth_levels", false, "16"},
        {"synth_length", false, "904"},
        {"session_length", false, "904"},
    }};

    static const Key* find_key(std::string_view name) {
        for (const Key& k : kKeys)
            if (k.name == name) return &k;
        return nullptr;
    }

    /// Reads a config file; unknown keys are rejected with their line number.
    void merge_file(const std::filesystem::path& path) {
        if (!std::filesystem::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
        const KeyValueFile kv = KeyValueFile::load(path);
        const std::filesystem::path base = path.parent_path();
        for (const auto& e : kv.entries()) {
            const Key* k = find_key(e.key);
            if (!k) throw ConfigError(path.string() + ":" + std::to_string(e.line) + ": unknown key '" + e.key + "'");
            values_[e.key] = k->is_path && !e.value.empty() ? (base / e.value).lexically_normal().string() : e.value;
        }
    }

    /// Command-line override, value taken as given.
    void set(const std::string& key, const std::string& value) {
        if (!find_key(key)) throw ConfigError("unknown config key '" + key + "'");
        values_[key] = value;
    }

    /// `key=value` form used by --set.
    void set_assignment(std::string_view assignment) {
        const std::size_t eq = assignment.find('=');
        if (eq == std::string_view::npos || eq == 0)
            throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
        set(std::string(trim(assignment.substr(0, eq))), std::string(trim(assignment.substr(eq + 1))));
    }

    bool has(std::string_view key) const { return values_.count(std::string(key)) != 0; }

    std::optional<std::string> get(std::string_view key) const {
        if (auto it = values_.find(std::string(key)); it != values_.end()) return it->second;
        const Key* k = find_key(key);
        if (!k) throw std::logic_error("unknown config key '" + std::string(key) + "'");
        if (k->fallback.empty()) return std::nullopt;
        return std::string(k->fallback);
    }

    std::string require(std::string_view key) const {
        auto v = get(key);
        if (!v || v->empty()) throw ConfigError("missing required setting '" + std::string(key) + "'");
        return *v;
    }

    std::string get_or(std::string_view key, std::string fallback) const {
        auto v = get(key);
        return v ? *v : std::move(fallback);
    }

    /// Path that must exist, reported by setting name and path when missing.
    std::filesystem::path existing_path(std::string_view key, bool directory = false) const {
        const std::filesystem::path p = require(key);
        const bool ok = directory ? std::filesystem::is_directory(p) : std::filesystem::is_regular_file(p);
        if (!ok) throw ConfigError(std::string(key) + (directory ? " directory" : " file") + " not found: " + p.string());
        return p;
    }

    std::optional<std::filesystem::path> optional_path(std::string_view key) const {
        auto v = get(key);
        if (!v || v->empty()) return std::nullopt;
        if (!std::filesystem::exists(*v)) throw ConfigError(std::string(key) + " file not found: " + *v);
        return std::filesystem::path(*v);
    }

    double positive_double(std::string_view key) const {
        const std::string v = require(key);
        const auto d = parse_double(v);
        if (!d || !(*d > 0.0)) throw ConfigError(std::string(key) + " must be a positive number, got '" + v + "'");
        return *d;
    }

    std::size_t positive_size(std::string_view key) const {
        const std::string v = require(key);
        const auto n = parse_int<std::size_t>(v);
        if (!n || *n == 0) throw ConfigError(std::string(key) + " must be a positive integer, got '" + v + "'");
        return *n;
    }

    std::uint64_t seed() const {
        const std::string v = require("seed");
        const auto n = parse_int<std::uint64_t>(v);
        if (!n) throw ConfigError("seed must be a non-negative integer, got '" + v + "'");
        return *n;
    }

    bool flag(std::string_view key) const {
        const std::string v = require(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError(std::string(key) + " must be true or false, got '" + v + "'");
    }

private:
    std::map<std::string, std::string> values_;
};

} // namespace affect_forge
