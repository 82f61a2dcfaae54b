#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace affect_forge {

/// Layout of one row of the per-timestep log encoding.
namespace log_columns {
inline constexpr std::size_t kEvents = 31;          // 0..30, binary event/state flags
inline constexpr std::size_t kDemographicsBegin = 31;  // 31..34
inline constexpr std::size_t kDemographics = 4;
inline constexpr std::size_t kLevel = 35;
inline constexpr std::size_t kX = 36;
inline constexpr std::size_t kCount = 37;
} // namespace log_columns

/// Ordered event vocabulary. Events inside the continuous range are logged as
/// begin/end pairs and expanded into per-tick state; the rest are instantaneous.
class EventSchema {
public:
    static constexpr std::size_t kRightMove = 4;
    static constexpr std::size_t kLeftMove = 5;
    static constexpr std::size_t kRunning = 6;
    static constexpr std::size_t kDucking = 7;
    static constexpr std::size_t kLittle = 8;
    static constexpr std::size_t kLarge = 9;
    static constexpr std::size_t kFire = 10;

    EventSchema(std::vector<std::string> names, std::size_t continuous_first, std::size_t continuous_last)
        : names_(std::move(names)), first_(continuous_first), last_(continuous_last) {
        if (names_.size() != log_columns::kEvents)
            throw std::invalid_argument("event schema needs exactly 31 names, got " + std::to_string(names_.size()));
        if (std::set<std::string>(names_.begin(), names_.end()).size() != names_.size())
            throw std::invalid_argument("event schema names must be unique");
        if (first_ > last_ || last_ >= names_.size())
            throw std::invalid_argument("continuous event range must lie within the schema");
    }

    static const EventSchema& infinite_mario() {
        static const EventSchema schema(
            {"StartLevel",        "WonLevel",          "LostLevel",           "Jumping",
             "RightMove",         "LeftMove",          "Running",             "Ducking",
             "Little",            "Large",             "Fire",                "DieByGoomba",
             "DeathByShell",      "DeathByBulletBill", "DieByGreenKoopa",     "DeathByGap",
             "UnleashShell",      "BlockCoinDestroy",  "BlockPowerDestroy",   "FireKillGoomba",
             "StompKillGoomba",   "StompKillGreenKoopa", "ShellKillGoomba",   "ShellKillGreenKoopa",
             "FireKillGreenKoopa", "CollectCoin",      "BlockPowerDestroyBulletBill", "StompKillBulletBill",
             "ShellKillBulletBill", "BlockCoinDestroyBulletBill", "CollectCoinBulletBill"},
            4, 10);
        return schema;
    }

    std::size_t size() const noexcept { return names_.size(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::size_t continuous_first() const noexcept { return first_; }
    std::size_t continuous_last() const noexcept { return last_; }

    std::optional<std::size_t> find(std::string_view name) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return i;
        return std::nullopt;
    }

    bool is_continuous(std::size_t event) const noexcept { return event >= first_ && event <= last_; }
    static bool is_size_state(std::size_t event) noexcept { return event >= kLittle && event <= kFire; }

private:
    std::vector<std::string> names_;
    std::size_t first_, last_;
};

} // namespace affect_forge
