#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace olbench {

/// The seven online update rules, in reporting order.
enum class StrategyKind { tinyol, tinyol_batches, tinyol_v2, tinyol_v2_batches, lwf, lwf_batches, cwr };

inline constexpr std::array<StrategyKind, 7> kAllStrategies = {
    StrategyKind::tinyol, StrategyKind::tinyol_batches, StrategyKind::tinyol_v2, StrategyKind::tinyol_v2_batches,
    StrategyKind::lwf,    StrategyKind::lwf_batches,    StrategyKind::cwr,
};

/// Config/report identifier, e.g. "tinyol_v2_batches".
std::string_view to_string(StrategyKind kind) noexcept;
/// Human-readable column title, e.g. "TinyOL v2 batches".
std::string_view display_name(StrategyKind kind) noexcept;
std::optional<StrategyKind> parse_strategy(std::string_view name) noexcept;

/// Whether the rule accumulates over batches of k samples.
constexpr bool uses_batches(StrategyKind kind) noexcept {
    return kind == StrategyKind::tinyol_batches || kind == StrategyKind::tinyol_v2_batches ||
           kind == StrategyKind::lwf_batches || kind == StrategyKind::cwr;
}

}  // namespace olbench
