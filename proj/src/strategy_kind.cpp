#include "olbench/strategy_kind.hpp"

namespace olbench {

namespace {

struct KindNames {
    StrategyKind kind;
    std::string_view id;
    std::string_view title;
};

constexpr std::array<KindNames, 7> kNames = {{
    {StrategyKind::tinyol, "tinyol", "TinyOL"},
    {StrategyKind::tinyol_batches, "tinyol_batches", "TinyOL batches"},
    {StrategyKind::tinyol_v2, "tinyol_v2", "TinyOL v2"},
    {StrategyKind::tinyol_v2_batches, "tinyol_v2_batches", "TinyOL v2 batches"},
    {StrategyKind::lwf, "lwf", "LWF"},
    {StrategyKind::lwf_batches, "lwf_batches", "LWF batches"},
    {StrategyKind::cwr, "cwr", "CWR"},
}};

}  // namespace

std::string_view to_string(StrategyKind kind) noexcept { return kNames[static_cast<std::size_t>(kind)].id; }

std::string_view display_name(StrategyKind kind) noexcept {
    return kNames[static_cast<std::size_t>(kind)].title;
}

std::optional<StrategyKind> parse_strategy(std::string_view name) noexcept {
    for (const auto& entry : kNames) {
        if (entry.id == name) return entry.kind;
    }
    return std::nullopt;
}

}  // namespace olbench
