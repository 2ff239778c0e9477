#include "affectloop/types.hpp"

#include <array>

namespace affectloop {

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> parse_from(const std::array<std::string_view, N>& names, std::string_view name) {
    for (std::size_t i = 0; i < N; ++i) {
        if (names[i] == name) return static_cast<Enum>(i);
    }
    return std::nullopt;
}

constexpr std::array<std::string_view, 3> kConsentNames{"delete", "research_only", "public"};
constexpr std::array<std::string_view, 6> kQcNames{
    "pending", "passed", "rejected_dark", "rejected_bright", "rejected_blur", "rejected_decode",
};
constexpr std::array<std::string_view, 3> kBranchNames{
    "unanimous", "automatic_fallback", "discarded_no_support",
};

}  // namespace

std::string_view to_string(ConsentTier tier) { return kConsentNames[static_cast<std::size_t>(tier)]; }
std::optional<ConsentTier> parse_consent(std::string_view name) {
    return parse_from<ConsentTier>(kConsentNames, name);
}

std::string_view to_string(QcStatus status) { return kQcNames[static_cast<std::size_t>(status)]; }
std::optional<QcStatus> parse_qc_status(std::string_view name) {
    return parse_from<QcStatus>(kQcNames, name);
}

std::string_view to_string(DecisionBranch branch) {
    return kBranchNames[static_cast<std::size_t>(branch)];
}
std::optional<DecisionBranch> parse_branch(std::string_view name) {
    return parse_from<DecisionBranch>(kBranchNames, name);
}

}  // namespace affectloop
