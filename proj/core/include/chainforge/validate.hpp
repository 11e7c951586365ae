#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chainforge/chain.hpp"

namespace chainforge {

/// Stable rule identifiers. Downstream tooling matches on these strings.
namespace rule {
inline constexpr std::string_view kStructure = "structure.parse";
inline constexpr std::string_view kLengthMin = "length.min";
inline constexpr std::string_view kLengthMax = "length.max";
inline constexpr std::string_view kFormatting = "formatting.canonical";
inline constexpr std::string_view kShortEvent = "completeness.short_event";
inline constexpr std::string_view kAdjacentDuplicate = "completeness.adjacent_duplicate";
inline constexpr std::string_view kEventChars = "length.event_chars";
inline constexpr std::string_view kAnswerDisjoint = "relevance.answer_disjoint";
inline constexpr std::string_view kTerminalDisjoint = "relevance.terminal_disjoint";
}  // namespace rule

struct Violation {
    std::string rule_id;
    std::string detail;

    friend bool operator==(const Violation&, const Violation&) = default;
};

enum class Verdict { Pass, Fail };

struct ValidationReport {
    Verdict verdict = Verdict::Pass;
    std::vector<Violation> violations;

    bool passed() const noexcept { return verdict == Verdict::Pass; }
    bool has(std::string_view rule_id) const;
    void add(std::string_view rule_id, std::string detail);
    /// Appends `other`'s violations; verdict follows.
    void merge(const ValidationReport& other);

    friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

struct ValidationConfig {
    std::size_t max_events = 10;
    std::size_t min_events = 2;
    std::size_t max_event_chars = 300;
    /// Also require the final event to share a content token with the answer.
    bool require_terminal_relevance = false;

    /// Empty when the config is usable; otherwise a description of the problem.
    std::optional<std::string> check() const;
};

/// Structure, length, formatting, completeness and per-event size checks.
/// Every violated rule is reported. When the text does not parse, only the
/// structure violation is reported since nothing else can be evaluated.
ValidationReport validate_chain(std::string_view raw, const ValidationConfig& config = {});

/// Cheap lexical screen against the QA pair: the chain must share at least
/// one non-stopword token with the answer. It filters obvious misses before
/// the verifier model is consulted; it does not replace it.
ValidationReport validate_against_qa(const CausalChain& chain, std::string_view question,
                                     std::string_view answer, const ValidationConfig& config = {});

}  // namespace chainforge
