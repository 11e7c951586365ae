#pragma once

// Causal chain data model and the bracketed-arrow text format:
//
//   [Event A] -> [Event B] -> [Event C]
//
// Input accepts `->` and the Unicode arrow U+2192 interchangeably; output is
// always the ASCII form with single spaces around each arrow.

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chainforge/result.hpp"

namespace chainforge {

/// One event description. Always trimmed, non-empty, and free of brackets
/// and newlines.
class EventText {
  public:
    /// Trims `raw` and checks the invariants; nullopt when they fail.
    static std::optional<EventText> make(std::string_view raw);

    const std::string& str() const noexcept { return text_; }

    friend bool operator==(const EventText&, const EventText&) = default;

  private:
    explicit EventText(std::string text) : text_(std::move(text)) {}
    std::string text_;
};

/// Ordered events; events[i] is read as an antecedent of events[i+1].
/// Never empty. Length limits are a validation concern, not a type one.
class CausalChain {
  public:
    static std::optional<CausalChain> make(std::vector<EventText> events);
    /// Convenience for literals and tests; nullopt if any text is invalid.
    static std::optional<CausalChain> from_texts(const std::vector<std::string>& texts);

    const std::vector<EventText>& events() const noexcept { return events_; }
    std::size_t size() const noexcept { return events_.size(); }
    const EventText& operator[](std::size_t i) const { return events_[i]; }

    std::vector<std::string> texts() const;

    friend bool operator==(const CausalChain&, const CausalChain&) = default;

  private:
    explicit CausalChain(std::vector<EventText> events) : events_(std::move(events)) {}
    std::vector<EventText> events_;
};

enum class ChainParseErrorKind {
    EmptyInput,
    UnbalancedBracket,
    EmptyEvent,
    MissingDelimiter,
    IllegalCharacter,
};

const char* to_string(ChainParseErrorKind kind);

struct ChainParseError {
    ChainParseErrorKind kind;
    std::size_t position;  // byte offset into the input, <= input.size()
    std::string message;
};

Result<CausalChain, ChainParseError> parse_chain(std::string_view input);

std::string serialize_chain(const CausalChain& chain);

/// Same length and byte-equal (trimmed) event texts, pairwise.
bool chain_equal(const CausalChain& a, const CausalChain& b);

/// Trims ASCII whitespace from both ends.
std::string_view trim(std::string_view s);

}  // namespace chainforge
