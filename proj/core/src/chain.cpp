#include "chainforge/chain.hpp"

namespace chainforge {

namespace {

constexpr std::string_view kUnicodeArrow = "\xE2\x86\x92";  // U+2192
constexpr std::string_view kAsciiArrow = "->";
constexpr std::string_view kCanonicalSeparator = " -> ";

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_newline(char c) { return c == '\n' || c == '\r'; }

// Length of the arrow starting at `pos`, or 0.
std::size_t arrow_at(std::string_view s, std::size_t pos) {
    if (s.substr(pos, kAsciiArrow.size()) == kAsciiArrow) return kAsciiArrow.size();
    if (s.substr(pos, kUnicodeArrow.size()) == kUnicodeArrow) return kUnicodeArrow.size();
    return 0;
}

bool contains_arrow(std::string_view s) {
    return s.find(kAsciiArrow) != std::string_view::npos ||
           s.find(kUnicodeArrow) != std::string_view::npos;
}

std::size_t skip_space(std::string_view s, std::size_t pos) {
    while (pos < s.size() && is_space(s[pos])) ++pos;
    return pos;
}

Unexpected<ChainParseError> error_at(ChainParseErrorKind kind, std::size_t pos, std::string msg) {
    return fail(ChainParseError{kind, pos, std::move(msg)});
}

}  // namespace

std::string_view trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

std::optional<EventText> EventText::make(std::string_view raw) {
    const auto t = trim(raw);
    if (t.empty()) return std::nullopt;
    for (char c : t) {
        if (c == '[' || c == ']' || is_newline(c)) return std::nullopt;
    }
    if (contains_arrow(t)) return std::nullopt;
    return EventText(std::string(t));
}

std::optional<CausalChain> CausalChain::make(std::vector<EventText> events) {
    if (events.empty()) return std::nullopt;
    return CausalChain(std::move(events));
}

std::optional<CausalChain> CausalChain::from_texts(const std::vector<std::string>& texts) {
    std::vector<EventText> events;
    events.reserve(texts.size());
    for (const auto& t : texts) {
        auto e = EventText::make(t);
        if (!e) return std::nullopt;
        events.push_back(std::move(*e));
    }
    return make(std::move(events));
}

std::vector<std::string> CausalChain::texts() const {
    std::vector<std::string> out;
    out.reserve(events_.size());
    for (const auto& e : events_) out.push_back(e.str());
    return out;
}

const char* to_string(ChainParseErrorKind kind) {
    switch (kind) {
        case ChainParseErrorKind::EmptyInput: return "EmptyInput";
        case ChainParseErrorKind::UnbalancedBracket: return "UnbalancedBracket";
        case ChainParseErrorKind::EmptyEvent: return "EmptyEvent";
        case ChainParseErrorKind::MissingDelimiter: return "MissingDelimiter";
        case ChainParseErrorKind::IllegalCharacter: return "IllegalCharacter";
    }
    return "Unknown";
}

Result<CausalChain, ChainParseError> parse_chain(std::string_view input) {
    using K = ChainParseErrorKind;

    std::size_t pos = skip_space(input, 0);
    if (pos == input.size()) return error_at(K::EmptyInput, 0, "input is blank");

    std::vector<EventText> events;
    for (;;) {
        // Expect one bracketed event at `pos`.
        if (pos >= input.size()) {
            return error_at(K::UnbalancedBracket, input.size(), "expected '[' after arrow");
        }
        if (input[pos] != '[') {
            if (input[pos] == ']') return error_at(K::UnbalancedBracket, pos, "stray ']'");
            return error_at(K::UnbalancedBracket, pos, "expected '[' to open an event");
        }
        const std::size_t open = pos;
        std::size_t close = open + 1;
        for (; close < input.size(); ++close) {
            const char c = input[close];
            if (c == ']') break;
            if (c == '[') return error_at(K::UnbalancedBracket, close, "'[' inside an event");
            if (is_newline(c)) return error_at(K::IllegalCharacter, close, "newline inside an event");
            if (arrow_at(input, close) != 0) {
                return error_at(K::IllegalCharacter, close, "arrow inside an event");
            }
        }
        if (close == input.size()) return error_at(K::UnbalancedBracket, open, "unclosed '['");

        auto event = EventText::make(input.substr(open + 1, close - open - 1));
        if (!event) return error_at(K::EmptyEvent, open, "event text is empty");
        events.push_back(std::move(*event));

        // Between events: optional whitespace, arrow, optional whitespace.
        pos = skip_space(input, close + 1);
        if (pos == input.size()) break;
        if (const auto n = arrow_at(input, pos); n != 0) {
            pos = skip_space(input, pos + n);
            continue;
        }
        if (input[pos] == ']') return error_at(K::UnbalancedBracket, pos, "stray ']'");
        return error_at(K::MissingDelimiter, pos, "events must be joined by an arrow");
    }
    return *CausalChain::make(std::move(events));
}

std::string serialize_chain(const CausalChain& chain) {
    std::string out;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        if (i != 0) out += kCanonicalSeparator;
        out += '[';
        out += chain[i].str();
        out += ']';
    }
    return out;
}

bool chain_equal(const CausalChain& a, const CausalChain& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (trim(a[i].str()) != trim(b[i].str())) return false;
    }
    return true;
}

}  // namespace chainforge
