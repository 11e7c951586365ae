#include "chainforge/validate.hpp"

#include <algorithm>
#include <set>

#include "chainforge/text.hpp"

namespace chainforge {

namespace {

std::set<std::string> content_tokens(std::string_view text) {
    std::set<std::string> out;
    for (auto& t : tokenize(text)) {
        if (!is_stopword(t)) out.insert(std::move(t));
    }
    return out;
}

bool intersects(const std::set<std::string>& a, const std::set<std::string>& b) {
    for (const auto& t : a) {
        if (b.contains(t)) return true;
    }
    return false;
}

}  // namespace

bool ValidationReport::has(std::string_view rule_id) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.rule_id == rule_id; });
}

void ValidationReport::add(std::string_view rule_id, std::string detail) {
    violations.push_back({std::string(rule_id), std::move(detail)});
    verdict = Verdict::Fail;
}

void ValidationReport::merge(const ValidationReport& other) {
    for (const auto& v : other.violations) add(v.rule_id, v.detail);
}

std::optional<std::string> ValidationConfig::check() const {
    if (min_events < 1 || max_events < 1 || max_event_chars < 1) {
        return "validation bounds must be >= 1";
    }
    if (min_events > max_events) return "min_events must not exceed max_events";
    return std::nullopt;
}

ValidationReport validate_chain(std::string_view raw, const ValidationConfig& config) {
    ValidationReport report;

    auto parsed = parse_chain(raw);
    if (!parsed) {
        const auto& err = parsed.error();
        report.add(rule::kStructure, std::string(to_string(err.kind)) + " at offset " +
                                         std::to_string(err.position) + ": " + err.message);
        return report;
    }
    const CausalChain& chain = parsed.value();
    const std::size_t n = chain.size();

    if (n < config.min_events) {
        report.add(rule::kLengthMin, std::to_string(n) + " events; at least " +
                                         std::to_string(config.min_events) + " required");
    }
    if (n > config.max_events) {
        report.add(rule::kLengthMax, std::to_string(n) + " events; at most " +
                                         std::to_string(config.max_events) + " allowed");
    }

    // A parsed chain always has a canonical form; the check guards the
    // serializer against regressions.
    if (auto reparsed = parse_chain(serialize_chain(chain)); !reparsed || !chain_equal(*reparsed, chain)) {
        report.add(rule::kFormatting, "canonical form does not round-trip");
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (split_whitespace(chain[i].str()).size() < 2) {
            report.add(rule::kShortEvent, "event " + std::to_string(i + 1) + " has fewer than 2 tokens");
        }
        if (i + 1 < n && chain[i].str() == chain[i + 1].str()) {
            report.add(rule::kAdjacentDuplicate,
                       "events " + std::to_string(i + 1) + " and " + std::to_string(i + 2) + " are identical");
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (chain[i].str().size() > config.max_event_chars) {
            report.add(rule::kEventChars, "event " + std::to_string(i + 1) + " has " +
                                              std::to_string(chain[i].str().size()) + " chars; limit " +
                                              std::to_string(config.max_event_chars));
        }
    }
    return report;
}

ValidationReport validate_against_qa(const CausalChain& chain, std::string_view /*question*/,
                                     std::string_view answer, const ValidationConfig& config) {
    ValidationReport report;
    const auto answer_tokens = content_tokens(answer);

    std::set<std::string> chain_content;
    for (const auto& e : chain.events()) chain_content.merge(content_tokens(e.str()));

    if (!intersects(chain_content, answer_tokens)) {
        report.add(rule::kAnswerDisjoint, "chain shares no content token with the answer");
    }
    if (config.require_terminal_relevance &&
        !intersects(content_tokens(chain.events().back().str()), answer_tokens)) {
        report.add(rule::kTerminalDisjoint, "final event shares no content token with the answer");
    }
    return report;
}

}  // namespace chainforge
