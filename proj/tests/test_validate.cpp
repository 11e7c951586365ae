#include <gtest/gtest.h>

#include "chainforge/validate.hpp"
#include "fixtures.hpp"

using namespace chainforge;

namespace {

ValidationConfig config_from(const nlohmann::json& j) {
    ValidationConfig c;
    if (!j.is_object()) return c;
    c.max_events = j.value("max_events", c.max_events);
    c.min_events = j.value("min_events", c.min_events);
    c.max_event_chars = j.value("max_event_chars", c.max_event_chars);
    c.require_terminal_relevance = j.value("require_terminal_relevance", c.require_terminal_relevance);
    return c;
}

std::vector<std::string> rule_ids(const ValidationReport& r) {
    std::vector<std::string> out;
    for (const auto& v : r.violations) out.push_back(v.rule_id);
    return out;
}

std::string events(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += " -> ";
        s += "[Step number " + std::to_string(i + 1) + " happens]";
    }
    return s;
}

}  // namespace

TEST(Validate, FixtureSetYieldsExpectedRuleIds) {
    const auto cases = fx::read_json("validation_chains.json");
    ASSERT_EQ(cases.size(), 30u);
    std::size_t valid = 0;
    for (const auto& c : cases) {
        const auto cfg = config_from(c.value("config", nlohmann::json()));
        const auto raw = c["raw"].get<std::string>();
        auto report = validate_chain(raw, cfg);
        if (auto parsed = parse_chain(raw)) {
            report.merge(validate_against_qa(*parsed, c["question"].get<std::string>(),
                                             c["answer"].get<std::string>(), cfg));
        }
        EXPECT_EQ(rule_ids(report), c["expected"].get<std::vector<std::string>>()) << c["name"];
        EXPECT_EQ(report.passed(), c["expected"].empty()) << c["name"];
        valid += report.passed() ? 1 : 0;
    }
    EXPECT_EQ(valid, 10u);
}

TEST(Validate, ElevenEventsFailLengthMax) {
    auto r = validate_chain(events(11));
    EXPECT_FALSE(r.passed());
    EXPECT_TRUE(r.has(rule::kLengthMax));
    EXPECT_TRUE(validate_chain(events(10)).passed());
}

TEST(Validate, BoundariesOfLength) {
    EXPECT_TRUE(validate_chain(events(1)).has(rule::kLengthMin));
    EXPECT_TRUE(validate_chain(events(2)).passed());
}

TEST(Validate, ParseFailureReportsOnlyStructure) {
    auto r = validate_chain("[a] [b] [c]");
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_EQ(r.violations[0].rule_id, rule::kStructure);
}

TEST(Validate, EveryRuleReportedAtOnce) {
    ValidationConfig cfg;
    cfg.max_events = 3;
    cfg.max_event_chars = 20;
    auto r = validate_chain("[go] -> [go] -> [a very long event that exceeds twenty bytes] -> [x y]", cfg);
    EXPECT_TRUE(r.has(rule::kLengthMax));
    EXPECT_TRUE(r.has(rule::kShortEvent));
    EXPECT_TRUE(r.has(rule::kAdjacentDuplicate));
    EXPECT_TRUE(r.has(rule::kEventChars));
}

TEST(Validate, CanonicalFormattingNeverFiresOnParsedInput) {
    for (std::string_view s : {"[A b]->[C d]", "  [ A b ]  \xE2\x86\x92  [ C d ]  ", "[A b] -> [C d]"}) {
        EXPECT_FALSE(validate_chain(s).has(rule::kFormatting)) << s;
    }
}

TEST(Validate, AnswerRelevance) {
    auto c = parse_chain("[The kettle heats up] -> [Water starts boiling]");
    ASSERT_TRUE(c.ok());
    EXPECT_TRUE(validate_against_qa(*c, "Why does it whistle?", "the lid is rattling now").has(rule::kAnswerDisjoint));
    EXPECT_TRUE(validate_against_qa(*c, "Why does it whistle?", "water boils").passed());
    EXPECT_TRUE(validate_against_qa(*c, "q", "the up now").has(rule::kAnswerDisjoint));
}

TEST(Validate, TerminalRelevanceIsOptIn) {
    auto c = parse_chain("[Water gets hot] -> [The kettle whistles]");
    ASSERT_TRUE(c.ok());
    ValidationConfig strict;
    strict.require_terminal_relevance = true;
    EXPECT_TRUE(validate_against_qa(*c, "q", "water").passed());
    EXPECT_TRUE(validate_against_qa(*c, "q", "water", strict).has(rule::kTerminalDisjoint));
    EXPECT_TRUE(validate_against_qa(*c, "q", "kettle whistles", strict).passed());
}

TEST(Validate, ConfigCheck) {
    ValidationConfig c;
    EXPECT_FALSE(c.check());
    c.min_events = 0;
    EXPECT_TRUE(c.check());
    c = {};
    c.min_events = 11;
    EXPECT_TRUE(c.check());
    c = {};
    c.max_event_chars = 0;
    EXPECT_TRUE(c.check());
}

TEST(Validate, ReportMergeFollowsVerdict) {
    ValidationReport a;
    ValidationReport b;
    b.add(rule::kLengthMin, "x");
    a.merge(b);
    EXPECT_FALSE(a.passed());
    EXPECT_EQ(a.violations.size(), 1u);
}
