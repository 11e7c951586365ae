#include <gtest/gtest.h>

#include "chainforge/config.hpp"
#include "fixtures.hpp"

using namespace chainforge;

namespace {

const char* kBase = R"(
[backend.generator]
kind = remote
endpoint_url = "https://example.invalid/v1/chat/completions"
api_key_env = GEN_KEY
model = vlm-a

[backend.verifier]
kind = remote
endpoint_url = https://example.invalid/v1/chat/completions
model = llm-b
)";

}  // namespace

TEST(Config, ExampleFileLoads) {
    auto c = load_config(std::filesystem::path(CHAINFORGE_CONFIG_DIR) / "chainforge.toml");
    ASSERT_TRUE(c.ok()) << c.error();
    EXPECT_EQ(c->roles.size(), 5u);
    EXPECT_EQ(c->pipeline.human_stage, HumanStageMode::Disabled);
    EXPECT_TRUE(c->actors_lexicon);
    EXPECT_TRUE(std::filesystem::exists(*c->actors_lexicon));
    EXPECT_FALSE(c->require_roles({BackendRole::Generator, BackendRole::Judge}));
}

TEST(Config, ParsesRemoteBindingsAndRelativePaths) {
    auto c = parse_config(std::string(kBase) + "[paths]\nruns_dir = out/runs\n[validation]\nmax_events = 8\n", "/base");
    ASSERT_TRUE(c.ok()) << c.error();
    const auto& g = c->roles.at(BackendRole::Generator);
    EXPECT_EQ(g.kind, RoleBinding::Kind::Remote);
    EXPECT_EQ(g.backend.endpoint_url, "https://example.invalid/v1/chat/completions");
    EXPECT_EQ(g.backend.api_key_env_name, "GEN_KEY");
    EXPECT_EQ(c->paths.runs_dir, std::filesystem::path("/base/out/runs"));
    EXPECT_EQ(c->validation.max_events, 8u);
    const auto j = to_json(*c);
    EXPECT_EQ(j["backends"]["generator"]["api_key_env"], "GEN_KEY");
    EXPECT_EQ(j.dump().find("Bearer"), std::string::npos);
}

TEST(Config, StrictModelsRejectsSharedModel) {
    std::string text = kBase;
    text.replace(text.find("llm-b"), 5, "vlm-a");
    EXPECT_FALSE(parse_config(text, ".").ok());
    EXPECT_TRUE(parse_config(text + "[pipeline]\nstrict_models = false\n", ".").ok());
}

TEST(Config, Errors) {
    EXPECT_FALSE(parse_config("[nope]\nx = 1\n", ".").ok());
    EXPECT_FALSE(parse_config("[validation]\nmax_evnts = 3\n", ".").ok());
    EXPECT_FALSE(parse_config("[validation]\nmax_events = ten\n", ".").ok());
    EXPECT_FALSE(parse_config("[validation]\nmin_events = 12\n", ".").ok());
    EXPECT_FALSE(parse_config("[pipeline]\nhuman_stage_enabled = maybe\n", ".").ok());
    EXPECT_FALSE(parse_config("[backend.oracle]\nbuiltin = gold_judge\n", ".").ok());
    EXPECT_FALSE(parse_config("[backend.judge]\nbuiltin = psychic\n", ".").ok());
    EXPECT_FALSE(parse_config("[backend.judge]\nkind = scripted\n", ".").ok());
    EXPECT_FALSE(parse_config("[backend.judge]\nkind = remote\nmodel = m\n", ".").ok());
    EXPECT_FALSE(parse_config("[backend.judge]\nbuiltin = gold_judge\ntemperature = 3\n", ".").ok());
    EXPECT_FALSE(load_config("/definitely/not/here.toml").ok());
}

TEST(Config, HumanStageModes) {
    auto c = parse_config("[pipeline]\nhuman_stage_enabled = true\n", ".");
    EXPECT_EQ(c->pipeline.human_stage, HumanStageMode::Queue);
    c = parse_config("[pipeline]\nhuman_stage_enabled = true\nauto_approve = true\n", ".");
    EXPECT_EQ(c->pipeline.human_stage, HumanStageMode::AutoApprove);
    c = parse_config("[pipeline]\nauto_approve = true\n", ".");
    EXPECT_EQ(c->pipeline.human_stage, HumanStageMode::Disabled);
}

TEST(Config, MakeBackendPrefersScriptOverBuiltin) {
    const auto corpus = fx::qa_corpus();
    auto c = parse_config("[backend.generator]\nscript = scripts/flaky_generator.json\nbuiltin = gold_chain_echo\n",
                          fx::dir());
    ASSERT_TRUE(c.ok()) << c.error();
    auto b = make_backend(*c, BackendRole::Generator, corpus);
    ASSERT_TRUE(b.ok()) << b.error();
    auto req = generator_request(PromptTemplates::defaults(), corpus[0].question, corpus[0].gold_answer, {});
    EXPECT_EQ((*b)->invoke(req)->text, "The boy fell because he hit a rock.");
    req = generator_request(PromptTemplates::defaults(), corpus[1].question, corpus[1].gold_answer, {});
    EXPECT_EQ((*b)->invoke(req)->text, serialize_chain(*corpus[1].gold_chain));
    EXPECT_FALSE(make_backend(*c, BackendRole::Judge, corpus).ok());
}
