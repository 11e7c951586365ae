#include <gtest/gtest.h>

#include <thread>

#include "chainforge/oracle.hpp"
#include "chainforge/pipeline.hpp"
#include "fixtures.hpp"

using namespace chainforge;

namespace {

std::unique_ptr<ScriptedBackend> script(const std::string& name) {
    auto b = ScriptedBackend::from_file(fx::path("scripts/" + name));
    if (!b) throw std::runtime_error(b.error());
    return std::move(b).value();
}

std::vector<Sample> first(std::size_t n) {
    auto c = fx::qa_corpus();
    c.resize(n);
    return c;
}

}  // namespace

TEST(Pipeline, MalformedTwiceThenValid) {
    const auto corpus = first(1);
    auto gen = script("flaky_generator.json");
    ScriptedBackend ver;
    ver.set_responder(accepting_verifier());
    PipelineConfig cfg;
    auto recs = construct_chains(corpus, {gen.get(), &ver, nullptr}, PromptTemplates::defaults(), {}, cfg);
    ASSERT_EQ(recs.size(), 1u);
    const auto& r = recs[0];
    ASSERT_EQ(r.attempts.size(), 3u);
    ASSERT_TRUE(r.final_chain);
    EXPECT_TRUE(chain_equal(*r.final_chain, *corpus[0].gold_chain));
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& a = r.attempts[i];
        EXPECT_EQ(a.attempt_no, i + 1);
        EXPECT_EQ(a.parse_stage(), StageStatus::Fail);
        EXPECT_EQ(a.validation_stage(), StageStatus::Skipped);
        EXPECT_EQ(a.verifier_stage(), StageStatus::Skipped);
        EXPECT_EQ(a.human_stage(), StageStatus::Skipped);
        EXPECT_FALSE(a.passed());
    }
    const auto& last = r.attempts[2];
    EXPECT_EQ(last.parse_stage(), StageStatus::Pass);
    EXPECT_EQ(last.validation_stage(), StageStatus::Pass);
    EXPECT_EQ(last.verifier_stage(), StageStatus::Pass);
    EXPECT_EQ(last.human, HumanStatus::PolicySkipped);
    EXPECT_TRUE(last.passed());
    // Feedback from failed attempts reaches the next prompt.
    const auto calls = gen->calls();
    ASSERT_EQ(calls.size(), 3u);
    EXPECT_NE(render_prompt(calls[2]).find("structure.parse"), std::string::npos);
}

TEST(Pipeline, AlwaysRejectExhausts) {
    const auto corpus = first(3);
    ScriptedBackend gen;
    gen.set_responder(gold_chain_echo(corpus));
    auto ver = script("rejecting_verifier.json");
    PipelineConfig cfg;
    cfg.max_attempts = 2;
    std::size_t callbacks = 0;
    auto recs = construct_chains(corpus, {&gen, ver.get(), nullptr}, PromptTemplates::defaults(), {}, cfg,
                                 [&](const ConstructionRecord&) { ++callbacks; });
    EXPECT_EQ(callbacks, 3u);
    for (const auto& r : recs) {
        EXPECT_TRUE(r.exhausted());
        ASSERT_EQ(r.attempts.size(), 2u);
        for (const auto& a : r.attempts) {
            EXPECT_EQ(a.validation_stage(), StageStatus::Pass);
            EXPECT_EQ(a.verifier_stage(), StageStatus::Fail);
            EXPECT_EQ(a.human_stage(), StageStatus::Skipped);
            EXPECT_EQ(a.verifier_reason, "the chain does not explain the answer");
        }
        EXPECT_EQ(to_json(r)["final"]["status"], "exhausted");
    }
}

TEST(Pipeline, ValidationFailureSkipsVerifier) {
    auto corpus = first(1);
    ScriptedBackend gen;
    gen.add_rule({"", {"[The boy falls]", "[The boy rides] -> [A cloud passes by]", serialize_chain(*corpus[0].gold_chain)}});
    ScriptedBackend ver;
    ver.set_responder(accepting_verifier());
    auto recs = construct_chains(corpus, {&gen, &ver, nullptr}, PromptTemplates::defaults(), {}, {});
    const auto& r = recs[0];
    ASSERT_EQ(r.attempts.size(), 3u);
    EXPECT_EQ(r.attempts[0].parse_stage(), StageStatus::Pass);
    EXPECT_EQ(r.attempts[0].validation_stage(), StageStatus::Fail);
    EXPECT_TRUE(r.attempts[0].validation.has(rule::kLengthMin));
    EXPECT_EQ(r.attempts[0].verifier_stage(), StageStatus::Skipped);
    EXPECT_TRUE(r.attempts[1].validation.has(rule::kAnswerDisjoint));
    EXPECT_EQ(ver.calls().size(), 1u);
    EXPECT_FALSE(r.exhausted());
}

TEST(Pipeline, BackendErrorAbortsSample) {
    const auto corpus = first(2);
    ScriptedBackend gen;  // nothing scripted: every call fails
    ScriptedBackend ver;
    ver.set_responder(accepting_verifier());
    auto recs = construct_chains(corpus, {&gen, &ver, nullptr}, PromptTemplates::defaults(), {}, {});
    for (const auto& r : recs) {
        EXPECT_TRUE(r.exhausted());
        EXPECT_TRUE(r.error);
        ASSERT_EQ(r.attempts.size(), 1u);
        EXPECT_TRUE(r.attempts[0].error);
    }
}

TEST(Pipeline, RequiresBackends) {
    EXPECT_THROW(construct_chains(first(1), {}, PromptTemplates::defaults(), {}, {}), std::invalid_argument);
    ScriptedBackend g;
    PipelineConfig q;
    q.human_stage = HumanStageMode::Queue;
    EXPECT_THROW(construct_chains(first(1), {&g, &g, nullptr}, PromptTemplates::defaults(), {}, q),
                 std::invalid_argument);
    PipelineConfig bad;
    bad.max_attempts = 0;
    EXPECT_TRUE(bad.check());
}

TEST(Pipeline, OutputOrderMatchesInputUnderConcurrency) {
    const auto corpus = fx::qa_corpus();
    ScriptedBackend gen, ver;
    gen.set_responder(gold_chain_echo(corpus));
    ver.set_responder(accepting_verifier());
    PipelineConfig cfg;
    cfg.worker_pool_size = 8;
    auto recs = construct_chains(corpus, {&gen, &ver, nullptr}, PromptTemplates::defaults(), {}, cfg);
    ASSERT_EQ(recs.size(), corpus.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_EQ(recs[i].sample_id, corpus[i].id);
        EXPECT_EQ(recs[i].attempts.size(), 1u);
    }
}

TEST(Pipeline, HumanQueueRejectRegeneratesThenApprove) {
    fx::TempDir d;
    auto q = ReviewQueue::open(d / "q.jsonl");
    ASSERT_TRUE(q.ok());
    const auto corpus = first(2);
    ScriptedBackend gen, ver;
    gen.set_responder(gold_chain_echo(corpus));
    ver.set_responder(accepting_verifier());
    PipelineConfig cfg;
    cfg.human_stage = HumanStageMode::Queue;
    cfg.worker_pool_size = 1;
    cfg.item_prefix = "run1:";

    std::vector<ConstructionRecord> recs;
    std::thread runner([&] {
        recs = construct_chains(corpus, {&gen, &ver, q->get()}, PromptTemplates::defaults(), {}, cfg);
    });
    auto wait_for = [&](const std::string& id) {
        for (int i = 0; i < 500; ++i) {
            if (auto it = (*q)->get(id)) return it;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        return std::optional<ReviewItem>{};
    };
    const std::string a1 = "run1:" + corpus[0].id + ":1";
    const std::string b1 = "run1:" + corpus[1].id + ":1";
    ASSERT_TRUE(wait_for(a1));
    ASSERT_TRUE(wait_for(b1));
    ASSERT_TRUE((*q)->decide(a1, {DecisionAction::Reject, std::nullopt, "second event is unsupported", "ann"}).ok());
    auto a2 = wait_for("run1:" + corpus[0].id + ":2");
    ASSERT_TRUE(a2);
    EXPECT_EQ(a2->attempt_no, 2u);
    EXPECT_EQ(a2->prior_rejections, std::vector<std::string>{"second event is unsupported"});
    auto edited = CausalChain::from_texts({"The boy hits a rock", "The boy falls off the bike"});
    ASSERT_TRUE((*q)->decide(a2->item_id, {DecisionAction::Edit, edited, "", "ann"}).ok());
    ASSERT_TRUE((*q)->decide(b1, {DecisionAction::Approve, std::nullopt, "", "bob"}).ok());
    runner.join();

    ASSERT_EQ(recs.size(), 2u);
    ASSERT_EQ(recs[0].attempts.size(), 2u);
    EXPECT_EQ(recs[0].attempts[0].human, HumanStatus::Rejected);
    EXPECT_EQ(recs[0].attempts[0].human_stage(), StageStatus::Fail);
    EXPECT_EQ(recs[0].attempts[1].human, HumanStatus::Edited);
    ASSERT_TRUE(recs[0].final_chain);
    EXPECT_TRUE(chain_equal(*recs[0].final_chain, *edited));
    EXPECT_EQ(recs[1].attempts[0].human, HumanStatus::Approved);
    EXPECT_EQ(recs[1].attempts[0].reviewer, std::optional<std::string>("bob"));
    EXPECT_EQ(to_json(recs[0].attempts[1])["human"]["status"], "edited");
}

TEST(Pipeline, AutoApproveIsRecordedAsPolicySkip) {
    const auto corpus = first(1);
    ScriptedBackend gen, ver;
    gen.set_responder(gold_chain_echo(corpus));
    ver.set_responder(accepting_verifier());
    PipelineConfig cfg;
    cfg.human_stage = HumanStageMode::AutoApprove;
    auto recs = construct_chains(corpus, {&gen, &ver, nullptr}, PromptTemplates::defaults(), {}, cfg);
    EXPECT_EQ(recs[0].attempts[0].human, HumanStatus::PolicySkipped);
    EXPECT_EQ(to_json(recs[0].attempts[0])["human"]["status"], "skipped_policy");
}
