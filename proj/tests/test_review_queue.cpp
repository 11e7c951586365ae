#include <gtest/gtest.h>

#include <map>

#include "chainforge/review_queue.hpp"
#include "fixtures.hpp"
#include "generators.hpp"

using namespace chainforge;

namespace {

ReviewItem item(const std::string& id, const std::string& sample = "s") {
    ReviewItem it(*CausalChain::from_texts({"Rain starts falling", "The road gets wet"}));
    it.item_id = id;
    it.sample_id = sample;
    it.question = "Why is the road wet?";
    it.gold_answer = "rain";
    it.video_uri = "videos/" + sample + ".mp4";
    return it;
}

Decision approve(const std::string& who = "ann") { return {DecisionAction::Approve, std::nullopt, "", who}; }

Decision reject(const std::string& why) { return {DecisionAction::Reject, std::nullopt, why, "bob"}; }

}  // namespace

TEST(ReviewQueue, ApproveFlowAndCounts) {
    fx::TempDir d;
    auto q = ReviewQueue::open(d / "q.jsonl");
    ASSERT_TRUE(q.ok()) << q.error();
    ASSERT_TRUE((*q)->enqueue(item("a")).ok());
    ASSERT_TRUE((*q)->enqueue(item("b")).ok());
    EXPECT_FALSE((*q)->enqueue(item("a")).ok());
    auto next = (*q)->lease_next("ann");
    ASSERT_TRUE(next);
    EXPECT_EQ(next->item_id, "a");
    auto r = (*q)->decide("a", approve());
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r->state, ReviewState::Approved);
    EXPECT_EQ((*q)->counts(), (QueueCounts{1, 1, 0, 0}));

    auto again = (*q)->decide("a", approve());
    ASSERT_FALSE(again.ok());
    EXPECT_EQ(again.error().kind, DecideError::Kind::Conflict);
    EXPECT_EQ((*q)->decide("zzz", approve()).error().kind, DecideError::Kind::NotFound);
    EXPECT_EQ((*q)->decide("b", reject("  ")).error().kind, DecideError::Kind::Invalid);
}

TEST(ReviewQueue, EditValidatesChain) {
    fx::TempDir d;
    auto q = ReviewQueue::open(d / "q.jsonl");
    ASSERT_TRUE((*q)->enqueue(item("a")).ok());
    std::vector<std::string> eleven;
    for (int i = 0; i < 11; ++i) eleven.push_back("event number " + std::to_string(i));
    Decision e{DecisionAction::Edit, CausalChain::from_texts(eleven), "", "ann"};
    auto r = (*q)->decide("a", e);
    ASSERT_FALSE(r.ok());
    EXPECT_EQ(r.error().kind, DecideError::Kind::Invalid);
    ASSERT_TRUE(r.error().report);
    EXPECT_TRUE(r.error().report->has(rule::kLengthMax));
    e.chain = CausalChain::from_texts({"Clouds gather overhead", "Rain soaks the road"});
    r = (*q)->decide("a", e);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r->state, ReviewState::Edited);
    ASSERT_TRUE(r->edited_chain);
    EXPECT_EQ(r->edited_chain->size(), 2u);
}

TEST(ReviewQueue, LeasesKeepReviewersApart) {
    fx::TempDir d;
    auto q = ReviewQueue::open(d / "q.jsonl");
    ASSERT_TRUE((*q)->enqueue(item("a")).ok());
    ASSERT_TRUE((*q)->enqueue(item("b")).ok());
    const auto t0 = ReviewQueue::Clock::now();
    EXPECT_EQ((*q)->lease_next("ann", t0)->item_id, "a");
    EXPECT_EQ((*q)->lease_next("bob", t0)->item_id, "b");
    EXPECT_FALSE((*q)->lease_next("cy", t0));
    EXPECT_EQ((*q)->lease_next("ann", t0)->item_id, "a");
    EXPECT_EQ((*q)->lease_next("cy", t0 + std::chrono::minutes(11))->item_id, "a");
}

TEST(ReviewQueue, SingleWriterLock) {
    fx::TempDir d;
    auto a = ReviewQueue::open(d / "q.jsonl");
    ASSERT_TRUE(a.ok());
    auto b = ReviewQueue::open(d / "q.jsonl");
    EXPECT_FALSE(b.ok());
}

TEST(ReviewQueue, ReopenReplaysLog) {
    fx::TempDir d;
    {
        auto q = ReviewQueue::open(d / "q.jsonl");
        ASSERT_TRUE((*q)->enqueue(item("a")).ok());
        ASSERT_TRUE((*q)->enqueue(item("b", "t")).ok());
        ASSERT_TRUE((*q)->decide("a", reject("events out of order")).ok());
    }
    auto q = ReviewQueue::open(d / "q.jsonl");
    ASSERT_TRUE(q.ok());
    EXPECT_EQ((*q)->replayed_events(), 3u);
    EXPECT_EQ((*q)->get("a")->state, ReviewState::Rejected);
    EXPECT_EQ((*q)->get("a")->reason, "events out of order");
    EXPECT_EQ((*q)->latest_for_sample("t")->item_id, "b");
}

TEST(ReviewQueue, ReplayStopsAtTruncatedLine) {
    fx::TempDir d;
    {
        auto q = ReviewQueue::open(d / "q.jsonl");
        ASSERT_TRUE((*q)->enqueue(item("a")).ok());
        ASSERT_TRUE((*q)->enqueue(item("b")).ok());
    }
    {
        std::ofstream out(d / "q.jsonl", std::ios::app);
        out << R"({"ts":"x","kind":"deci)";
    }
    auto r = queue_replay(d / "q.jsonl");
    EXPECT_EQ(r.events_applied, 2u);
    ASSERT_TRUE(r.truncated_at);
    EXPECT_EQ(*r.truncated_at, 3u);
    EXPECT_EQ(queue_replay(d / "absent.jsonl").events_applied, 0u);
}

TEST(ReviewQueue, ItemJsonRoundTrip) {
    auto it = item("a");
    it.video_surrogate = "a wet road";
    it.prior_rejections = {"too vague"};
    auto back = review_item_from_json(nlohmann::json::parse(to_json(it).dump()));
    ASSERT_TRUE(back);
    EXPECT_EQ(*back, it);
}

TEST(ReviewQueue, ReplayEqualsShadowState) {
    fx::TempDir d;
    SeededRng rng(1234);
    for (int seq = 0; seq < 1000; ++seq) {
        const auto log = d / ("q" + std::to_string(seq) + ".jsonl");
        std::map<std::string, ReviewState> shadow;
        std::vector<std::string> order;
        {
            auto q = ReviewQueue::open(log);
            ASSERT_TRUE(q.ok());
            const auto steps = 1 + rng.below(25);
            for (std::size_t s = 0; s < steps; ++s) {
                const auto op = rng.below(4);
                if (op == 0 || order.empty()) {
                    const auto id = "i" + std::to_string(rng.below(12));
                    const bool fresh = !shadow.count(id);
                    EXPECT_EQ((*q)->enqueue(item(id)).ok(), fresh);
                    if (fresh) {
                        shadow[id] = ReviewState::Pending;
                        order.push_back(id);
                    }
                    continue;
                }
                const auto id = rng.below(8) == 0 ? std::string("ghost") : order[rng.below(order.size())];
                Decision dec;
                ReviewState target = ReviewState::Approved;
                if (op == 1) {
                    dec = approve();
                } else if (op == 2) {
                    dec = reject("reason " + std::to_string(s));
                    target = ReviewState::Rejected;
                } else {
                    dec = {DecisionAction::Edit, CausalChain::from_texts({"New first event", "New second event"}), "",
                           "cy"};
                    target = ReviewState::Edited;
                }
                const bool allowed = shadow.count(id) && shadow[id] == ReviewState::Pending;
                EXPECT_EQ((*q)->decide(id, dec).ok(), allowed);
                if (allowed) shadow[id] = target;
            }
        }
        auto r = queue_replay(log);
        EXPECT_FALSE(r.truncated_at);
        EXPECT_TRUE(r.state.anomalies().empty());
        ASSERT_EQ(r.state.items().size(), order.size());
        QueueCounts expect;
        for (std::size_t i = 0; i < order.size(); ++i) {
            EXPECT_EQ(r.state.items()[i].item_id, order[i]);
            const auto st = shadow[order[i]];
            EXPECT_EQ(r.state.items()[i].state, st);
            switch (st) {
                case ReviewState::Pending: ++expect.pending; break;
                case ReviewState::Approved: ++expect.approved; break;
                case ReviewState::Edited: ++expect.edited; break;
                case ReviewState::Rejected: ++expect.rejected; break;
            }
        }
        EXPECT_EQ(r.state.counts(), expect);
        std::filesystem::remove(log);
    }
}

TEST(QueueState, AnomaliesAreRecordedNotApplied) {
    QueueState st;
    QueueEvent enq{QueueEvent::Kind::Enqueued, "t", item("a"), {}, {}};
    EXPECT_FALSE(st.apply(enq));
    EXPECT_TRUE(st.apply(enq));
    QueueEvent dec{QueueEvent::Kind::Decided, "t", std::nullopt, "nope", approve()};
    EXPECT_TRUE(st.apply(dec));
    EXPECT_EQ(st.anomalies().size(), 2u);
    EXPECT_EQ(st.counts().pending, 1u);
}
