#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include <httplib.h>

#include "chainforge/oracle.hpp"
#include "chainforge/pipeline.hpp"
#include "chainforge/review_service.hpp"
#include "fixtures.hpp"

using namespace chainforge;

namespace {

class ServiceTest : public ::testing::Test {
  protected:
    void SetUp() override {
        auto q = ReviewQueue::open(dir_ / "queue.jsonl");
        ASSERT_TRUE(q.ok()) << q.error();
        queue_ = std::move(q).value();
        service_ = std::make_unique<ReviewService>(*queue_);
        port_ = service_->bind_any("127.0.0.1");
        ASSERT_GT(port_, 0);
        thread_ = std::thread([this] { service_->listen_after_bind(); });
        service_->wait_until_ready();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    }

    void TearDown() override {
        service_->stop();
        if (thread_.joinable()) thread_.join();
    }

    ReviewItem enqueue(const std::string& id, const std::string& sample, const std::string& uri = "videos/x.mp4") {
        ReviewItem it(*CausalChain::from_texts({"Rain starts falling", "The road gets wet"}));
        it.item_id = id;
        it.sample_id = sample;
        it.question = "Why is the road wet?";
        it.gold_answer = "rain fell";
        it.video_uri = uri;
        it.video_surrogate = "a street in the rain";
        return queue_->enqueue(it).value();
    }

    httplib::Result post(const std::string& id, const nlohmann::json& body) {
        return client_->Post("/api/items/" + id + "/decision", body.dump(), "application/json");
    }

    nlohmann::json stats() { return nlohmann::json::parse(client_->Get("/api/stats")->body); }

    fx::TempDir dir_;
    std::unique_ptr<ReviewQueue> queue_;
    std::unique_ptr<ReviewService> service_;
    std::thread thread_;
    std::unique_ptr<httplib::Client> client_;
    int port_ = -1;
};

}  // namespace

TEST_F(ServiceTest, Healthz) {
    auto r = client_->Get("/healthz");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
}

TEST_F(ServiceTest, ApproveFlow) {
    enqueue("i1", "s1");
    auto next = client_->Get("/api/queue/next?reviewer=ann");
    ASSERT_TRUE(next);
    ASSERT_EQ(next->status, 200);
    auto item = nlohmann::json::parse(next->body);
    EXPECT_EQ(item["item_id"], "i1");
    EXPECT_EQ(item["question"], "Why is the road wet?");
    EXPECT_EQ(item["gold_answer"], "rain fell");
    EXPECT_EQ(item["video_uri"], "videos/x.mp4");
    auto r = post("i1", {{"action", "approve"}, {"reviewer", "ann"}});
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    auto s = stats();
    EXPECT_EQ(s["approved"], 1);
    EXPECT_EQ(s["pending"], 0);
    EXPECT_EQ(client_->Get("/api/queue/next?reviewer=ann")->status, 204);
}

TEST_F(ServiceTest, RepeatedDecisionIsConflictAndChangesNothing) {
    enqueue("i1", "s1");
    ASSERT_EQ(post("i1", {{"action", "approve"}, {"reviewer", "ann"}})->status, 200);
    const auto log_before = fx::read_text(dir_ / "queue.jsonl");
    EXPECT_EQ(post("i1", {{"action", "approve"}, {"reviewer", "ann"}})->status, 409);
    EXPECT_EQ(post("i1", {{"action", "reject"}, {"reason", "x"}, {"reviewer", "ann"}})->status, 409);
    EXPECT_EQ(post("i1", {{"action", "edit"}, {"chain", "[A b] -> [C d]"}, {"reviewer", "ann"}})->status, 409);
    EXPECT_EQ(fx::read_text(dir_ / "queue.jsonl"), log_before);
    EXPECT_EQ(stats()["approved"], 1);
}

TEST_F(ServiceTest, ElevenEventEditIsRejectedWithReport) {
    enqueue("i1", "s1");
    nlohmann::json events = nlohmann::json::array();
    for (int i = 0; i < 11; ++i) events.push_back("event number " + std::to_string(i));
    auto r = post("i1", {{"action", "edit"}, {"chain", events}, {"reviewer", "ann"}});
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 400);
    auto body = nlohmann::json::parse(r->body);
    bool found = false;
    for (const auto& v : body["validation"]["violations"]) found |= v["rule_id"] == "length.max";
    EXPECT_TRUE(found) << r->body;
    EXPECT_EQ(stats()["pending"], 1);

    r = post("i1", {{"action", "edit"}, {"chain", "[Clouds gather] -> [Rain soaks the road]"}, {"reviewer", "ann"}});
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(stats()["edited"], 1);
}

TEST_F(ServiceTest, BadRequests) {
    enqueue("i1", "s1");
    EXPECT_EQ(client_->Get("/api/queue/next")->status, 400);
    EXPECT_EQ(post("nope", {{"action", "approve"}, {"reviewer", "ann"}})->status, 404);
    EXPECT_EQ(client_->Get("/api/items/nope")->status, 404);
    EXPECT_EQ(post("i1", {{"action", "maybe"}, {"reviewer", "ann"}})->status, 400);
    EXPECT_EQ(post("i1", {{"action", "approve"}})->status, 400);
    EXPECT_EQ(post("i1", {{"action", "reject"}, {"reviewer", "ann"}})->status, 400);
    EXPECT_EQ(post("i1", {{"action", "edit"}, {"chain", 5}, {"reviewer", "ann"}})->status, 400);
    EXPECT_EQ(client_->Post("/api/items/i1/decision", "{oops", "application/json")->status, 400);
    EXPECT_EQ(client_->Get("/api/items/i1")->status, 200);
}

TEST_F(ServiceTest, VideoEndpoint) {
    std::ofstream(dir_ / "clip.mp4") << "0123456789";
    enqueue("i1", "local", (dir_ / "clip.mp4").string());
    enqueue("i2", "remote", "https://videos.example/clip.mp4");
    enqueue("i3", "gone", "videos/absent.mp4");
    auto r = client_->Get("/api/video/local");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(r->body, "0123456789");
    EXPECT_EQ(r->get_header_value("Content-Type"), "video/mp4");
    r = client_->Get("/api/video/remote");
    EXPECT_EQ(r->status, 302);
    EXPECT_EQ(r->get_header_value("Location"), "https://videos.example/clip.mp4");
    r = client_->Get("/api/video/gone");
    EXPECT_EQ(r->status, 404);
    EXPECT_EQ(nlohmann::json::parse(r->body)["video_surrogate"], "a street in the rain");
    EXPECT_EQ(client_->Get("/api/video/unknown")->status, 404);
}

TEST_F(ServiceTest, RejectOverHttpRegeneratesWithNextAttempt) {
    auto corpus = fx::qa_corpus();
    corpus.resize(1);
    ScriptedBackend gen, ver;
    gen.set_responder(gold_chain_echo(corpus));
    ver.set_responder(accepting_verifier());
    PipelineConfig cfg;
    cfg.human_stage = HumanStageMode::Queue;
    std::vector<ConstructionRecord> recs;
    std::thread runner([&] {
        recs = construct_chains(corpus, {&gen, &ver, queue_.get()}, PromptTemplates::defaults(), {}, cfg);
    });
    auto next_item = [&]() -> nlohmann::json {
        for (int i = 0; i < 500; ++i) {
            auto r = client_->Get("/api/queue/next?reviewer=ann");
            if (r && r->status == 200) return nlohmann::json::parse(r->body);
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        return nullptr;
    };
    auto first = next_item();
    ASSERT_FALSE(first.is_null());
    EXPECT_EQ(first["attempt_no"], 1);
    ASSERT_EQ(post(first["item_id"], {{"action", "reject"}, {"reason", "too vague"}, {"reviewer", "ann"}})->status,
              200);
    auto second = next_item();
    ASSERT_FALSE(second.is_null());
    EXPECT_EQ(second["sample_id"], corpus[0].id);
    EXPECT_EQ(second["attempt_no"], 2);
    ASSERT_EQ(post(second["item_id"], {{"action", "approve"}, {"reviewer", "ann"}})->status, 200);
    runner.join();
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].attempts.size(), 2u);
    EXPECT_FALSE(recs[0].exhausted());
}
