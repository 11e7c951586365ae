#include <gtest/gtest.h>

#include <fstream>

#include <sys/wait.h>
#include <unistd.h>

#include "chainforge/datastore.hpp"
#include "fixtures.hpp"
#include "generators.hpp"

using namespace chainforge;

namespace {

std::vector<Sample> synthetic(std::size_t n, std::uint64_t seed) {
    SeededRng rng(seed);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto s = gen::sample(rng, i);
        if (!s.gold_chain) s.gold_chain = gen::chain(rng, 2, 10);
        out.push_back(std::move(s));
    }
    return out;
}

nlohmann::json good_record() {
    return nlohmann::json::parse(R"({"id":"s1","dataset":"nextqa","split":"val","video":"v.mp4",
        "question":"Why?","answer":"rain fell","options":["rain fell","sun shone"],"gold_index":0,
        "gold_chain":"[Clouds gather] -> [Rain fell]"})");
}

std::string violation_reason(nlohmann::json j) {
    auto r = sample_from_json(j, 3);
    if (r.ok()) return "ok";
    EXPECT_EQ(r.error().line, 3u);
    return r.error().reason;
}

}  // namespace

TEST(Datastore, FixtureCorpusLoads) {
    auto r = load_samples(fx::path("qa_corpus.jsonl"));
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r->samples.size(), 20u);
    EXPECT_TRUE(r->errors.empty());
    EXPECT_EQ(r->lines_read, 20u);
    EXPECT_EQ(r->samples[0].split, Split::Train);
}

TEST(Datastore, SchemaViolations) {
    auto j = good_record();
    EXPECT_EQ(violation_reason(j), "ok");
    j.erase("id");
    EXPECT_EQ(violation_reason(j), "id.missing");
    j = good_record();
    j["split"] = "dev";
    EXPECT_EQ(violation_reason(j), "split.unknown");
    j = good_record();
    j["gold_index"] = 2;
    EXPECT_EQ(violation_reason(j), "gold_index.out_of_range");
    j = good_record();
    j["options"] = {"rain fell"};
    EXPECT_EQ(violation_reason(j), "options.count");
    j = good_record();
    j["options"] = {"rain fell", "rain fell"};
    EXPECT_EQ(violation_reason(j), "options.duplicate");
    j = good_record();
    j["gold_index"] = 1;
    EXPECT_EQ(violation_reason(j), "gold_index.answer_mismatch");
    j = good_record();
    j["gold_chain"] = "[a] [b]";
    EXPECT_EQ(violation_reason(j), "gold_chain.MissingDelimiter");
    j = good_record();
    j["video"] = {{"uri", "v.mp4"}, {"duration_s", -1}};
    EXPECT_EQ(violation_reason(j), "video.duration_invalid");
    EXPECT_EQ(violation_reason(nlohmann::json::array()), "record.not_object");
}

TEST(Datastore, LoaderCollectsBadLinesAndDuplicates) {
    fx::TempDir d;
    {
        std::ofstream out(d / "c.jsonl");
        out << good_record().dump() << "\n\n{not json\n";
        auto other = good_record();
        other["dataset"] = "causalchaos";
        other["id"] = "s2";
        out << other.dump() << "\n" << good_record().dump() << "\n";
    }
    auto r = load_samples(d / "c.jsonl", "nextqa");
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r->samples.size(), 1u);
    ASSERT_EQ(r->errors.size(), 3u);
    EXPECT_EQ(r->errors[0].line, 3u);
    EXPECT_EQ(r->errors[1].line, 4u);
    EXPECT_EQ(r->errors[2].line, 5u);
    EXPECT_EQ(r->lines_read, 4u);
    EXPECT_FALSE(load_samples(d / "missing.jsonl").ok());
}

TEST(Datastore, RoundTripFiveHundredRecords) {
    fx::TempDir d;
    const auto corpus = synthetic(500, 31);
    auto w = write_augmented(d / "out.jsonl", corpus);
    ASSERT_TRUE(w.ok()) << w.error().message;
    EXPECT_EQ(w->records, 500u);
    EXPECT_EQ(w->bytes, std::filesystem::file_size(d / "out.jsonl"));
    auto back = load_samples(d / "out.jsonl");
    ASSERT_TRUE(back.ok());
    EXPECT_TRUE(back->errors.empty());
    ASSERT_EQ(back->samples.size(), corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) EXPECT_EQ(back->samples[i], corpus[i]) << corpus[i].id;

    ASSERT_TRUE(write_augmented(d / "again.jsonl", back->samples).ok());
    EXPECT_EQ(fx::read_text(d / "out.jsonl"), fx::read_text(d / "again.jsonl"));
}

TEST(Datastore, WriteRefusesInvalidOrMissingChains) {
    fx::TempDir d;
    auto corpus = synthetic(3, 4);
    corpus[1].gold_chain = CausalChain::from_texts({"only one"});
    auto r = write_augmented(d / "x.jsonl", corpus);
    ASSERT_FALSE(r.ok());
    EXPECT_EQ(r.error().kind, WriteError::Kind::InvalidChain);
    EXPECT_EQ(r.error().record_id, corpus[1].id);
    ASSERT_TRUE(r.error().report);
    EXPECT_TRUE(r.error().report->has(rule::kLengthMin));
    EXPECT_FALSE(std::filesystem::exists(d / "x.jsonl"));

    corpus[1].gold_chain.reset();
    r = write_augmented(d / "x.jsonl", corpus);
    ASSERT_FALSE(r.ok());
    EXPECT_EQ(r.error().kind, WriteError::Kind::MissingChain);
}

TEST(Datastore, CrashMidWriteLeavesNoPartialTarget) {
    fx::TempDir d;
    const auto corpus = synthetic(50, 8);
    const auto fresh = d / "fresh.jsonl";
    const auto existing = d / "existing.jsonl";
    ASSERT_TRUE(write_augmented(existing, synthetic(5, 9)).ok());
    const auto before = fx::read_text(existing);

    for (const auto& target : {fresh, existing}) {
        const pid_t pid = ::fork();
        ASSERT_GE(pid, 0);
        if (pid == 0) {
            write_augmented(target, corpus, {}, [](std::size_t n) {
                if (n == 20) ::_exit(17);
            });
            ::_exit(0);
        }
        int status = 0;
        ASSERT_EQ(::waitpid(pid, &status, 0), pid);
        ASSERT_TRUE(WIFEXITED(status));
        ASSERT_EQ(WEXITSTATUS(status), 17);
    }
    EXPECT_FALSE(std::filesystem::exists(fresh));
    EXPECT_EQ(fx::read_text(existing), before);
}

TEST(Datastore, StatsAndAudit) {
    const auto corpus = fx::qa_corpus();
    auto st = corpus_stats(corpus);
    EXPECT_EQ(st.samples, 20u);
    EXPECT_EQ(st.with_chain, 20u);
    EXPECT_EQ(st.per_dataset.at("nextqa"), 7u);
    EXPECT_EQ(st.per_dataset.at("causalchaos"), 6u);
    std::size_t total = 0;
    for (const auto& [len, n] : st.length_histogram) total += n;
    EXPECT_EQ(total, 20u);
    EXPECT_GE(st.mean_events, 4.0);
    EXPECT_LE(st.mean_events, 5.0);

    auto a = sample_audit(corpus, 5, 99);
    auto b = sample_audit(corpus, 5, 99);
    ASSERT_EQ(a.size(), 5u);
    EXPECT_EQ(a, b);
    for (std::size_t i = 1; i < a.size(); ++i) {
        auto pos = [&](const Sample& s) {
            return std::find_if(corpus.begin(), corpus.end(), [&](const Sample& c) { return c.id == s.id; });
        };
        EXPECT_LT(pos(a[i - 1]), pos(a[i]));
    }
    EXPECT_EQ(sample_audit(corpus, 100, 1).size(), 20u);
}

TEST(Datastore, LongChainsLandInOverflowBucket) {
    SeededRng rng(1);
    std::vector<Sample> v(1, gen::sample(rng, 0));
    std::vector<std::string> texts(12, "x y");
    for (std::size_t i = 0; i < texts.size(); ++i) texts[i] += std::to_string(i);
    v[0].gold_chain = CausalChain::from_texts(texts);
    EXPECT_EQ(corpus_stats(v).length_histogram.at(11), 1u);
}
