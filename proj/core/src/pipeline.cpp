#include "chainforge/pipeline.hpp"

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "chainforge/clock.hpp"

namespace chainforge {

const char* to_string(StageStatus s) {
    switch (s) {
        case StageStatus::Pass: return "pass";
        case StageStatus::Fail: return "fail";
        case StageStatus::Skipped: return "skipped";
        case StageStatus::Pending: return "pending";
    }
    return "?";
}

const char* to_string(VerifierStatus s) {
    switch (s) {
        case VerifierStatus::Accept: return "accept";
        case VerifierStatus::Reject: return "reject";
        case VerifierStatus::Skipped: return "skipped";
    }
    return "?";
}

const char* to_string(HumanStatus s) {
    switch (s) {
        case HumanStatus::Pending: return "pending";
        case HumanStatus::Approved: return "approved";
        case HumanStatus::Edited: return "edited";
        case HumanStatus::Rejected: return "rejected";
        case HumanStatus::Skipped: return "skipped";
        case HumanStatus::PolicySkipped: return "skipped_policy";
    }
    return "?";
}

StageStatus ConstructionAttempt::parse_stage() const {
    if (raw_output.empty() && error) return StageStatus::Skipped;
    return parse_ok ? StageStatus::Pass : StageStatus::Fail;
}

StageStatus ConstructionAttempt::validation_stage() const {
    if (!parse_ok) return StageStatus::Skipped;
    return validation.passed() ? StageStatus::Pass : StageStatus::Fail;
}

StageStatus ConstructionAttempt::verifier_stage() const {
    switch (verifier) {
        case VerifierStatus::Accept: return StageStatus::Pass;
        case VerifierStatus::Reject: return StageStatus::Fail;
        case VerifierStatus::Skipped: return StageStatus::Skipped;
    }
    return StageStatus::Skipped;
}

StageStatus ConstructionAttempt::human_stage() const {
    switch (human) {
        case HumanStatus::Pending: return StageStatus::Pending;
        case HumanStatus::Approved:
        case HumanStatus::Edited: return StageStatus::Pass;
        case HumanStatus::Rejected: return StageStatus::Fail;
        case HumanStatus::Skipped:
        case HumanStatus::PolicySkipped: return StageStatus::Skipped;
    }
    return StageStatus::Skipped;
}

bool ConstructionAttempt::passed() const {
    return parse_ok && validation.passed() && verifier == VerifierStatus::Accept &&
           (human == HumanStatus::Approved || human == HumanStatus::Edited || human == HumanStatus::PolicySkipped);
}

nlohmann::ordered_json to_json(const ConstructionAttempt& a) {
    nlohmann::ordered_json j;
    j["attempt_no"] = a.attempt_no;
    j["raw_output"] = a.raw_output;
    j["parse_ok"] = a.parse_ok;
    nlohmann::ordered_json v;
    v["verdict"] = a.validation.passed() ? "pass" : "fail";
    v["violations"] = nlohmann::ordered_json::array();
    for (const auto& x : a.validation.violations) v["violations"].push_back({{"rule_id", x.rule_id}, {"detail", x.detail}});
    j["validation"] = std::move(v);
    j["verifier"] = {{"status", to_string(a.verifier)}};
    if (a.verifier == VerifierStatus::Reject) j["verifier"]["reason"] = a.verifier_reason;
    nlohmann::ordered_json h;
    h["status"] = to_string(a.human);
    if (a.edited_chain) h["chain"] = serialize_chain(*a.edited_chain);
    if (a.human == HumanStatus::Rejected) h["reason"] = a.human_reason;
    if (a.reviewer) h["reviewer"] = *a.reviewer;
    j["human"] = std::move(h);
    j["stages"] = {{"parse", to_string(a.parse_stage())},
                   {"validation", to_string(a.validation_stage())},
                   {"verifier", to_string(a.verifier_stage())},
                   {"human", to_string(a.human_stage())}};
    j["started_at"] = a.started_at;
    j["finished_at"] = a.finished_at;
    if (a.error) j["error"] = *a.error;
    return j;
}

nlohmann::ordered_json to_json(const ConstructionRecord& r) {
    nlohmann::ordered_json j;
    j["sample_id"] = r.sample_id;
    j["max_attempts"] = r.max_attempts;
    j["attempts"] = nlohmann::ordered_json::array();
    for (const auto& a : r.attempts) j["attempts"].push_back(to_json(a));
    if (r.final_chain) {
        j["final"] = {{"status", "chain"}, {"chain", serialize_chain(*r.final_chain)}};
    } else {
        j["final"] = {{"status", "exhausted"}};
    }
    if (r.error) j["error"] = *r.error;
    return j;
}

std::optional<std::string> PipelineConfig::check() const {
    if (max_attempts == 0) return "max_attempts must be positive";
    if (worker_pool_size == 0) return "worker_pool_size must be positive";
    return std::nullopt;
}

namespace {

struct SampleJob {
    const Sample* sample = nullptr;
    ConstructionRecord record;
    std::vector<std::string> feedback;
    bool done = false;
};

// Shared with the queue listener, which may outlive a run by a few
// instructions; hence the shared_ptr.
struct Shared {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::size_t> ready;
    std::map<std::string, std::size_t> parked;  // item_id -> job
    std::map<std::size_t, ReviewItem> decisions;
    std::size_t remaining = 0;
};

class Driver {
  public:
    Driver(const ConstructionBackends& b, const PromptTemplates& t, const ValidationConfig& v, const PipelineConfig& c)
        : b_(b), t_(t), v_(v), c_(c), shared_(std::make_shared<Shared>()) {}

    std::vector<ConstructionRecord> run(const std::vector<Sample>& samples,
                                        const std::function<void(const ConstructionRecord&)>& on_record) {
        jobs_.resize(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            jobs_[i].sample = &samples[i];
            jobs_[i].record.sample_id = samples[i].id;
            jobs_[i].record.max_attempts = c_.max_attempts;
            shared_->ready.push_back(i);
        }
        shared_->remaining = samples.size();
        on_record_ = on_record;

        if (c_.human_stage == HumanStageMode::Queue) {
            std::weak_ptr<Shared> weak = shared_;
            b_.queue->set_listener([weak](const ReviewItem& item) {
                auto s = weak.lock();
                if (!s) return;
                std::lock_guard lock(s->mu);
                auto it = s->parked.find(item.item_id);
                if (it == s->parked.end()) return;
                s->decisions.insert_or_assign(it->second, item);
                s->ready.push_back(it->second);
                s->parked.erase(it);
                s->cv.notify_all();
            });
        }

        {
            std::vector<std::jthread> pool;
            const auto n = std::min(c_.worker_pool_size, std::max<std::size_t>(samples.size(), 1));
            for (std::size_t i = 0; i < n; ++i) pool.emplace_back([this] { work(); });
        }

        if (c_.human_stage == HumanStageMode::Queue) b_.queue->set_listener({});
        std::vector<ConstructionRecord> out;
        out.reserve(jobs_.size());
        for (auto& j : jobs_) out.push_back(std::move(j.record));
        return out;
    }

  private:
    void work() {
        for (;;) {
            std::size_t idx;
            std::optional<ReviewItem> decision;
            {
                std::unique_lock lock(shared_->mu);
                shared_->cv.wait(lock, [&] { return !shared_->ready.empty() || shared_->remaining == 0; });
                if (shared_->ready.empty()) return;
                idx = shared_->ready.front();
                shared_->ready.pop_front();
                if (auto it = shared_->decisions.find(idx); it != shared_->decisions.end()) {
                    decision = std::move(it->second);
                    shared_->decisions.erase(it);
                }
            }
            auto& job = jobs_[idx];
            if (decision) apply_decision(job, *decision);
            // advance() returns false once the job is parked; another worker
            // may own it from then on.
            if (job.done || advance(job, idx)) finish(job);
        }
    }

    void finish(SampleJob& job) {
        {
            std::lock_guard out(record_mu_);
            if (on_record_) on_record_(job.record);
        }
        std::lock_guard lock(shared_->mu);
        if (--shared_->remaining == 0) shared_->cv.notify_all();
    }

    void apply_decision(SampleJob& job, const ReviewItem& item) {
        auto& a = job.record.attempts.back();
        a.reviewer = item.decided_by;
        a.finished_at = item.decided_at.value_or(utc_timestamp());
        switch (item.state) {
            case ReviewState::Approved:
                a.human = HumanStatus::Approved;
                job.record.final_chain = item.chain;
                job.done = true;
                break;
            case ReviewState::Edited:
                a.human = HumanStatus::Edited;
                a.edited_chain = item.edited_chain;
                job.record.final_chain = item.edited_chain;
                job.done = true;
                break;
            case ReviewState::Rejected:
                a.human = HumanStatus::Rejected;
                a.human_reason = item.reason;
                job.feedback.push_back(item.reason);
                if (job.record.attempts.size() >= c_.max_attempts) job.done = true;
                break;
            case ReviewState::Pending:
                break;
        }
    }

    // Runs attempts until the sample finishes (true) or parks in the review
    // queue (false).
    bool advance(SampleJob& job, std::size_t idx) {
        const Sample& s = *job.sample;
        while (job.record.attempts.size() < c_.max_attempts) {
            ConstructionAttempt a;
            a.attempt_no = job.record.attempts.size() + 1;
            a.started_at = utc_timestamp();

            auto gen = b_.generator->invoke(generator_request(t_, s.question, s.gold_answer, job.feedback));
            if (!gen) {
                abort(job, std::move(a), "generator: " + gen.error().message);
                return true;
            }
            a.raw_output = gen->text;
            auto parsed = parse_chain(trim(a.raw_output));
            a.parse_ok = parsed.ok();
            a.validation = validate_chain(trim(a.raw_output), v_);
            if (parsed) {
                a.validation.merge(validate_against_qa(*parsed, s.question, s.gold_answer, v_));
            }
            if (!parsed || !a.validation.passed()) {
                for (const auto& v : a.validation.violations) job.feedback.push_back(v.rule_id + ": " + v.detail);
                a.finished_at = utc_timestamp();
                job.record.attempts.push_back(std::move(a));
                continue;
            }

            auto ver = verify_chain(*b_.verifier, t_, s.question, s.gold_answer, *parsed);
            if (!ver && ver.error().kind == VerifierError::Kind::Backend) {
                abort(job, std::move(a), "verifier: " + ver.error().message);
                return true;
            }
            if (!ver || !ver->accept) {
                a.verifier = VerifierStatus::Reject;
                a.verifier_reason = ver ? ver->reason : "unparseable verifier reply";
                job.feedback.push_back(a.verifier_reason);
                a.finished_at = utc_timestamp();
                job.record.attempts.push_back(std::move(a));
                continue;
            }
            a.verifier = VerifierStatus::Accept;

            if (c_.human_stage != HumanStageMode::Queue) {
                a.human = HumanStatus::PolicySkipped;
                a.finished_at = utc_timestamp();
                job.record.attempts.push_back(std::move(a));
                job.record.final_chain = *parsed;
                job.done = true;
                return true;
            }

            ReviewItem item(*parsed);
            item.item_id = c_.item_prefix + s.id + ":" + std::to_string(a.attempt_no);
            item.sample_id = s.id;
            item.attempt_no = a.attempt_no;
            item.question = s.question;
            item.gold_answer = s.gold_answer;
            item.video_uri = s.video.uri;
            item.video_surrogate = s.video_surrogate;
            item.prior_rejections = job.feedback;
            a.human = HumanStatus::Pending;
            job.record.attempts.push_back(std::move(a));
            {
                std::lock_guard lock(shared_->mu);
                shared_->parked[item.item_id] = idx;
            }
            const auto id = item.item_id;
            if (auto r = b_.queue->enqueue(std::move(item)); !r) {
                {
                    std::lock_guard lock(shared_->mu);
                    shared_->parked.erase(id);
                }
                auto& last = job.record.attempts.back();
                last.human = HumanStatus::Skipped;
                last.error = "review queue: " + r.error();
                last.finished_at = utc_timestamp();
                job.record.error = last.error;
                job.done = true;
                return true;
            }
            return false;
        }
        job.done = true;
        return true;
    }

    void abort(SampleJob& job, ConstructionAttempt a, std::string message) {
        a.error = message;
        a.finished_at = utc_timestamp();
        job.record.attempts.push_back(std::move(a));
        job.record.error = std::move(message);
        job.done = true;
    }

    ConstructionBackends b_;
    const PromptTemplates& t_;
    const ValidationConfig& v_;
    const PipelineConfig& c_;
    std::shared_ptr<Shared> shared_;
    std::vector<SampleJob> jobs_;
    std::mutex record_mu_;
    std::function<void(const ConstructionRecord&)> on_record_;
};

}  // namespace

std::vector<ConstructionRecord> construct_chains(const std::vector<Sample>& samples, const ConstructionBackends& b,
                                                 const PromptTemplates& templates, const ValidationConfig& validation,
                                                 const PipelineConfig& config,
                                                 const std::function<void(const ConstructionRecord&)>& on_record) {
    if (!b.generator || !b.verifier) throw std::invalid_argument("generator and verifier backends are required");
    if (config.human_stage == HumanStageMode::Queue && !b.queue) {
        throw std::invalid_argument("human stage in queue mode needs a review queue");
    }
    if (samples.empty()) return {};
    Driver d(b, templates, validation, config);
    return d.run(samples, on_record);
}

}  // namespace chainforge
