#pragma once

// Human review queue, persisted as an append-only JSONL event log:
//
//   {"ts": "...", "kind": "enqueued", "payload": {<item>}}
//   {"ts": "...", "kind": "decided",  "payload": {"item_id", "action", "chain"?, "reason"?, "reviewer"}}
//
// Queue state is the fold of the log. One process writes (advisory lock on
// `<log>.lock`); any number may replay.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainforge/chain.hpp"
#include "chainforge/result.hpp"
#include "chainforge/validate.hpp"

namespace chainforge {

enum class ReviewState { Pending, Approved, Edited, Rejected };

const char* to_string(ReviewState s);

struct ReviewItem {
    explicit ReviewItem(CausalChain c) : chain(std::move(c)) {}

    std::string item_id;
    std::string sample_id;
    std::size_t attempt_no = 1;
    CausalChain chain;
    ReviewState state = ReviewState::Pending;
    std::optional<CausalChain> edited_chain;
    std::string reason;
    std::optional<std::string> decided_by;
    std::optional<std::string> decided_at;
    std::string enqueued_at;

    // Context shown to the reviewer.
    std::string question;
    std::string gold_answer;
    std::string video_uri;
    std::optional<std::string> video_surrogate;
    std::vector<std::string> prior_rejections;

    friend bool operator==(const ReviewItem&, const ReviewItem&) = default;
};

nlohmann::ordered_json to_json(const ReviewItem& item);
std::optional<ReviewItem> review_item_from_json(const nlohmann::json& j);

enum class DecisionAction { Approve, Edit, Reject };

std::optional<DecisionAction> action_from_string(std::string_view s);
const char* to_string(DecisionAction a);

struct Decision {
    DecisionAction action = DecisionAction::Approve;
    std::optional<CausalChain> chain;  // Edit only
    std::string reason;                // Reject only
    std::string reviewer;
};

struct QueueEvent {
    enum class Kind { Enqueued, Decided } kind;
    std::string ts;
    std::optional<ReviewItem> item;  // Enqueued
    std::string item_id;             // Decided
    Decision decision;               // Decided
};

nlohmann::ordered_json to_json(const QueueEvent& e);
std::optional<QueueEvent> queue_event_from_json(const nlohmann::json& j);

struct QueueCounts {
    std::size_t pending = 0;
    std::size_t approved = 0;
    std::size_t edited = 0;
    std::size_t rejected = 0;

    friend bool operator==(const QueueCounts&, const QueueCounts&) = default;
};

/// Pure fold target for queue events.
class QueueState {
  public:
    /// Applies one event. Returns a description when the event is an anomaly
    /// (duplicate enqueue, decision on an unknown or decided item); anomalies
    /// are recorded and otherwise ignored.
    std::optional<std::string> apply(const QueueEvent& e);

    const std::vector<ReviewItem>& items() const noexcept { return items_; }
    const ReviewItem* find(const std::string& item_id) const;
    const std::vector<std::string>& anomalies() const noexcept { return anomalies_; }
    QueueCounts counts() const;

    friend bool operator==(const QueueState&, const QueueState&) = default;

  private:
    std::vector<ReviewItem> items_;  // enqueue order
    std::map<std::string, std::size_t> index_;
    std::vector<std::string> anomalies_;
};

struct ReplayResult {
    QueueState state;
    std::size_t events_applied = 0;
    /// 1-based line number of the first unreadable line; replay stops there.
    std::optional<std::size_t> truncated_at;
};

/// Missing file replays as an empty queue.
ReplayResult queue_replay(const std::filesystem::path& path);

struct DecideError {
    enum class Kind { NotFound, Conflict, Invalid, Io } kind;
    std::string message;
    std::optional<ValidationReport> report;
};

/// Writer-side queue: owns the log file and its lock, keeps the folded state
/// in memory, and hands out reviewer leases.
class ReviewQueue {
  public:
    using Clock = std::chrono::system_clock;
    using DecisionListener = std::function<void(const ReviewItem&)>;

    static Result<std::unique_ptr<ReviewQueue>, std::string> open(const std::filesystem::path& log_path,
                                                                  ValidationConfig validation = {});
    ~ReviewQueue();

    ReviewQueue(const ReviewQueue&) = delete;
    ReviewQueue& operator=(const ReviewQueue&) = delete;

    Result<ReviewItem, std::string> enqueue(ReviewItem item);
    Result<ReviewItem, DecideError> decide(const std::string& item_id, const Decision& decision);

    /// Oldest pending item not leased to someone else; leases it to
    /// `reviewer` until now + lease duration.
    std::optional<ReviewItem> lease_next(const std::string& reviewer, Clock::time_point now = Clock::now());

    std::optional<ReviewItem> get(const std::string& item_id) const;
    std::optional<ReviewItem> latest_for_sample(const std::string& sample_id) const;
    QueueCounts counts() const;
    QueueState snapshot() const;
    std::size_t replayed_events() const noexcept { return replayed_; }

    void set_lease_duration(std::chrono::seconds d) { lease_duration_ = d; }
    /// Called after each successful decision, outside the queue lock.
    void set_listener(DecisionListener l);

  private:
    ReviewQueue() = default;
    std::optional<std::string> append(const QueueEvent& e);

    struct Lease {
        std::string reviewer;
        Clock::time_point expires;
    };

    mutable std::mutex mu_;
    std::filesystem::path path_;
    int lock_fd_ = -1;
    std::ofstream log_;
    QueueState state_;
    ValidationConfig validation_;
    std::map<std::string, Lease> leases_;
    std::chrono::seconds lease_duration_{600};
    DecisionListener listener_;
    std::size_t replayed_ = 0;
};

}  // namespace chainforge
