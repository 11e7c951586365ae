#include "chainforge/review_queue.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "chainforge/clock.hpp"

namespace chainforge {

namespace {

std::optional<ReviewState> state_from_string(std::string_view s) {
    if (s == "pending") return ReviewState::Pending;
    if (s == "approved") return ReviewState::Approved;
    if (s == "edited") return ReviewState::Edited;
    if (s == "rejected") return ReviewState::Rejected;
    return std::nullopt;
}

nlohmann::ordered_json nullable(const std::optional<std::string>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

template <typename J>
std::optional<std::string> opt_string(const J& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].template get<std::string>();
}

}  // namespace

const char* to_string(ReviewState s) {
    switch (s) {
        case ReviewState::Pending: return "pending";
        case ReviewState::Approved: return "approved";
        case ReviewState::Edited: return "edited";
        case ReviewState::Rejected: return "rejected";
    }
    return "pending";
}

std::optional<DecisionAction> action_from_string(std::string_view s) {
    if (s == "approve") return DecisionAction::Approve;
    if (s == "edit") return DecisionAction::Edit;
    if (s == "reject") return DecisionAction::Reject;
    return std::nullopt;
}

const char* to_string(DecisionAction a) {
    switch (a) {
        case DecisionAction::Approve: return "approve";
        case DecisionAction::Edit: return "edit";
        case DecisionAction::Reject: return "reject";
    }
    return "approve";
}

nlohmann::ordered_json to_json(const ReviewItem& item) {
    nlohmann::ordered_json j;
    j["item_id"] = item.item_id;
    j["sample_id"] = item.sample_id;
    j["attempt_no"] = item.attempt_no;
    j["chain"] = serialize_chain(item.chain);
    j["state"] = to_string(item.state);
    j["edited_chain"] = item.edited_chain ? nlohmann::ordered_json(serialize_chain(*item.edited_chain)) : nlohmann::ordered_json(nullptr);
    j["reason"] = item.reason;
    j["decided_by"] = nullable(item.decided_by);
    j["decided_at"] = nullable(item.decided_at);
    j["enqueued_at"] = item.enqueued_at;
    j["question"] = item.question;
    j["gold_answer"] = item.gold_answer;
    j["video_uri"] = item.video_uri;
    j["video_surrogate"] = nullable(item.video_surrogate);
    j["prior_rejections"] = item.prior_rejections;
    return j;
}

std::optional<ReviewItem> review_item_from_json(const nlohmann::json& j) {
    try {
        auto chain = parse_chain(j.at("chain").get<std::string>());
        if (!chain) return std::nullopt;
        ReviewItem item(std::move(chain).value());
        item.item_id = j.at("item_id").get<std::string>();
        item.sample_id = j.at("sample_id").get<std::string>();
        item.attempt_no = j.at("attempt_no").get<std::size_t>();
        auto st = state_from_string(j.value("state", std::string("pending")));
        if (!st) return std::nullopt;
        item.state = *st;
        if (auto e = opt_string(j, "edited_chain")) {
            auto ec = parse_chain(*e);
            if (!ec) return std::nullopt;
            item.edited_chain = std::move(ec).value();
        }
        item.reason = j.value("reason", std::string());
        item.decided_by = opt_string(j, "decided_by");
        item.decided_at = opt_string(j, "decided_at");
        item.enqueued_at = j.value("enqueued_at", std::string());
        item.question = j.value("question", std::string());
        item.gold_answer = j.value("gold_answer", std::string());
        item.video_uri = j.value("video_uri", std::string());
        item.video_surrogate = opt_string(j, "video_surrogate");
        if (j.contains("prior_rejections")) {
            item.prior_rejections = j.at("prior_rejections").get<std::vector<std::string>>();
        }
        if (item.item_id.empty() || item.sample_id.empty() || item.attempt_no == 0) return std::nullopt;
        return item;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

nlohmann::ordered_json to_json(const QueueEvent& e) {
    nlohmann::ordered_json j;
    j["ts"] = e.ts;
    if (e.kind == QueueEvent::Kind::Enqueued) {
        j["kind"] = "enqueued";
        j["payload"] = to_json(*e.item);
    } else {
        j["kind"] = "decided";
        nlohmann::ordered_json p;
        p["item_id"] = e.item_id;
        p["action"] = to_string(e.decision.action);
        if (e.decision.chain) p["chain"] = serialize_chain(*e.decision.chain);
        if (!e.decision.reason.empty()) p["reason"] = e.decision.reason;
        p["reviewer"] = e.decision.reviewer;
        j["payload"] = std::move(p);
    }
    return j;
}

std::optional<QueueEvent> queue_event_from_json(const nlohmann::json& j) {
    try {
        QueueEvent e{};
        e.ts = j.at("ts").get<std::string>();
        const auto kind = j.at("kind").get<std::string>();
        const auto& p = j.at("payload");
        if (kind == "enqueued") {
            e.kind = QueueEvent::Kind::Enqueued;
            e.item = review_item_from_json(p);
            if (!e.item) return std::nullopt;
        } else if (kind == "decided") {
            e.kind = QueueEvent::Kind::Decided;
            e.item_id = p.at("item_id").get<std::string>();
            auto action = action_from_string(p.at("action").get<std::string>());
            if (!action) return std::nullopt;
            e.decision.action = *action;
            if (auto c = opt_string(p, "chain")) {
                auto chain = parse_chain(*c);
                if (!chain) return std::nullopt;
                e.decision.chain = std::move(chain).value();
            }
            e.decision.reason = p.value("reason", std::string());
            e.decision.reviewer = p.value("reviewer", std::string());
        } else {
            return std::nullopt;
        }
        return e;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

std::optional<std::string> QueueState::apply(const QueueEvent& e) {
    auto anomaly = [&](std::string what) -> std::optional<std::string> {
        anomalies_.push_back(what);
        return what;
    };
    if (e.kind == QueueEvent::Kind::Enqueued) {
        const auto& item = *e.item;
        if (index_.contains(item.item_id)) return anomaly("duplicate enqueue of " + item.item_id);
        index_[item.item_id] = items_.size();
        items_.push_back(item);
        items_.back().state = ReviewState::Pending;
        return std::nullopt;
    }
    const auto it = index_.find(e.item_id);
    if (it == index_.end()) return anomaly("decision for unknown item " + e.item_id);
    auto& item = items_[it->second];
    if (item.state != ReviewState::Pending) return anomaly("decision for already decided item " + e.item_id);
    switch (e.decision.action) {
        case DecisionAction::Approve:
            item.state = ReviewState::Approved;
            break;
        case DecisionAction::Edit:
            if (!e.decision.chain) return anomaly("edit without a chain for " + e.item_id);
            item.state = ReviewState::Edited;
            item.edited_chain = e.decision.chain;
            break;
        case DecisionAction::Reject:
            item.state = ReviewState::Rejected;
            item.reason = e.decision.reason;
            break;
    }
    item.decided_by = e.decision.reviewer;
    item.decided_at = e.ts;
    return std::nullopt;
}

const ReviewItem* QueueState::find(const std::string& item_id) const {
    const auto it = index_.find(item_id);
    return it == index_.end() ? nullptr : &items_[it->second];
}

QueueCounts QueueState::counts() const {
    QueueCounts c;
    for (const auto& i : items_) {
        switch (i.state) {
            case ReviewState::Pending: ++c.pending; break;
            case ReviewState::Approved: ++c.approved; break;
            case ReviewState::Edited: ++c.edited; break;
            case ReviewState::Rejected: ++c.rejected; break;
        }
    }
    return c;
}

ReplayResult queue_replay(const std::filesystem::path& path) {
    ReplayResult r;
    std::ifstream in(path, std::ios::binary);
    if (!in) return r;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        auto e = j.is_discarded() ? std::nullopt : queue_event_from_json(j);
        if (!e) {
            r.truncated_at = lineno;
            break;
        }
        r.state.apply(*e);
        ++r.events_applied;
    }
    return r;
}

Result<std::unique_ptr<ReviewQueue>, std::string> ReviewQueue::open(const std::filesystem::path& log_path,
                                                                    ValidationConfig validation) {
    std::unique_ptr<ReviewQueue> q(new ReviewQueue());
    q->path_ = log_path;
    q->validation_ = validation;
    if (log_path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(log_path.parent_path(), ec);
    }

    const auto lock_path = log_path.string() + ".lock";
    q->lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (q->lock_fd_ < 0) return fail(std::string("cannot open lock file " + lock_path));
    if (::flock(q->lock_fd_, LOCK_EX | LOCK_NB) != 0) {
        return fail(std::string("queue log " + log_path.string() + " is locked by another writer"));
    }

    auto replay = queue_replay(log_path);
    if (replay.truncated_at) {
        return fail(std::string("queue log " + log_path.string() + " is corrupt at line " +
                                std::to_string(*replay.truncated_at)));
    }
    q->state_ = std::move(replay.state);
    q->replayed_ = replay.events_applied;

    q->log_.open(log_path, std::ios::binary | std::ios::app);
    if (!q->log_) return fail(std::string("cannot open queue log " + log_path.string() + " for append"));
    return q;
}

ReviewQueue::~ReviewQueue() {
    log_.close();
    if (lock_fd_ >= 0) {
        ::flock(lock_fd_, LOCK_UN);
        ::close(lock_fd_);
    }
}

std::optional<std::string> ReviewQueue::append(const QueueEvent& e) {
    log_ << to_json(e).dump() << '\n';
    log_.flush();
    if (!log_) return "append to " + path_.string() + " failed";
    return std::nullopt;
}

Result<ReviewItem, std::string> ReviewQueue::enqueue(ReviewItem item) {
    std::lock_guard lock(mu_);
    if (state_.find(item.item_id)) return fail(std::string("item " + item.item_id + " already enqueued"));
    item.state = ReviewState::Pending;
    item.edited_chain.reset();
    item.decided_by.reset();
    item.decided_at.reset();
    if (item.enqueued_at.empty()) item.enqueued_at = utc_timestamp();
    QueueEvent e{QueueEvent::Kind::Enqueued, item.enqueued_at, item, {}, {}};
    if (auto err = append(e)) return fail(std::move(*err));
    state_.apply(e);
    return item;
}

Result<ReviewItem, DecideError> ReviewQueue::decide(const std::string& item_id, const Decision& decision) {
    std::optional<ReviewItem> decided;
    DecisionListener listener;
    {
        std::lock_guard lock(mu_);
        const auto* item = state_.find(item_id);
        if (item == nullptr) return fail(DecideError{DecideError::Kind::NotFound, "no item " + item_id, {}});
        if (item->state != ReviewState::Pending) {
            return fail(DecideError{DecideError::Kind::Conflict,
                                    "item " + item_id + " is already " + to_string(item->state), {}});
        }
        if (decision.action == DecisionAction::Edit) {
            if (!decision.chain) return fail(DecideError{DecideError::Kind::Invalid, "edit requires a chain", {}});
            auto report = validate_chain(serialize_chain(*decision.chain), validation_);
            if (!report.passed()) {
                return fail(DecideError{DecideError::Kind::Invalid, "edited chain fails validation", std::move(report)});
            }
        }
        if (decision.action == DecisionAction::Reject && trim(decision.reason).empty()) {
            return fail(DecideError{DecideError::Kind::Invalid, "reject requires a reason", {}});
        }
        QueueEvent e{QueueEvent::Kind::Decided, utc_timestamp(), std::nullopt, item_id, decision};
        if (auto err = append(e)) return fail(DecideError{DecideError::Kind::Io, *err, {}});
        state_.apply(e);
        leases_.erase(item_id);
        decided = *state_.find(item_id);
        listener = listener_;
    }
    if (listener) listener(*decided);
    return std::move(*decided);
}

std::optional<ReviewItem> ReviewQueue::lease_next(const std::string& reviewer, Clock::time_point now) {
    std::lock_guard lock(mu_);
    for (const auto& item : state_.items()) {
        if (item.state != ReviewState::Pending) continue;
        auto it = leases_.find(item.item_id);
        if (it != leases_.end() && it->second.expires > now && it->second.reviewer != reviewer) continue;
        leases_[item.item_id] = {reviewer, now + lease_duration_};
        return item;
    }
    return std::nullopt;
}

std::optional<ReviewItem> ReviewQueue::get(const std::string& item_id) const {
    std::lock_guard lock(mu_);
    const auto* item = state_.find(item_id);
    if (item == nullptr) return std::nullopt;
    return *item;
}

std::optional<ReviewItem> ReviewQueue::latest_for_sample(const std::string& sample_id) const {
    std::lock_guard lock(mu_);
    const auto& items = state_.items();
    for (auto it = items.rbegin(); it != items.rend(); ++it) {
        if (it->sample_id == sample_id) return *it;
    }
    return std::nullopt;
}

QueueCounts ReviewQueue::counts() const {
    std::lock_guard lock(mu_);
    return state_.counts();
}

QueueState ReviewQueue::snapshot() const {
    std::lock_guard lock(mu_);
    return state_;
}

void ReviewQueue::set_listener(DecisionListener l) {
    std::lock_guard lock(mu_);
    listener_ = std::move(l);
}

}  // namespace chainforge
