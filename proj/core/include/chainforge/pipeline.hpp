#pragma once

// Chain construction loop: generate -> parse/validate -> cross-model verify
// -> human verify, regenerating until a chain passes or the attempt budget
// runs out.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainforge/backend.hpp"
#include "chainforge/review_queue.hpp"
#include "chainforge/roles.hpp"
#include "chainforge/sample.hpp"
#include "chainforge/validate.hpp"

namespace chainforge {

enum class StageStatus { Pass, Fail, Skipped, Pending };

const char* to_string(StageStatus s);

enum class VerifierStatus { Accept, Reject, Skipped };
enum class HumanStatus { Pending, Approved, Edited, Rejected, Skipped, PolicySkipped };

const char* to_string(VerifierStatus s);
const char* to_string(HumanStatus s);

struct ConstructionAttempt {
    std::size_t attempt_no = 1;
    std::string raw_output;
    bool parse_ok = false;
    ValidationReport validation;
    VerifierStatus verifier = VerifierStatus::Skipped;
    std::string verifier_reason;
    HumanStatus human = HumanStatus::Skipped;
    std::optional<CausalChain> edited_chain;
    std::string human_reason;
    std::optional<std::string> reviewer;
    std::string started_at;
    std::string finished_at;
    std::optional<std::string> error;

    StageStatus parse_stage() const;
    StageStatus validation_stage() const;
    StageStatus verifier_stage() const;
    StageStatus human_stage() const;
    /// Passed every stage that ran, counting a policy skip of the human stage.
    bool passed() const;
};

struct ConstructionRecord {
    std::string sample_id;
    std::vector<ConstructionAttempt> attempts;
    std::optional<CausalChain> final_chain;  // empty = Exhausted
    std::size_t max_attempts = 5;
    std::optional<std::string> error;

    bool exhausted() const noexcept { return !final_chain.has_value(); }
};

nlohmann::ordered_json to_json(const ConstructionAttempt& a);
nlohmann::ordered_json to_json(const ConstructionRecord& r);

enum class HumanStageMode {
    Disabled,     // recorded as skipped_policy
    AutoApprove,  // recorded as skipped_policy
    Queue,        // park in the review queue until a reviewer decides
};

struct PipelineConfig {
    std::size_t max_attempts = 5;
    std::size_t worker_pool_size = 4;
    HumanStageMode human_stage = HumanStageMode::Disabled;
    /// Prefix for review item ids, keeping ids unique across runs that
    /// share a queue log. Item ids are `<prefix><sample_id>#<attempt_no>`.
    std::string item_prefix;

    std::optional<std::string> check() const;
};

struct ConstructionBackends {
    ModelBackend* generator = nullptr;
    ModelBackend* verifier = nullptr;
    ReviewQueue* queue = nullptr;  // required in Queue mode
};

/// Runs the loop over every sample on a bounded worker pool. In Queue mode a
/// sample waiting for a reviewer holds no worker; the queue's decision
/// listener puts it back on the work list. Returns records in input order.
/// `on_record` is called once per finished record, from a single thread at
/// a time.
std::vector<ConstructionRecord> construct_chains(const std::vector<Sample>& samples, const ConstructionBackends& b,
                                                 const PromptTemplates& templates, const ValidationConfig& validation,
                                                 const PipelineConfig& config,
                                                 const std::function<void(const ConstructionRecord&)>& on_record = {});

}  // namespace chainforge
