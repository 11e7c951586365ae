#pragma once

// Run configuration, read from a flat sectioned key = value file:
//
//   [paths]        data_dir, runs_dir, queue_log, prompts_dir
//   [validation]   max_events, min_events, max_event_chars, require_terminal_relevance
//   [pipeline]     max_attempts, worker_pool_size, human_stage_enabled, auto_approve, strict_models
//   [lexicons]     actors, antonyms
//   [backend.<role>]
//                  kind = remote | scripted
//                  endpoint_url, api_key_env, model, timeout_ms, max_retries,
//                  backoff_initial_ms, max_inflight, temperature      (remote)
//                  script, builtin                                    (scripted)
//
// Relative paths resolve against the directory holding the config file.
// Values may be wrapped in double quotes.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainforge/backend.hpp"
#include "chainforge/pipeline.hpp"
#include "chainforge/result.hpp"
#include "chainforge/sample.hpp"
#include "chainforge/validate.hpp"

namespace chainforge {

struct RoleBinding {
    enum class Kind { Remote, Scripted } kind = Kind::Scripted;
    BackendConfig backend;
    std::optional<std::filesystem::path> script;
    /// Named rule-based responder: overlap_answerer, masked_overlap_answerer,
    /// accepting_verifier, gold_chain_echo or gold_judge.
    std::optional<std::string> builtin;
};

struct PathsConfig {
    std::filesystem::path data_dir = ".";
    std::filesystem::path runs_dir = "runs";
    std::filesystem::path queue_log = "review_queue.jsonl";
    std::optional<std::filesystem::path> prompts_dir;
};

struct GlobalConfig {
    std::filesystem::path source;
    PathsConfig paths;
    ValidationConfig validation;
    PipelineConfig pipeline;
    bool human_stage_enabled = false;
    bool auto_approve = false;
    bool strict_models = true;
    std::optional<std::filesystem::path> actors_lexicon;
    std::optional<std::filesystem::path> antonyms_lexicon;
    std::map<BackendRole, RoleBinding> roles;

    /// Error naming the first role in `needed` that has no binding.
    std::optional<std::string> require_roles(const std::vector<BackendRole>& needed) const;
};

Result<GlobalConfig, std::string> load_config(const std::filesystem::path& path);
Result<GlobalConfig, std::string> parse_config(const std::string& text, const std::filesystem::path& base_dir);

/// Snapshot for run.json. API keys never appear, only the variable name.
nlohmann::ordered_json to_json(const GlobalConfig& config);

/// Builds the backend for `role`. Builtins that need corpus knowledge read
/// it from `corpus`. A scripted binding with both a script and a builtin
/// tries the script first.
Result<std::unique_ptr<ModelBackend>, std::string> make_backend(const GlobalConfig& config, BackendRole role,
                                                                const std::vector<Sample>& corpus);

}  // namespace chainforge
