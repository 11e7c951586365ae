#pragma once

// Model backends. Every model role (chain generator, verifier, extractor,
// answerer, coherence judge) is reached through `ModelBackend::invoke`, which
// takes a structured request and returns text. Two implementations ship:
// `RemoteBackend` (chat-completions over HTTP) and `ScriptedBackend`
// (deterministic fixtures for offline runs).

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainforge/result.hpp"

namespace chainforge {

enum class BackendRole { Generator, Verifier, Extractor, Answerer, Judge };

std::string_view to_string(BackendRole role);
std::optional<BackendRole> role_from_string(std::string_view name);

enum class BlockKind { Question, Answer, Chain, Options, VideoSurrogate };

std::string_view to_string(BlockKind kind);

struct ContextBlock {
    BlockKind kind;
    std::string text;
};

struct ModelRequest {
    BackendRole role = BackendRole::Generator;
    std::string instruction;
    std::vector<ContextBlock> context;
    std::vector<std::string> media;  // opaque references (frame files, URIs)

    const ContextBlock* find(BlockKind kind) const;
};

/// Canonical JSON of a request; the scripted backend hashes this.
nlohmann::ordered_json to_json(const ModelRequest& request);
/// FNV-1a 64 over the canonical JSON dump, rendered as 16 hex digits.
std::string request_hash(const ModelRequest& request);

struct Usage {
    std::uint64_t prompt_units = 0;
    std::uint64_t completion_units = 0;
};

struct ModelResponse {
    std::string text;
    Usage usage;
    std::uint64_t latency_ms = 0;
    std::uint32_t attempts = 1;  // HTTP attempts spent, including the successful one
};

enum class BackendErrorKind {
    InvalidRequest,
    Timeout,
    RateLimited,
    AuthFailure,
    MalformedResponse,
    TransportError,
};

std::string_view to_string(BackendErrorKind kind);

struct BackendError {
    BackendErrorKind kind;
    std::string message;
    std::uint32_t attempts = 0;

    /// Errors worth another try at the pipeline level. The HTTP client has
    /// already spent its own retries by the time an error surfaces.
    bool retryable() const noexcept {
        return kind == BackendErrorKind::Timeout || kind == BackendErrorKind::RateLimited;
    }
};

using InvokeResult = Result<ModelResponse, BackendError>;

/// Checks the role's required context blocks. Runs before any I/O.
std::optional<BackendError> check_request(const ModelRequest& request);

struct BackendConfig {
    std::string endpoint_url;
    std::string api_key_env_name;
    std::string model_name;
    std::uint32_t timeout_ms = 60000;
    std::uint32_t max_retries = 3;
    std::uint32_t backoff_initial_ms = 500;  // doubles per retry, with jitter
    std::uint32_t max_inflight = 4;
    std::optional<double> temperature;  // role default when unset

    std::optional<std::string> check() const;
};

/// Verifier, judge and answerer always run at temperature 0; generator and
/// extractor default to 0.7 unless configured.
double effective_temperature(BackendRole role, const BackendConfig& config);

/// Rejects a verifier bound to the same model as the generator when strict.
std::optional<std::string> check_cross_model(const BackendConfig& generator, const BackendConfig& verifier,
                                             bool strict);

class ModelBackend {
  public:
    virtual ~ModelBackend() = default;
    virtual InvokeResult invoke(const ModelRequest& request) = 0;
    virtual std::string describe() const = 0;
};

/// FIFO admission gate bounding concurrent calls.
class InflightGate {
  public:
    explicit InflightGate(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

    void acquire();
    void release();

    class Lease {
      public:
        explicit Lease(InflightGate& g) : gate_(g) { gate_.acquire(); }
        ~Lease() { gate_.release(); }
        Lease(const Lease&) = delete;
        Lease& operator=(const Lease&) = delete;

      private:
        InflightGate& gate_;
    };

  private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::size_t capacity_;
    std::size_t active_ = 0;
    std::uint64_t next_ticket_ = 0;
    std::uint64_t serving_ = 0;
};

/// Chat-completions client: POSTs {model, temperature, messages} and reads
/// choices[0].message.content. Retries timeouts, 429 and 5xx with
/// exponential backoff; 401/403 fail immediately.
class RemoteBackend final : public ModelBackend {
  public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    RemoteBackend(BackendConfig config, std::uint64_t jitter_seed = 0x5eed);

    InvokeResult invoke(const ModelRequest& request) override;
    std::string describe() const override;

    /// Replaces the real sleep; tests use this to skip backoff delays.
    void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }

    const BackendConfig& config() const noexcept { return config_; }

  private:
    std::chrono::milliseconds backoff_delay(std::uint32_t retry);

    BackendConfig config_;
    InflightGate gate_;
    Sleeper sleeper_;
    std::mutex rng_mu_;
    std::uint64_t jitter_state_;
};

/// Deterministic fixture-driven backend.
///
/// Lookup order for a request:
///   1. exact request hash in the fixture map,
///   2. the first rule whose `contains` substring appears in the rendered
///      request (instruction + context texts),
///   3. a responder callback, when installed,
///   4. the default text, when set;
/// otherwise the call fails with TransportError.
///
/// A rule may carry a sequence of texts; successive matches walk the
/// sequence and stay on the last entry. This is the only stateful path and
/// exists for fault-injection scripts.
class ScriptedBackend final : public ModelBackend {
  public:
    using Responder = std::function<std::optional<std::string>(const ModelRequest&)>;

    struct Rule {
        std::string contains;
        std::vector<std::string> texts;
    };

    ScriptedBackend() = default;

    /// Loads a JSON script: {"responses": {hash: text}, "rules": [{"contains":
    /// s, "text": t} | {"contains": s, "texts": [..]}], "default": text}.
    static Result<std::unique_ptr<ScriptedBackend>, std::string> from_file(const std::filesystem::path& path);
    static Result<std::unique_ptr<ScriptedBackend>, std::string> from_json(const nlohmann::json& script);

    void add_fixture(const std::string& hash, std::string text);
    void add_rule(Rule rule);
    void set_responder(Responder r) { responder_ = std::move(r); }
    void set_default(std::string text) { default_text_ = std::move(text); }

    InvokeResult invoke(const ModelRequest& request) override;
    std::string describe() const override { return "scripted"; }

    /// Requests seen so far, in call order.
    std::vector<ModelRequest> calls() const;

  private:
    mutable std::mutex mu_;
    std::map<std::string, std::string> fixtures_;
    std::vector<Rule> rules_;
    std::vector<std::size_t> rule_cursor_;
    Responder responder_;
    std::optional<std::string> default_text_;
    std::vector<ModelRequest> calls_;
};

/// Renders the request as a flat text prompt, one labelled section per block.
std::string render_prompt(const ModelRequest& request);

}  // namespace chainforge
