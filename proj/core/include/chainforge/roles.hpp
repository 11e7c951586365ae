#pragma once

// Role-level operations built on ModelBackend: chain generation prompts,
// chain extraction, answering, verification and coherence judging. Each
// operation owns its output grammar and its single reprompt.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chainforge/backend.hpp"
#include "chainforge/chain.hpp"
#include "chainforge/metrics.hpp"
#include "chainforge/sample.hpp"

namespace chainforge {

/// Prompt text per role with `{{question}}`, `{{answer}}`, `{{chain}}`,
/// `{{options}}`, `{{surrogate}}` and `{{feedback}}` placeholders.
class PromptTemplates {
  public:
    /// Built-in reconstructions; override per role from files.
    static PromptTemplates defaults();

    /// Replaces the template of every role that has `<role>.txt` in `dir`.
    std::optional<std::string> load_dir(const std::filesystem::path& dir);

    const std::string& get(BackendRole role) const { return templates_.at(role); }
    void set(BackendRole role, std::string text) { templates_[role] = std::move(text); }

  private:
    std::map<BackendRole, std::string> templates_;
};

/// Substitutes `{{name}}` placeholders; unknown names are left as-is.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

ModelRequest generator_request(const PromptTemplates& t, std::string_view question, std::string_view answer,
                               const std::vector<std::string>& feedback);

// --- extraction --------------------------------------------------------------

struct ExtractTrace {
    std::vector<std::string> raw_outputs;
};

struct ExtractError {
    enum class Kind { ChainFormat, Backend } kind;
    std::string message;
    std::optional<BackendError> backend;
    ExtractTrace trace;
};

struct Extraction {
    CausalChain chain;
    ExtractTrace trace;
};

/// Extractor call over the video (media reference, or the surrogate text
/// when one is present) and question, then parse_chain. One reprompt with a
/// format reminder on parse failure.
Result<Extraction, ExtractError> extract_chain(ModelBackend& backend, const PromptTemplates& t,
                                               const VideoRef& video, const std::optional<std::string>& surrogate,
                                               std::string_view question);

// --- answering ---------------------------------------------------------------

/// Letter grammar for free-form answers, in priority order:
///   1. an "answer is X" / "answer: X" phrase (case-insensitive on "answer"),
///   2. a letter token `X`, `(X)`, `X.`, `X)` or `X:` as the first token,
///   3. the only distinct letter token anywhere in the response.
/// A bare `A` or `I` followed by a lowercase word (other than or/and/nor/vs)
/// reads as an article or pronoun, not an option. Letters beyond the option
/// count are ignored. Two or more distinct letters is ambiguous.
std::optional<std::size_t> parse_answer_letter(std::string_view response, std::size_t option_count);

struct AnswerError {
    enum class Kind { Parse, Backend, InvalidOptions } kind;
    std::string message;
    std::optional<BackendError> backend;
    std::vector<std::string> raw_outputs;
};

struct AnswerSelection {
    std::size_t index;
    std::vector<std::string> raw_outputs;
};

Result<AnswerSelection, AnswerError> answer_question(ModelBackend& backend, const PromptTemplates& t,
                                                     std::string_view question, const CausalChain& chain,
                                                     const std::vector<std::string>& options);

// --- verification ------------------------------------------------------------

struct VerifierDecision {
    bool accept = false;
    std::string reason;  // empty on accept
};

/// `ACCEPT` or `REJECT[:|-] reason`, trimmed and case-folded on the keyword.
std::optional<VerifierDecision> parse_verifier_reply(std::string_view reply);

struct VerifierError {
    enum class Kind { Parse, Backend } kind;
    std::string message;
    std::optional<BackendError> backend;
};

Result<VerifierDecision, VerifierError> verify_chain(ModelBackend& backend, const PromptTemplates& t,
                                                     std::string_view question, std::string_view answer,
                                                     const CausalChain& chain);

// --- coherence judging -------------------------------------------------------

/// Exactly "true" or "false" after trimming and case-folding.
std::optional<bool> parse_judge_reply(std::string_view reply);

/// One reprompt on an unparseable verdict, then JudgeError. Backend errors
/// map to Unavailable.
JudgeOutcome judge_coherence(ModelBackend& backend, const PromptTemplates& t, const CausalChain& chain);

/// Adapts a backend into the judge callable `cauco_score` expects.
CoherenceJudge make_judge(ModelBackend& backend, const PromptTemplates& t);

}  // namespace chainforge
