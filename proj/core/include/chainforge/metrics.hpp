#pragma once

// Captioning metrics over the shared tokenizer, plus the causal coherence
// (CauCo) score and multiple-choice accuracy.
//
// Direction convention: `candidate` is the generated chain, `reference` the
// gold chain. BLEU is not symmetric in the two.

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainforge/chain.hpp"
#include "chainforge/result.hpp"
#include "chainforge/text.hpp"

namespace chainforge {

enum class ScoreError { EmptyCandidate, EmptyReference };

const char* to_string(ScoreError e);

/// Clipped n-gram precision (orders 1..n), geometric mean, brevity penalty
/// min(1, exp(1 - |ref|/|cand|)). An order with zero matches but at least
/// one candidate n-gram is smoothed to 1/(total+1). A candidate shorter than
/// `n` has no n-grams at the top order and scores 0.
Result<double, ScoreError> bleu_n(const TokenSequence& candidate, const TokenSequence& reference, int n);

/// LCS F-measure with beta = 1.2.
Result<double, ScoreError> rouge_l(const TokenSequence& candidate, const TokenSequence& reference);

struct MeteorAlignment {
    std::size_t matches = 0;
    std::size_t chunks = 0;
};

/// Exact-match alignment. Each candidate token takes the reference slot that
/// extends the current chunk when one is free, else the leftmost free slot.
MeteorAlignment meteor_align(const TokenSequence& candidate, const TokenSequence& reference);

/// Exact-match stage of METEOR only: F_mean = 10PR/(R+9P), penalty
/// 0.5*(chunks/m)^3. Not comparable with full METEOR scores.
Result<double, ScoreError> meteor_lite(const TokenSequence& candidate, const TokenSequence& reference);

struct CoherenceVerdict {
    bool value = false;
    std::optional<std::string> rationale;
};

enum class JudgeFailureKind { JudgeError, Unavailable };

struct JudgeFailure {
    JudgeFailureKind kind;
    std::string message;
};

using JudgeOutcome = Result<CoherenceVerdict, JudgeFailure>;
using CoherenceJudge = std::function<JudgeOutcome(const CausalChain&)>;

/// Per-chain outcome, in input order.
struct ChainJudgement {
    enum class Status { True, False, JudgeError, Unavailable } status;
    std::string note;
};

struct CaucoResult {
    /// True / (True + False). Absent when no chain got a usable verdict.
    std::optional<double> score;
    std::vector<ChainJudgement> verdicts;
    std::size_t excluded = 0;     // JudgeError verdicts
    std::size_t unavailable = 0;  // backend unreachable
    double coverage = 0.0;        // judged / total
};

/// Submits every chain to `judge` with at most `max_inflight` calls in
/// flight. Judge errors are excluded from the denominator and counted.
CaucoResult cauco_score(std::span<const CausalChain> chains, const CoherenceJudge& judge,
                        std::size_t max_inflight = 4);

struct LengthMismatch {
    std::size_t predictions;
    std::size_t gold;
};

/// Fraction of exact index matches. A missing prediction counts as wrong.
Result<double, LengthMismatch> accuracy(std::span<const std::optional<std::size_t>> predictions,
                                        std::span<const std::size_t> gold);

struct SampleScore {
    std::string id;
    std::optional<std::array<double, 4>> bleu;
    std::optional<double> rouge_l;
    std::optional<double> meteor_lite;
    std::optional<bool> coherent;
    std::optional<bool> correct;
    std::vector<std::string> flags;
};

/// Corpus scores. Text metrics are absent for accuracy-only runs and are
/// then serialized as null.
struct MetricReport {
    std::optional<std::array<double, 4>> bleu;
    std::optional<double> rouge_l;
    std::optional<double> meteor_lite;
    std::optional<double> cauco;
    std::optional<double> accuracy;
    std::size_t n_samples = 0;
    std::vector<SampleScore> per_sample;

    /// Corpus means of the per-sample text metrics; a sample without them
    /// counts as zero.
    void aggregate_text_metrics();
};

/// All text metrics of one candidate/reference pair. Empty inputs yield
/// zero scores with a flag naming the error.
SampleScore score_pair(std::string id, const TokenSequence& candidate, const TokenSequence& reference);

nlohmann::ordered_json to_json(const MetricReport& report);
MetricReport metric_report_from_json(const nlohmann::json& j);

/// Fixed-width table of the corpus-level scores.
std::string render_table(const MetricReport& report);

}  // namespace chainforge
