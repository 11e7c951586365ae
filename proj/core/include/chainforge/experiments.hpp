#pragma once

// QA-side runs: two-stage inference (extract a chain, then answer from it),
// the gold-chain upper bound, the masking sweep and generated-chain quality
// scoring.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainforge/backend.hpp"
#include "chainforge/metrics.hpp"
#include "chainforge/result.hpp"
#include "chainforge/roles.hpp"
#include "chainforge/sample.hpp"

namespace chainforge {

/// Runs fn(0..n-1) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

enum class ExperimentKind { UpperBound, MaskingSweep, TwoStageQA, ChainQualityEval };

const char* to_string(ExperimentKind k);

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::TwoStageQA;
    std::optional<Split> split;
    std::vector<std::size_t> levels;  // MaskingSweep only
    std::uint64_t seed = 0;
    std::size_t workers = 4;
};

nlohmann::ordered_json to_json(const ExperimentSpec& spec);

/// Levels must be strictly increasing, and each below the longest chain.
std::optional<std::string> check_levels(const std::vector<std::size_t>& levels, std::size_t max_chain_events);

std::vector<Sample> select_split(const std::vector<Sample>& samples, std::optional<Split> split);

// --- masking -----------------------------------------------------------------

inline constexpr std::string_view kMaskText = "MASKED";

struct MaskedChain {
    CausalChain base;
    std::vector<std::size_t> masked_indices;  // ascending
    CausalChain rendered;
};

struct KTooLarge {
    std::size_t k;
    std::size_t events;
};

/// Masks k distinct events chosen by the seed. The masked set is the first k
/// entries of one seeded permutation, so for a fixed seed the set at k is
/// contained in the set at k + 1.
Result<MaskedChain, KTooLarge> mask_chain(const CausalChain& chain, std::size_t k, std::uint64_t seed);

// --- QA runs -----------------------------------------------------------------

struct TwoStageAnswer {
    CausalChain chain;
    std::size_t selected = 0;
    std::vector<std::string> extractor_outputs;
    std::vector<std::string> answerer_outputs;
};

struct TwoStageError {
    enum class Stage { Input, Extract, Answer } stage;
    std::string sample_id;
    std::string question;
    std::string message;
    std::vector<std::string> raw_outputs;
    std::optional<CausalChain> chain;  // set when extraction succeeded
};

/// Extract, then answer from the extracted chain. The chain the answerer saw
/// is always returned with the answer.
Result<TwoStageAnswer, TwoStageError> two_stage_answer(const Sample& sample, ModelBackend& extractor,
                                                       ModelBackend& answerer, const PromptTemplates& t);

/// Per-sample outcome of a QA-style run; one line of records.jsonl.
struct QaOutcome {
    std::string sample_id;
    std::optional<std::size_t> k;  // masking level
    std::optional<std::string> chain;
    std::optional<std::size_t> selected;
    std::optional<std::size_t> gold_index;
    std::vector<std::string> raw_outputs;
    std::optional<std::string> error;
    /// The answerer replied but named no option; scored wrong.
    bool abstained = false;
    std::optional<std::string> excluded;  // reason the sample was left out
};

nlohmann::ordered_json to_json(const QaOutcome& o);

struct QaRun {
    MetricReport report;
    std::vector<QaOutcome> outcomes;  // input order
    std::size_t excluded = 0;
};

/// Samples without options are excluded and counted.
QaRun run_two_stage_qa(const std::vector<Sample>& samples, ModelBackend& extractor, ModelBackend& answerer,
                       const PromptTemplates& t, std::size_t workers = 4);

/// Answers from the gold chain. Samples missing a gold chain or options are
/// excluded and counted.
QaRun run_upper_bound(const std::vector<Sample>& samples, ModelBackend& answerer, const PromptTemplates& t,
                      std::size_t workers = 4);

struct SweepPoint {
    std::size_t k = 0;
    std::size_t n = 0;        // samples answered at this level
    std::size_t skipped = 0;  // chains too short for k
    std::optional<double> accuracy;
};

struct SweepRun {
    std::vector<SweepPoint> points;
    std::vector<QaOutcome> outcomes;  // level-major, input order within a level
    std::size_t excluded = 0;
};

/// Masks every gold chain at each level (sample seed = seed XOR ordinal,
/// ordinal = position in `samples`) and answers from the masked chain.
Result<SweepRun, std::string> run_masking_sweep(const std::vector<Sample>& samples, ModelBackend& answerer,
                                                const PromptTemplates& t, const std::vector<std::size_t>& levels,
                                                std::uint64_t seed, std::size_t workers = 4);

/// `k,n,accuracy` with a header row; an undefined accuracy is an empty cell.
std::string sweep_csv(const std::vector<SweepPoint>& points);

struct QualityRun {
    MetricReport report;
    std::vector<nlohmann::ordered_json> rows;
    std::size_t excluded = 0;
    CaucoResult cauco;
};

/// Extracts a chain per sample and scores it against the gold chain. A failed
/// extraction scores zero, is flagged, and counts as incoherent.
QualityRun run_chain_quality_eval(const std::vector<Sample>& samples, ModelBackend& extractor, ModelBackend& judge,
                                  const PromptTemplates& t, std::size_t workers = 4);

}  // namespace chainforge
