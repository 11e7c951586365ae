#pragma once

// Corpus files: JSONL samples in, chain-augmented JSONL out, and corpus
// statistics. Field names and order are fixed:
//
//   id, dataset, split, video, video_surrogate?, question, answer,
//   options[], gold_index, gold_chain?
//
// `video` is a URI string, or {"uri": .., "duration_s": ..} when a duration
// is known. `gold_chain` is the canonical chain string. Files are UTF-8
// with LF line endings.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainforge/result.hpp"
#include "chainforge/sample.hpp"
#include "chainforge/validate.hpp"

namespace chainforge {

nlohmann::ordered_json sample_to_json(const Sample& s);

struct SchemaViolation {
    std::size_t line = 0;  // 1-based; 0 for record-level checks outside a file
    std::string field;
    std::string reason;
};

/// Parses and checks one record (everything but cross-record uniqueness).
Result<Sample, SchemaViolation> sample_from_json(const nlohmann::json& j, std::size_t line = 0);

struct LoadSummary {
    std::vector<Sample> samples;
    std::vector<SchemaViolation> errors;
    std::size_t lines_read = 0;  // non-blank lines
};

struct FileUnreadable {
    std::string path;
    std::string message;
};

/// Loads a JSONL corpus. Bad lines are collected with their line number and
/// skipped. A non-empty `expected_dataset` also rejects records from other
/// datasets.
Result<LoadSummary, FileUnreadable> load_samples(const std::filesystem::path& path,
                                                 const std::string& expected_dataset = {});

struct WriteSummary {
    std::size_t records = 0;
    std::uint64_t bytes = 0;
};

struct WriteError {
    enum class Kind { InvalidChain, MissingChain, Io } kind;
    std::string record_id;  // for chain refusals
    std::string message;
    std::optional<ValidationReport> report;
};

/// Test hook: called after each record is written to the temp file.
using WriteProbe = std::function<void(std::size_t records_written)>;

/// Writes samples (each with a gold chain) atomically: temp file in the same
/// directory, fsync, rename. Every chain must pass validate_chain; the first
/// refusal aborts before anything touches `path`.
Result<WriteSummary, WriteError> write_augmented(const std::filesystem::path& path, const std::vector<Sample>& samples,
                                                 const ValidationConfig& config = {}, const WriteProbe& probe = {});

struct CorpusStats {
    std::size_t samples = 0;
    std::size_t with_chain = 0;
    std::map<std::string, std::size_t> per_dataset;
    std::map<std::string, std::size_t> per_split;
    /// Chain length -> count; lengths above 10 land in bucket 11 ("10+").
    std::map<std::size_t, std::size_t> length_histogram;
    double mean_events = 0.0;
    double median_events = 0.0;
};

CorpusStats corpus_stats(const std::vector<Sample>& samples);
nlohmann::ordered_json to_json(const CorpusStats& stats);

/// Seeded uniform subset of `n` samples (all of them when n >= size), kept
/// in corpus order.
std::vector<Sample> sample_audit(const std::vector<Sample>& samples, std::size_t n, std::uint64_t seed);

/// Writes samples as JSONL (non-atomic, no chain requirement).
std::optional<std::string> write_jsonl(const std::filesystem::path& path, const std::vector<Sample>& samples);

}  // namespace chainforge
