#include "chainforge/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <thread>

namespace chainforge {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const TokenSequence& tokens, std::size_t order) {
    NgramCounts counts;
    if (tokens.size() < order) return counts;
    for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
        ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                          tokens.begin() + static_cast<std::ptrdiff_t>(i + order))];
    }
    return counts;
}

std::optional<ScoreError> check_inputs(const TokenSequence& c, const TokenSequence& r) {
    if (c.empty()) return ScoreError::EmptyCandidate;
    if (r.empty()) return ScoreError::EmptyReference;
    return std::nullopt;
}

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double mean(const std::vector<SampleScore>& xs, auto field) {
    if (xs.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& x : xs) sum += field(x);
    return sum / static_cast<double>(xs.size());
}

template <typename T>
nlohmann::ordered_json nullable(const std::optional<T>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

template <typename T>
std::optional<T> optional_number(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

}  // namespace

const char* to_string(ScoreError e) {
    return e == ScoreError::EmptyCandidate ? "EmptyCandidate" : "EmptyReference";
}

Result<double, ScoreError> bleu_n(const TokenSequence& candidate, const TokenSequence& reference, int n) {
    if (auto err = check_inputs(candidate, reference)) return fail(*err);
    double log_sum = 0.0;
    for (int order = 1; order <= n; ++order) {
        const auto o = static_cast<std::size_t>(order);
        if (candidate.size() < o) return 0.0;
        const auto cand = count_ngrams(candidate, o);
        const auto ref = count_ngrams(reference, o);
        std::size_t matched = 0;
        for (const auto& [gram, count] : cand) {
            if (auto it = ref.find(gram); it != ref.end()) matched += std::min(count, it->second);
        }
        const std::size_t total = candidate.size() - o + 1;
        const double precision = matched == 0 ? 1.0 / static_cast<double>(total + 1)
                                              : static_cast<double>(matched) / static_cast<double>(total);
        log_sum += std::log(precision);
    }
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(reference.size());
    const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::exp(log_sum / n);
}

Result<double, ScoreError> rouge_l(const TokenSequence& candidate, const TokenSequence& reference) {
    if (auto err = check_inputs(candidate, reference)) return fail(*err);
    const auto lcs = lcs_length(candidate, reference);
    if (lcs == 0) return 0.0;
    constexpr double beta2 = 1.2 * 1.2;
    const double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
    const double r = static_cast<double>(lcs) / static_cast<double>(reference.size());
    return ((1.0 + beta2) * p * r) / (r + beta2 * p);
}

MeteorAlignment meteor_align(const TokenSequence& candidate, const TokenSequence& reference) {
    std::vector<bool> used(reference.size(), false);
    MeteorAlignment out;
    std::optional<std::size_t> prev_ref;  // ref slot of candidate token i-1, if aligned
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        std::optional<std::size_t> slot;
        if (prev_ref && *prev_ref + 1 < reference.size() && !used[*prev_ref + 1] &&
            reference[*prev_ref + 1] == candidate[i]) {
            slot = *prev_ref + 1;
        } else {
            // Among free matching slots take the one starting the longest run.
            std::size_t best_run = 0;
            for (std::size_t j = 0; j < reference.size(); ++j) {
                std::size_t run = 0;
                while (i + run < candidate.size() && j + run < reference.size() && !used[j + run] &&
                       reference[j + run] == candidate[i + run]) {
                    ++run;
                }
                if (run > best_run) {
                    best_run = run;
                    slot = j;
                }
            }
        }
        if (slot) {
            used[*slot] = true;
            ++out.matches;
            if (!prev_ref || *slot != *prev_ref + 1) ++out.chunks;
        }
        prev_ref = slot;
    }
    return out;
}

Result<double, ScoreError> meteor_lite(const TokenSequence& candidate, const TokenSequence& reference) {
    if (auto err = check_inputs(candidate, reference)) return fail(*err);
    const auto a = meteor_align(candidate, reference);
    if (a.matches == 0) return 0.0;
    const double m = static_cast<double>(a.matches);
    const double p = m / static_cast<double>(candidate.size());
    const double r = m / static_cast<double>(reference.size());
    const double f_mean = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(a.chunks) / m;
    const double penalty = 0.5 * frag * frag * frag;
    return f_mean * (1.0 - penalty);
}

CaucoResult cauco_score(std::span<const CausalChain> chains, const CoherenceJudge& judge,
                        std::size_t max_inflight) {
    CaucoResult out;
    out.verdicts.resize(chains.size(), {ChainJudgement::Status::Unavailable, {}});
    if (chains.empty()) return out;

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < chains.size(); i = next++) {
            auto outcome = judge(chains[i]);
            auto& slot = out.verdicts[i];
            if (outcome) {
                slot.status = outcome->value ? ChainJudgement::Status::True : ChainJudgement::Status::False;
                slot.note = outcome->rationale.value_or("");
            } else {
                slot.status = outcome.error().kind == JudgeFailureKind::JudgeError
                                  ? ChainJudgement::Status::JudgeError
                                  : ChainJudgement::Status::Unavailable;
                slot.note = outcome.error().message;
            }
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(max_inflight, 1, chains.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
        worker();
    }

    std::size_t coherent = 0, judged = 0;
    for (const auto& v : out.verdicts) {
        switch (v.status) {
            case ChainJudgement::Status::True: ++coherent; ++judged; break;
            case ChainJudgement::Status::False: ++judged; break;
            case ChainJudgement::Status::JudgeError: ++out.excluded; break;
            case ChainJudgement::Status::Unavailable: ++out.unavailable; break;
        }
    }
    if (judged > 0) out.score = static_cast<double>(coherent) / static_cast<double>(judged);
    out.coverage = static_cast<double>(judged) / static_cast<double>(chains.size());
    return out;
}

Result<double, LengthMismatch> accuracy(std::span<const std::optional<std::size_t>> predictions,
                                        std::span<const std::size_t> gold) {
    if (predictions.size() != gold.size()) return fail(LengthMismatch{predictions.size(), gold.size()});
    if (gold.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (predictions[i] && *predictions[i] == gold[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(gold.size());
}

SampleScore score_pair(std::string id, const TokenSequence& candidate, const TokenSequence& reference) {
    SampleScore s;
    s.id = std::move(id);
    s.bleu.emplace();
    s.rouge_l = 0.0;
    s.meteor_lite = 0.0;
    if (auto err = check_inputs(candidate, reference)) {
        s.flags.emplace_back(to_string(*err));
        return s;
    }
    for (int n = 1; n <= 4; ++n) (*s.bleu)[static_cast<std::size_t>(n - 1)] = bleu_n(candidate, reference, n).value();
    s.rouge_l = rouge_l(candidate, reference).value();
    s.meteor_lite = meteor_lite(candidate, reference).value();
    return s;
}

void MetricReport::aggregate_text_metrics() {
    n_samples = per_sample.size();
    bleu.emplace();
    for (std::size_t i = 0; i < 4; ++i) (*bleu)[i] = mean(per_sample, [i](const SampleScore& s) { return s.bleu ? (*s.bleu)[i] : 0.0; });
    rouge_l = mean(per_sample, [](const SampleScore& s) { return s.rouge_l.value_or(0.0); });
    meteor_lite = mean(per_sample, [](const SampleScore& s) { return s.meteor_lite.value_or(0.0); });
}

nlohmann::ordered_json to_json(const MetricReport& report) {
    nlohmann::ordered_json j;
    for (std::size_t i = 0; i < 4; ++i) {
        j["b" + std::to_string(i + 1)] = report.bleu ? nlohmann::ordered_json((*report.bleu)[i]) : nlohmann::ordered_json(nullptr);
    }
    j["rougeL"] = nullable(report.rouge_l);
    j["meteorLite"] = nullable(report.meteor_lite);
    j["cauco"] = nullable(report.cauco);
    j["accuracy"] = nullable(report.accuracy);
    j["nSamples"] = report.n_samples;
    auto& rows = j["perSample"] = nlohmann::ordered_json::array();
    for (const auto& s : report.per_sample) {
        nlohmann::ordered_json row;
        row["id"] = s.id;
        for (std::size_t i = 0; i < 4; ++i) {
            row["b" + std::to_string(i + 1)] = s.bleu ? nlohmann::ordered_json((*s.bleu)[i]) : nlohmann::ordered_json(nullptr);
        }
        row["rougeL"] = nullable(s.rouge_l);
        row["meteorLite"] = nullable(s.meteor_lite);
        row["coherent"] = nullable(s.coherent);
        row["correct"] = nullable(s.correct);
        row["flags"] = s.flags;
        rows.push_back(std::move(row));
    }
    return j;
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
    MetricReport r;
    if (!j.at("b1").is_null()) {
        r.bleu = {j.at("b1").get<double>(), j.at("b2").get<double>(), j.at("b3").get<double>(),
                  j.at("b4").get<double>()};
    }
    r.rouge_l = optional_number<double>(j, "rougeL");
    r.meteor_lite = optional_number<double>(j, "meteorLite");
    r.cauco = optional_number<double>(j, "cauco");
    r.accuracy = optional_number<double>(j, "accuracy");
    r.n_samples = j.at("nSamples").get<std::size_t>();
    for (const auto& row : j.at("perSample")) {
        SampleScore s;
        s.id = row.at("id").get<std::string>();
        if (!row.at("b1").is_null()) {
            s.bleu = {row.at("b1").get<double>(), row.at("b2").get<double>(), row.at("b3").get<double>(),
                      row.at("b4").get<double>()};
        }
        s.rouge_l = optional_number<double>(row, "rougeL");
        s.meteor_lite = optional_number<double>(row, "meteorLite");
        s.coherent = optional_number<bool>(row, "coherent");
        s.correct = optional_number<bool>(row, "correct");
        s.flags = row.at("flags").get<std::vector<std::string>>();
        r.per_sample.push_back(std::move(s));
    }
    return r;
}

std::string render_table(const MetricReport& report) {
    auto cell = [](std::optional<double> v) {
        char buf[32];
        if (v) std::snprintf(buf, sizeof buf, "%10.4f", *v);
        else std::snprintf(buf, sizeof buf, "%10s", "-");
        return std::string(buf);
    };
    std::string out;
    out += "  samples        B1        B2        B3        B4    ROUGE-L  METEOR-l     CauCo  Accuracy\n";
    char n[16];
    std::snprintf(n, sizeof n, "%9zu", report.n_samples);
    out += n;
    for (std::size_t i = 0; i < 4; ++i) out += cell(report.bleu ? std::optional((*report.bleu)[i]) : std::nullopt);
    out += cell(report.rouge_l);
    out += cell(report.meteor_lite);
    out += cell(report.cauco);
    out += cell(report.accuracy);
    out += '\n';
    return out;
}

}  // namespace chainforge
