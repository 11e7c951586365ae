#include "chainforge/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <thread>

#include "chainforge/rng.hpp"
#include "chainforge/text.hpp"

namespace chainforge {

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    workers = std::clamp<std::size_t>(workers, 1, n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
        });
    }
}

const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::UpperBound: return "upper_bound";
        case ExperimentKind::MaskingSweep: return "masking_sweep";
        case ExperimentKind::TwoStageQA: return "two_stage_qa";
        case ExperimentKind::ChainQualityEval: return "chain_quality_eval";
    }
    return "?";
}

nlohmann::ordered_json to_json(const ExperimentSpec& spec) {
    nlohmann::ordered_json j;
    j["kind"] = to_string(spec.kind);
    j["split"] = spec.split ? nlohmann::ordered_json(to_string(*spec.split)) : nlohmann::ordered_json(nullptr);
    if (spec.kind == ExperimentKind::MaskingSweep) j["levels"] = spec.levels;
    j["seed"] = spec.seed;
    j["workers"] = spec.workers;
    return j;
}

std::optional<std::string> check_levels(const std::vector<std::size_t>& levels, std::size_t max_chain_events) {
    if (levels.empty()) return "levels must not be empty";
    for (std::size_t i = 1; i < levels.size(); ++i) {
        if (levels[i] <= levels[i - 1]) return "levels must be strictly increasing";
    }
    if (levels.back() >= max_chain_events) {
        return "level " + std::to_string(levels.back()) + " is not below the longest chain (" +
               std::to_string(max_chain_events) + " events)";
    }
    return std::nullopt;
}

std::vector<Sample> select_split(const std::vector<Sample>& samples, std::optional<Split> split) {
    if (!split) return samples;
    std::vector<Sample> out;
    std::copy_if(samples.begin(), samples.end(), std::back_inserter(out),
                 [&](const Sample& s) { return s.split == *split; });
    return out;
}

Result<MaskedChain, KTooLarge> mask_chain(const CausalChain& chain, std::size_t k, std::uint64_t seed) {
    const auto n = chain.size();
    if (k >= n) return fail(KTooLarge{k, n});
    SeededRng rng(seed);
    auto perm = rng.permutation(n);
    std::vector<std::size_t> idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(idx.begin(), idx.end());
    auto texts = chain.texts();
    for (auto i : idx) texts[i] = std::string(kMaskText);
    auto rendered = CausalChain::from_texts(texts);
    return MaskedChain{chain, std::move(idx), std::move(*rendered)};
}

Result<TwoStageAnswer, TwoStageError> two_stage_answer(const Sample& sample, ModelBackend& extractor,
                                                       ModelBackend& answerer, const PromptTemplates& t) {
    if (!sample.options) {
        return fail(TwoStageError{TwoStageError::Stage::Input, sample.id, sample.question, "sample has no options", {}, {}});
    }
    auto ex = extract_chain(extractor, t, sample.video, sample.video_surrogate, sample.question);
    if (!ex) {
        auto e = std::move(ex).error();
        return fail(TwoStageError{TwoStageError::Stage::Extract, sample.id, sample.question, e.message,
                                  std::move(e.trace.raw_outputs), std::nullopt});
    }
    auto ans = answer_question(answerer, t, sample.question, ex->chain, sample.options->options);
    if (!ans) {
        auto e = std::move(ans).error();
        return fail(TwoStageError{TwoStageError::Stage::Answer, sample.id, sample.question, e.message,
                                  std::move(e.raw_outputs), ex->chain});
    }
    return TwoStageAnswer{ex->chain, ans->index, ex->trace.raw_outputs, ans->raw_outputs};
}

nlohmann::ordered_json to_json(const QaOutcome& o) {
    nlohmann::ordered_json j;
    j["sample_id"] = o.sample_id;
    if (o.k) j["k"] = *o.k;
    if (o.excluded) {
        j["excluded"] = *o.excluded;
        return j;
    }
    j["chain"] = o.chain ? nlohmann::ordered_json(*o.chain) : nlohmann::ordered_json(nullptr);
    j["selected"] = o.selected ? nlohmann::ordered_json(*o.selected) : nlohmann::ordered_json(nullptr);
    j["gold_index"] = o.gold_index ? nlohmann::ordered_json(*o.gold_index) : nlohmann::ordered_json(nullptr);
    j["correct"] = o.selected && o.gold_index && *o.selected == *o.gold_index;
    j["raw_outputs"] = o.raw_outputs;
    if (o.error) j["error"] = *o.error;
    if (o.abstained) j["abstained"] = true;
    return j;
}

namespace {

// Accuracy over the outcomes that were not excluded.
void fill_accuracy(QaRun& run) {
    std::vector<std::optional<std::size_t>> pred;
    std::vector<std::size_t> gold;
    for (const auto& o : run.outcomes) {
        if (o.excluded) {
            ++run.excluded;
            continue;
        }
        pred.push_back(o.selected);
        gold.push_back(*o.gold_index);
        SampleScore s;
        s.id = o.sample_id;
        s.correct = o.selected && *o.selected == *o.gold_index;
        if (o.error) s.flags.push_back(*o.error);
        run.report.per_sample.push_back(std::move(s));
    }
    run.report.n_samples = gold.size();
    if (!gold.empty()) run.report.accuracy = accuracy(pred, gold).value();
}

QaOutcome answer_from_chain(const Sample& s, const CausalChain& chain, ModelBackend& answerer,
                            const PromptTemplates& t) {
    QaOutcome o;
    o.sample_id = s.id;
    o.chain = serialize_chain(chain);
    o.gold_index = s.options->gold_index;
    auto ans = answer_question(answerer, t, s.question, chain, s.options->options);
    if (ans) {
        o.selected = ans->index;
        o.raw_outputs = std::move(ans->raw_outputs);
    } else {
        auto e = std::move(ans).error();
        o.error = "answer: " + e.message;
        o.abstained = e.kind == AnswerError::Kind::Parse;
        o.raw_outputs = std::move(e.raw_outputs);
    }
    return o;
}

}  // namespace

QaRun run_two_stage_qa(const std::vector<Sample>& samples, ModelBackend& extractor, ModelBackend& answerer,
                       const PromptTemplates& t, std::size_t workers) {
    QaRun run;
    run.outcomes.resize(samples.size());
    parallel_for(samples.size(), workers, [&](std::size_t i) {
        const auto& s = samples[i];
        auto& o = run.outcomes[i];
        o.sample_id = s.id;
        if (!s.options) {
            o.excluded = "missing_options";
            return;
        }
        o.gold_index = s.options->gold_index;
        auto r = two_stage_answer(s, extractor, answerer, t);
        if (r) {
            o.chain = serialize_chain(r->chain);
            o.selected = r->selected;
            o.raw_outputs = r->extractor_outputs;
            o.raw_outputs.insert(o.raw_outputs.end(), r->answerer_outputs.begin(), r->answerer_outputs.end());
        } else {
            auto e = std::move(r).error();
            if (e.chain) o.chain = serialize_chain(*e.chain);
            o.error = std::string(e.stage == TwoStageError::Stage::Extract ? "extract: " : "answer: ") + e.message;
            o.raw_outputs = std::move(e.raw_outputs);
        }
    });
    fill_accuracy(run);
    return run;
}

QaRun run_upper_bound(const std::vector<Sample>& samples, ModelBackend& answerer, const PromptTemplates& t,
                      std::size_t workers) {
    QaRun run;
    run.outcomes.resize(samples.size());
    parallel_for(samples.size(), workers, [&](std::size_t i) {
        const auto& s = samples[i];
        if (!s.gold_chain || !s.options) {
            run.outcomes[i].sample_id = s.id;
            run.outcomes[i].excluded = s.gold_chain ? "missing_options" : "missing_gold_chain";
        } else {
            run.outcomes[i] = answer_from_chain(s, *s.gold_chain, answerer, t);
        }
    });
    fill_accuracy(run);
    return run;
}

Result<SweepRun, std::string> run_masking_sweep(const std::vector<Sample>& samples, ModelBackend& answerer,
                                                const PromptTemplates& t, const std::vector<std::size_t>& levels,
                                                std::uint64_t seed, std::size_t workers) {
    std::size_t longest = 0;
    for (const auto& s : samples) {
        if (s.gold_chain) longest = std::max(longest, s.gold_chain->size());
    }
    if (auto err = check_levels(levels, longest)) return fail(std::move(*err));

    SweepRun run;
    for (const auto& s : samples) {
        if (!s.gold_chain || !s.options) ++run.excluded;
    }
    for (auto k : levels) {
        std::vector<QaOutcome> level(samples.size());
        parallel_for(samples.size(), workers, [&](std::size_t i) {
            const auto& s = samples[i];
            auto& o = level[i];
            if (!s.gold_chain || !s.options) {
                o.sample_id = s.id;
                o.excluded = s.gold_chain ? "missing_options" : "missing_gold_chain";
            } else if (auto m = mask_chain(*s.gold_chain, k, seed ^ static_cast<std::uint64_t>(i)); !m) {
                o.sample_id = s.id;
                o.excluded = "chain_too_short";
            } else {
                o = answer_from_chain(s, m->rendered, answerer, t);
            }
            o.k = k;
        });
        SweepPoint p;
        p.k = k;
        std::vector<std::optional<std::size_t>> pred;
        std::vector<std::size_t> gold;
        for (const auto& o : level) {
            if (o.excluded) {
                if (*o.excluded == "chain_too_short") ++p.skipped;
                continue;
            }
            pred.push_back(o.selected);
            gold.push_back(*o.gold_index);
        }
        p.n = gold.size();
        if (!gold.empty()) p.accuracy = accuracy(pred, gold).value();
        run.points.push_back(p);
        std::move(level.begin(), level.end(), std::back_inserter(run.outcomes));
    }
    return run;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
    std::ostringstream out;
    out.precision(15);
    out << "k,n,accuracy\n";
    for (const auto& p : points) {
        out << p.k << ',' << p.n << ',';
        if (p.accuracy) out << *p.accuracy;
        out << '\n';
    }
    return out.str();
}

QualityRun run_chain_quality_eval(const std::vector<Sample>& samples, ModelBackend& extractor, ModelBackend& judge,
                                  const PromptTemplates& t, std::size_t workers) {
    struct Slot {
        std::optional<Extraction> extraction;
        std::optional<std::string> error;
        std::vector<std::string> raw;
    };
    std::vector<Slot> slots(samples.size());
    parallel_for(samples.size(), workers, [&](std::size_t i) {
        const auto& s = samples[i];
        if (!s.gold_chain) return;
        auto ex = extract_chain(extractor, t, s.video, s.video_surrogate, s.question);
        if (ex) {
            slots[i].raw = ex->trace.raw_outputs;
            slots[i].extraction = std::move(*ex);
        } else {
            auto e = std::move(ex).error();
            slots[i].error = std::string(e.kind == ExtractError::Kind::ChainFormat ? "extract_format" : "extract_backend");
            slots[i].raw = std::move(e.trace.raw_outputs);
        }
    });

    std::vector<CausalChain> candidates;
    std::vector<std::size_t> owner;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (slots[i].extraction) {
            candidates.push_back(slots[i].extraction->chain);
            owner.push_back(i);
        }
    }
    QualityRun run;
    run.cauco = cauco_score(candidates, make_judge(judge, t), workers);
    std::vector<std::optional<ChainJudgement>> verdict(samples.size());
    for (std::size_t c = 0; c < owner.size(); ++c) verdict[owner[c]] = run.cauco.verdicts[c];

    std::size_t coherent = 0, judged = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        nlohmann::ordered_json row;
        row["sample_id"] = s.id;
        if (!s.gold_chain) {
            ++run.excluded;
            row["excluded"] = "missing_gold_chain";
            run.rows.push_back(std::move(row));
            continue;
        }
        const auto& slot = slots[i];
        SampleScore score = slot.extraction
                                ? score_pair(s.id, chain_tokens(slot.extraction->chain), chain_tokens(*s.gold_chain))
                                : score_pair(s.id, {}, chain_tokens(*s.gold_chain));
        if (slot.error) {
            score.flags = {*slot.error};
            score.coherent = false;
            ++judged;
        } else if (verdict[i]) {
            switch (verdict[i]->status) {
                case ChainJudgement::Status::True:
                    score.coherent = true;
                    ++coherent;
                    ++judged;
                    break;
                case ChainJudgement::Status::False:
                    score.coherent = false;
                    ++judged;
                    break;
                case ChainJudgement::Status::JudgeError: score.flags.emplace_back("judge_error"); break;
                case ChainJudgement::Status::Unavailable: score.flags.emplace_back("judge_unavailable"); break;
            }
        }
        row["chain"] = slot.extraction ? nlohmann::ordered_json(serialize_chain(slot.extraction->chain))
                                       : nlohmann::ordered_json(nullptr);
        row["gold_chain"] = serialize_chain(*s.gold_chain);
        row["raw_outputs"] = slot.raw;
        row["coherent"] = score.coherent ? nlohmann::ordered_json(*score.coherent) : nlohmann::ordered_json(nullptr);
        row["flags"] = score.flags;
        run.rows.push_back(std::move(row));
        run.report.per_sample.push_back(std::move(score));
    }
    run.report.n_samples = run.report.per_sample.size();
    if (!run.report.per_sample.empty()) run.report.aggregate_text_metrics();
    if (judged > 0) run.report.cauco = static_cast<double>(coherent) / static_cast<double>(judged);
    return run;
}

}  // namespace chainforge
