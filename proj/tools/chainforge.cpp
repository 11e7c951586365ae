// chainforge command line: corpus checks, chain construction, perturbation,
// experiments and the review service.
//
// Exit codes: 0 success, 1 per-record failures, 2 usage or configuration
// errors.

#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "chainforge/clock.hpp"
#include "chainforge/config.hpp"
#include "chainforge/datastore.hpp"
#include "chainforge/experiments.hpp"
#include "chainforge/perturb.hpp"
#include "chainforge/pipeline.hpp"
#include "chainforge/review_queue.hpp"
#include "chainforge/review_service.hpp"
#include "chainforge/rng.hpp"
#include "chainforge/roles.hpp"

namespace fs = std::filesystem;
using namespace chainforge;

namespace {

constexpr int kOk = 0;
constexpr int kRecordFailures = 1;
constexpr int kUsage = 2;

struct UsageError {
    std::string message;
};

struct Options {
    std::string config = "chainforge.toml";
    std::string run_id;
    std::string in;
    std::string dataset;
    std::string split;
    std::string out;
    std::size_t workers = 0;
    std::uint64_t seed = 0;
    std::size_t count = 3;
    std::size_t n = 1000;
    std::string levels = "0,1,2,3";
    std::string strategies;
    int port = 8080;
    std::string host = "127.0.0.1";
};

GlobalConfig load_cfg(const Options& o) {
    auto c = load_config(o.config);
    if (!c) throw UsageError{c.error()};
    return std::move(c).value();
}

std::optional<Split> split_opt(const Options& o) {
    if (o.split.empty()) return std::nullopt;
    auto s = split_from_string(o.split);
    if (!s) throw UsageError{"--split must be train, val or test, got \"" + o.split + "\""};
    return s;
}

struct Corpus {
    std::vector<Sample> samples;
    std::vector<SchemaViolation> errors;
    std::size_t lines = 0;
};

Corpus load_corpus(const Options& o) {
    if (o.in.empty()) throw UsageError{"--in is required"};
    auto r = load_samples(o.in, o.dataset);
    if (!r) throw UsageError{"cannot read " + r.error().path + ": " + r.error().message};
    for (const auto& e : r->errors) {
        std::cerr << o.in << ":" << e.line << ": " << e.field << ": " << e.reason << "\n";
    }
    return {select_split(r->samples, split_opt(o)), r->errors, r->lines_read};
}

PromptTemplates templates_for(const GlobalConfig& c) {
    auto t = PromptTemplates::defaults();
    if (c.paths.prompts_dir) {
        if (auto err = t.load_dir(*c.paths.prompts_dir)) throw UsageError{*err};
    }
    return t;
}

std::unique_ptr<ModelBackend> backend_for(const GlobalConfig& c, BackendRole role, const std::vector<Sample>& corpus) {
    auto b = make_backend(c, role, corpus);
    if (!b) throw UsageError{b.error()};
    return std::move(b).value();
}

std::vector<std::size_t> parse_levels(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream in(text);
    for (std::string part; std::getline(in, part, ',');) {
        part = std::string(trim(part));
        if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos) {
            throw UsageError{"--levels must be a comma-separated list of non-negative integers"};
        }
        out.push_back(std::stoull(part));
    }
    if (auto err = check_levels(out, SIZE_MAX)) throw UsageError{*err};
    return out;
}

std::size_t workers_for(const Options& o, const GlobalConfig& c) {
    return o.workers ? o.workers : c.pipeline.worker_pool_size;
}

// One directory per invocation under runs_dir.
class RunDir {
  public:
    RunDir(const GlobalConfig& c, const Options& o, const std::string& command, nlohmann::ordered_json spec) {
        auto id = o.run_id;
        if (id.empty()) {
            id = utc_timestamp();
            std::erase(id, ':');
            std::erase(id, '-');
            id += "-" + command;
        }
        if (id.find('/') != std::string::npos || id == "." || id == "..") {
            throw UsageError{"--run-id must be a plain directory name"};
        }
        dir_ = c.paths.runs_dir / id;
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw UsageError{"cannot create run directory " + dir_.string() + ": " + ec.message()};
        nlohmann::ordered_json run;
        run["run_id"] = id;
        run["command"] = command;
        run["created_at"] = utc_timestamp();
        run["input"] = o.in;
        run["spec"] = std::move(spec);
        run["config"] = to_json(c);
        write("run.json", run.dump(2) + "\n");
    }

    void write(const std::string& name, const std::string& content) const {
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    }

    template <typename Rows>
    void write_jsonl(const std::string& name, const Rows& rows) const {
        std::string s;
        for (const auto& r : rows) s += nlohmann::ordered_json(r).dump() + "\n";
        write(name, s);
    }

    const fs::path& path() const { return dir_; }

  private:
    fs::path dir_;
};

int finish_qa(const RunDir& run, const QaRun& r, const std::string& label) {
    std::vector<nlohmann::ordered_json> rows;
    for (const auto& o : r.outcomes) rows.push_back(to_json(o));
    run.write_jsonl("records.jsonl", rows);
    run.write("report.json", to_json(r.report).dump(2) + "\n");
    std::cout << render_table(r.report);
    std::size_t errors = 0;
    for (const auto& o : r.outcomes) errors += o.error ? 1 : 0;
    std::cout << label << ": " << r.report.n_samples << " answered, " << r.excluded << " excluded, " << errors
              << " errors\nrun: " << run.path().string() << "\n";
    return errors ? kRecordFailures : kOk;
}

// Blocks SIGINT/SIGTERM in every thread and calls `stop` when one arrives.
// SIGUSR1 only wakes the waiter for shutdown.
class SignalStop {
  public:
    explicit SignalStop(std::function<void()> stop) {
        sigemptyset(&set_);
        sigaddset(&set_, SIGINT);
        sigaddset(&set_, SIGTERM);
        sigaddset(&set_, SIGUSR1);
        pthread_sigmask(SIG_BLOCK, &set_, nullptr);
        thread_ = std::thread([this, stop = std::move(stop)] {
            int sig = 0;
            sigwait(&set_, &sig);
            if (sig != SIGUSR1) stop();
        });
    }
    ~SignalStop() {
        pthread_kill(thread_.native_handle(), SIGUSR1);
        thread_.join();
    }

  private:
    sigset_t set_;
    std::thread thread_;
};

// --- commands ---------------------------------------------------------------

int cmd_validate(const Options& o) {
    GlobalConfig c;
    if (fs::exists(o.config)) c = load_cfg(o);
    auto corpus = load_corpus(o);
    std::size_t passed = 0, failed = corpus.errors.size();
    for (const auto& s : corpus.samples) {
        if (!s.gold_chain) {
            ++passed;
            continue;
        }
        auto report = validate_chain(serialize_chain(*s.gold_chain), c.validation);
        report.merge(validate_against_qa(*s.gold_chain, s.question, s.gold_answer, c.validation));
        if (report.passed()) {
            ++passed;
            continue;
        }
        ++failed;
        for (const auto& v : report.violations) std::cerr << s.id << ": " << v.rule_id << ": " << v.detail << "\n";
    }
    std::cout << passed << " passed, " << failed << " failed\n";
    return failed ? kRecordFailures : kOk;
}

int cmd_stats(const Options& o) {
    auto corpus = load_corpus(o);
    auto j = to_json(corpus_stats(corpus.samples));
    j["lines_read"] = corpus.lines;
    j["schema_errors"] = corpus.errors.size();
    std::cout << j.dump(2) << "\n";
    return corpus.errors.empty() ? kOk : kRecordFailures;
}

int cmd_sample_audit(const Options& o) {
    if (o.out.empty()) throw UsageError{"--out is required"};
    auto corpus = load_corpus(o);
    auto subset = sample_audit(corpus.samples, o.n, o.seed);
    if (auto err = write_jsonl(o.out, subset)) {
        std::cerr << *err << "\n";
        return kRecordFailures;
    }
    std::cout << subset.size() << " of " << corpus.samples.size() << " samples written to " << o.out << "\n";
    return corpus.errors.empty() ? kOk : kRecordFailures;
}

int cmd_perturb(const Options& o) {
    if (o.out.empty()) throw UsageError{"--out is required"};
    GlobalConfig c;
    if (fs::exists(o.config)) c = load_cfg(o);
    std::vector<std::string> actors;
    std::map<std::string, std::string> antonyms;
    if (c.actors_lexicon) {
        auto a = Lexicons::read_actors(*c.actors_lexicon);
        if (!a) throw UsageError{a.error()};
        actors = std::move(a).value();
    }
    if (c.antonyms_lexicon) {
        auto a = Lexicons::read_antonyms(*c.antonyms_lexicon);
        if (!a) throw UsageError{a.error()};
        antonyms = std::move(a).value();
    }
    auto lex = Lexicons::make(std::move(actors), std::move(antonyms));
    if (!lex) throw UsageError{lex.error()};
    std::vector<PerturbStrategy> only;
    if (!o.strategies.empty()) {
        std::stringstream in(o.strategies);
        for (std::string part; std::getline(in, part, ',');) {
            auto s = strategy_from_string(trim(part));
            if (!s) throw UsageError{"unknown strategy \"" + part + "\""};
            only.push_back(*s);
        }
    }

    auto corpus = load_corpus(o);
    std::ofstream out(o.out, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError{"cannot write " + o.out};
    std::size_t written = 0, failures = corpus.errors.size(), shortfall = 0;
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
        const auto& s = corpus.samples[i];
        if (!s.gold_chain) continue;
        const auto seed = o.seed ^ static_cast<std::uint64_t>(i);
        std::vector<PerturbedChain> negs;
        if (only.empty()) {
            auto r = generate_negatives(*s.gold_chain, o.count, seed, *lex);
            if (!r) {
                std::cerr << s.id << ": " << r.error().reason << "\n";
                ++failures;
                continue;
            }
            shortfall += r->shortfall;
            negs = std::move(r->negatives);
        } else {
            for (std::size_t k = 0; k < only.size(); ++k) {
                auto r = perturb(*s.gold_chain, only[k], mix_seed(seed + k), *lex);
                if (r) {
                    negs.push_back(std::move(r).value());
                } else {
                    std::cerr << s.id << ": " << to_string(only[k]) << " not applicable: " << r.error().reason << "\n";
                }
            }
        }
        for (const auto& n : negs) {
            nlohmann::ordered_json j;
            j["sample_id"] = s.id;
            j["label"] = false;
            j["strategy"] = to_string(n.strategy);
            j["seed"] = n.seed;
            j["original"] = serialize_chain(n.original);
            j["chain"] = serialize_chain(n.result);
            j["details"] = n.details;
            out << j.dump() << "\n";
            ++written;
        }
    }
    std::cout << written << " negatives written, " << shortfall << " short, " << failures << " failed\n";
    return failures ? kRecordFailures : kOk;
}

int cmd_generate(const Options& o) {
    auto c = load_cfg(o);
    if (auto e = c.require_roles({BackendRole::Generator, BackendRole::Verifier})) throw UsageError{*e};
    auto corpus = load_corpus(o);
    auto t = templates_for(c);
    auto gen = backend_for(c, BackendRole::Generator, corpus.samples);
    auto ver = backend_for(c, BackendRole::Verifier, corpus.samples);
    auto pc = c.pipeline;
    if (o.workers) pc.worker_pool_size = o.workers;

    nlohmann::ordered_json spec{{"kind", "construct_chains"},
                                {"max_attempts", pc.max_attempts},
                                {"worker_pool_size", pc.worker_pool_size},
                                {"human_stage",
                                 pc.human_stage == HumanStageMode::Queue         ? "queue"
                                 : pc.human_stage == HumanStageMode::AutoApprove ? "auto_approve"
                                                                                 : "disabled"}};
    RunDir run(c, o, "generate", spec);
    pc.item_prefix = run.path().filename().string() + ":";

    std::unique_ptr<ReviewQueue> queue;
    std::unique_ptr<ReviewService> service;
    std::thread server;
    if (pc.human_stage == HumanStageMode::Queue) {
        auto q = ReviewQueue::open(c.paths.queue_log, c.validation);
        if (!q) throw UsageError{q.error()};
        queue = std::move(q).value();
        service = std::make_unique<ReviewService>(*queue, c.validation);
        server = std::thread([&] {
            if (!service->listen(o.host, o.port)) std::cerr << "review service: cannot bind port " << o.port << "\n";
        });
        std::cout << "review service on http://" << o.host << ":" << o.port << "\n";
    }

    std::vector<ConstructionRecord> records;
    try {
        records = construct_chains(corpus.samples, {gen.get(), ver.get(), queue.get()}, t, c.validation, pc);
    } catch (...) {
        if (service) service->stop();
        if (server.joinable()) server.join();
        throw;
    }
    if (service) service->stop();
    if (server.joinable()) server.join();

    std::vector<nlohmann::ordered_json> rows;
    std::size_t chains = 0, attempts = 0;
    std::vector<Sample> augmented;
    for (std::size_t i = 0; i < records.size(); ++i) {
        rows.push_back(to_json(records[i]));
        attempts += records[i].attempts.size();
        if (records[i].final_chain) {
            ++chains;
            augmented.push_back(corpus.samples[i]);
            augmented.back().gold_chain = records[i].final_chain;
        }
    }
    run.write_jsonl("records.jsonl", rows);
    nlohmann::ordered_json report{{"nSamples", records.size()},
                                  {"chains", chains},
                                  {"exhausted", records.size() - chains},
                                  {"attempts", attempts},
                                  {"schemaErrors", corpus.errors.size()}};
    run.write("report.json", report.dump(2) + "\n");

    int rc = (chains == records.size() && corpus.errors.empty()) ? kOk : kRecordFailures;
    if (!o.out.empty()) {
        auto w = write_augmented(o.out, augmented, c.validation);
        if (!w) {
            std::cerr << "write " << o.out << ": " << w.error().record_id << " " << w.error().message << "\n";
            rc = kRecordFailures;
        }
    }
    std::cout << chains << " chains, " << records.size() - chains << " exhausted, " << attempts
              << " attempts\nrun: " << run.path().string() << "\n";
    return rc;
}

int cmd_qa(const Options& o) {
    auto c = load_cfg(o);
    if (auto e = c.require_roles({BackendRole::Extractor, BackendRole::Answerer})) throw UsageError{*e};
    auto corpus = load_corpus(o);
    auto t = templates_for(c);
    auto ex = backend_for(c, BackendRole::Extractor, corpus.samples);
    auto an = backend_for(c, BackendRole::Answerer, corpus.samples);
    ExperimentSpec spec{ExperimentKind::TwoStageQA, split_opt(o), {}, o.seed, workers_for(o, c)};
    RunDir run(c, o, "qa", to_json(spec));
    auto r = run_two_stage_qa(corpus.samples, *ex, *an, t, spec.workers);
    return std::max(finish_qa(run, r, "qa"), corpus.errors.empty() ? kOk : kRecordFailures);
}

int cmd_upper_bound(const Options& o) {
    auto c = load_cfg(o);
    if (auto e = c.require_roles({BackendRole::Answerer})) throw UsageError{*e};
    auto corpus = load_corpus(o);
    auto t = templates_for(c);
    auto an = backend_for(c, BackendRole::Answerer, corpus.samples);
    ExperimentSpec spec{ExperimentKind::UpperBound, split_opt(o), {}, o.seed, workers_for(o, c)};
    RunDir run(c, o, "upper-bound", to_json(spec));
    auto r = run_upper_bound(corpus.samples, *an, t, spec.workers);
    return std::max(finish_qa(run, r, "upper-bound"), corpus.errors.empty() ? kOk : kRecordFailures);
}

int cmd_mask_sweep(const Options& o) {
    const auto levels = parse_levels(o.levels);
    auto c = load_cfg(o);
    if (auto e = c.require_roles({BackendRole::Answerer})) throw UsageError{*e};
    auto corpus = load_corpus(o);
    std::size_t longest = 0;
    for (const auto& s : corpus.samples) {
        if (s.gold_chain) longest = std::max(longest, s.gold_chain->size());
    }
    if (auto err = check_levels(levels, longest)) throw UsageError{*err};
    auto t = templates_for(c);
    auto an = backend_for(c, BackendRole::Answerer, corpus.samples);
    ExperimentSpec spec{ExperimentKind::MaskingSweep, split_opt(o), levels, o.seed, workers_for(o, c)};
    RunDir run(c, o, "mask-sweep", to_json(spec));
    auto r = run_masking_sweep(corpus.samples, *an, t, levels, o.seed, spec.workers);
    if (!r) throw UsageError{r.error()};

    std::vector<nlohmann::ordered_json> rows;
    for (const auto& x : r->outcomes) rows.push_back(to_json(x));
    run.write_jsonl("records.jsonl", rows);
    run.write("sweep.csv", sweep_csv(r->points));
    nlohmann::ordered_json report;
    report["nSamples"] = corpus.samples.size() - r->excluded;
    report["excluded"] = r->excluded;
    report["sweep"] = nlohmann::ordered_json::array();
    for (const auto& p : r->points) {
        report["sweep"].push_back({{"k", p.k},
                                   {"n", p.n},
                                   {"skipped", p.skipped},
                                   {"accuracy", p.accuracy ? nlohmann::ordered_json(*p.accuracy)
                                                           : nlohmann::ordered_json(nullptr)}});
    }
    run.write("report.json", report.dump(2) + "\n");
    std::cout << sweep_csv(r->points) << "run: " << run.path().string() << "\n";
    std::size_t errors = 0;
    for (const auto& x : r->outcomes) errors += (x.error && !x.abstained) ? 1 : 0;
    return (errors || !corpus.errors.empty()) ? kRecordFailures : kOk;
}

int cmd_evaluate(const Options& o) {
    auto c = load_cfg(o);
    if (auto e = c.require_roles({BackendRole::Extractor, BackendRole::Judge})) throw UsageError{*e};
    auto corpus = load_corpus(o);
    auto t = templates_for(c);
    auto ex = backend_for(c, BackendRole::Extractor, corpus.samples);
    auto judge = backend_for(c, BackendRole::Judge, corpus.samples);
    ExperimentSpec spec{ExperimentKind::ChainQualityEval, split_opt(o), {}, o.seed, workers_for(o, c)};
    RunDir run(c, o, "evaluate", to_json(spec));
    auto r = run_chain_quality_eval(corpus.samples, *ex, *judge, t, spec.workers);
    run.write_jsonl("records.jsonl", r.rows);
    auto report = to_json(r.report);
    report["caucoCoverage"] = r.cauco.coverage;
    report["judgeErrors"] = r.cauco.excluded;
    report["judgeUnavailable"] = r.cauco.unavailable;
    run.write("report.json", report.dump(2) + "\n");
    std::cout << render_table(r.report) << "run: " << run.path().string() << "\n";
    std::size_t flagged = 0;
    for (const auto& s : r.report.per_sample) flagged += s.flags.empty() ? 0 : 1;
    return (flagged || !corpus.errors.empty()) ? kRecordFailures : kOk;
}

int cmd_review_serve(const Options& o) {
    auto c = load_cfg(o);
    auto q = ReviewQueue::open(c.paths.queue_log, c.validation);
    if (!q) throw UsageError{q.error()};
    auto queue = std::move(q).value();
    ReviewService service(*queue, c.validation);
    SignalStop stopper([&] { service.stop(); });
    std::cout << "review service on http://" << o.host << ":" << o.port << " (queue " << c.paths.queue_log.string()
              << ", " << queue->replayed_events() << " events replayed)" << std::endl;
    if (!service.listen(o.host, o.port)) {
        std::cerr << "cannot bind " << o.host << ":" << o.port << "\n";
        return kUsage;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chainforge: causal chain construction, validation and evaluation"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub, bool needs_in = true) {
        sub->add_option("--config", o.config, "Config file")->capture_default_str();
        if (needs_in) {
            sub->add_option("--in", o.in, "Input corpus (JSONL)")->required();
            sub->add_option("--dataset", o.dataset, "Only accept records from this dataset");
            sub->add_option("--split", o.split, "Restrict to train, val or test");
        }
    };
    auto runnable = [&](CLI::App* sub) {
        sub->add_option("--run-id", o.run_id, "Run directory name under runs_dir");
        sub->add_option("--workers", o.workers, "Worker threads (default: pipeline.worker_pool_size)");
    };

    auto* generate = app.add_subcommand("generate", "Construct chains: generate, validate, verify, review");
    common(generate);
    runnable(generate);
    generate->add_option("--out", o.out, "Also write the chain-augmented corpus here");
    generate->add_option("--review-port", o.port, "Review service port when the human stage is enabled")
        ->capture_default_str();
    generate->add_option("--host", o.host, "Review service bind address")->capture_default_str();

    auto* validate = app.add_subcommand("validate", "Check records and their gold chains");
    common(validate);

    auto* perturb_cmd = app.add_subcommand("perturb", "Emit perturbed negatives of every gold chain");
    common(perturb_cmd);
    perturb_cmd->add_option("--out", o.out, "Output JSONL")->required();
    perturb_cmd->add_option("--count", o.count, "Negatives per chain")->capture_default_str();
    perturb_cmd->add_option("--seed", o.seed, "Seed")->capture_default_str();
    perturb_cmd->add_option("--strategies", o.strategies, "Comma-separated strategies, one negative each");

    auto* evaluate = app.add_subcommand("evaluate", "Score extracted chains against gold chains");
    common(evaluate);
    runnable(evaluate);

    auto* qa = app.add_subcommand("qa", "Two-stage QA: extract a chain, then answer from it");
    common(qa);
    runnable(qa);

    auto* upper = app.add_subcommand("upper-bound", "Answer from gold chains");
    common(upper);
    runnable(upper);

    auto* sweep = app.add_subcommand("mask-sweep", "Answer from gold chains with k events masked");
    common(sweep);
    runnable(sweep);
    sweep->add_option("--levels", o.levels, "Strictly increasing masking levels")->capture_default_str();
    sweep->add_option("--seed", o.seed, "Seed")->capture_default_str();

    auto* stats = app.add_subcommand("stats", "Corpus statistics");
    common(stats);

    auto* review = app.add_subcommand("review", "Review queue");
    review->require_subcommand(1);
    auto* serve = review->add_subcommand("serve", "Serve the review HTTP API");
    common(serve, false);
    serve->add_option("--port", o.port, "Port")->capture_default_str();
    serve->add_option("--host", o.host, "Bind address")->capture_default_str();

    auto* audit = app.add_subcommand("sample-audit", "Seeded random subset for manual review");
    common(audit);
    audit->add_option("--n", o.n, "Subset size")->capture_default_str();
    audit->add_option("--seed", o.seed, "Seed")->capture_default_str();
    audit->add_option("--out", o.out, "Output JSONL")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*generate) return cmd_generate(o);
        if (*validate) return cmd_validate(o);
        if (*perturb_cmd) return cmd_perturb(o);
        if (*evaluate) return cmd_evaluate(o);
        if (*qa) return cmd_qa(o);
        if (*upper) return cmd_upper_bound(o);
        if (*sweep) return cmd_mask_sweep(o);
        if (*stats) return cmd_stats(o);
        if (*serve) return cmd_review_serve(o);
        if (*audit) return cmd_sample_audit(o);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.message << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRecordFailures;
    }
    return kUsage;
}
