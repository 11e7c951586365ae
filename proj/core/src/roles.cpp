#include "chainforge/roles.hpp"

#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "chainforge/text.hpp"

namespace chainforge {

namespace {

// Reconstructed from the construction procedure's description; the original
// prompt wording is not available. Edit the files under prompts/ to tune.
constexpr std::string_view kGeneratorTemplate =
    "You are given a question about a video and its correct answer. Write the causal chain of events "
    "that leads from the situation in the video to the answer.\n"
    "Rules:\n"
    "- Output only the chain, in the format [Event A] -> [Event B] -> [Event C].\n"
    "- Use between 2 and 10 events; each event is one short sentence.\n"
    "- Each event must cause or enable the next one, and the last event must support the answer.\n"
    "\nQuestion: {{question}}\nAnswer: {{answer}}\n{{feedback}}";

constexpr std::string_view kVerifierTemplate =
    "You are reviewing a causal chain written for a video question. Assess its logical coherence, its "
    "relevance to the question, and its consistency with the correct answer.\n"
    "Reply with ACCEPT if the chain is acceptable, otherwise REJECT: followed by a short reason.\n"
    "\nQuestion: {{question}}\nCorrect answer: {{answer}}\nCausal chain: {{chain}}";

constexpr std::string_view kExtractorTemplate =
    "Watch the video and read the question. Describe the causal chain of events in the video that is "
    "needed to answer the question.\n"
    "Output only the chain, in the format [Event A] -> [Event B] -> [Event C].\n"
    "\nVideo: {{surrogate}}\nQuestion: {{question}}";

constexpr std::string_view kAnswererTemplate =
    "Answer the multiple-choice question using the causal chain of events observed in the video.\n"
    "Reply with the letter of the correct option only.\n"
    "\nCausal chain: {{chain}}\nQuestion: {{question}}\nOptions:\n{{options}}";

constexpr std::string_view kJudgeTemplate =
    "Decide whether the following causal chain is causally coherent, i.e. each event is logically "
    "connected to the next by cause and effect.\n"
    "Reply with True or False only.\n"
    "\nCausal chain: {{chain}}";

constexpr std::string_view kFormatReminder =
    "\n\nYour previous reply did not follow the required format. Reply with the chain only, exactly as "
    "[Event A] -> [Event B] -> [Event C].";
constexpr std::string_view kLetterReminder =
    "\n\nYour previous reply did not name exactly one option. Reply with a single option letter.";
constexpr std::string_view kVerdictReminder = "\n\nReply with exactly one word: True or False.";
constexpr std::string_view kVerifierReminder =
    "\n\nReply with exactly ACCEPT, or REJECT: followed by a short reason.";

std::string lower(std::string_view s) { return ascii_lower(s); }

bool is_bare_letter(std::string_view tok) { return tok.size() == 1 && tok[0] >= 'A' && tok[0] <= 'Z'; }

// Letter in a token shaped X, (X), X., X), X:, X, (also with a trailing
// punctuation mark after the closing paren).
std::optional<char> letter_token(std::string_view tok) {
    static const std::regex re(R"(^\(?([A-Z])\)?[.:,;!]?$)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(tok.begin(), tok.end(), m, re)) return std::nullopt;
    return m[1].str()[0];
}

}  // namespace

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates t;
    t.templates_[BackendRole::Generator] = std::string(kGeneratorTemplate);
    t.templates_[BackendRole::Verifier] = std::string(kVerifierTemplate);
    t.templates_[BackendRole::Extractor] = std::string(kExtractorTemplate);
    t.templates_[BackendRole::Answerer] = std::string(kAnswererTemplate);
    t.templates_[BackendRole::Judge] = std::string(kJudgeTemplate);
    return t;
}

std::optional<std::string> PromptTemplates::load_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) return "prompt directory not found: " + dir.string();
    for (auto role : {BackendRole::Generator, BackendRole::Verifier, BackendRole::Extractor, BackendRole::Answerer,
                      BackendRole::Judge}) {
        const auto file = dir / (std::string(to_string(role)) + ".txt");
        if (!std::filesystem::exists(file)) continue;
        std::ifstream in(file);
        if (!in) return "cannot read " + file.string();
        std::ostringstream ss;
        ss << in.rdbuf();
        templates_[role] = ss.str();
    }
    return std::nullopt;
}

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) break;
        const auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        out.append(tmpl.substr(pos, open - pos));
        const std::string name(tmpl.substr(open + 2, close - open - 2));
        if (auto it = values.find(name); it != values.end()) {
            out += it->second;
        } else {
            out.append(tmpl.substr(open, close + 2 - open));
        }
        pos = close + 2;
    }
    out.append(tmpl.substr(pos));
    return out;
}

ModelRequest generator_request(const PromptTemplates& t, std::string_view question, std::string_view answer,
                               const std::vector<std::string>& feedback) {
    std::string fb;
    if (!feedback.empty()) {
        fb = "\nEarlier attempts were rejected for these reasons; avoid repeating them:\n";
        for (const auto& f : feedback) fb += "- " + f + "\n";
    }
    ModelRequest r;
    r.role = BackendRole::Generator;
    r.instruction = fill_template(t.get(BackendRole::Generator), {{"question", std::string(question)},
                                                                  {"answer", std::string(answer)},
                                                                  {"feedback", fb}});
    r.context = {{BlockKind::Question, std::string(question)}, {BlockKind::Answer, std::string(answer)}};
    return r;
}

Result<Extraction, ExtractError> extract_chain(ModelBackend& backend, const PromptTemplates& t,
                                               const VideoRef& video, const std::optional<std::string>& surrogate,
                                               std::string_view question) {
    ModelRequest r;
    r.role = BackendRole::Extractor;
    const std::string video_text = surrogate ? *surrogate : video.uri;
    r.instruction = fill_template(t.get(BackendRole::Extractor),
                                  {{"question", std::string(question)}, {"surrogate", video_text}});
    r.context.push_back({BlockKind::Question, std::string(question)});
    if (surrogate) {
        r.context.push_back({BlockKind::VideoSurrogate, *surrogate});
    } else if (!video.uri.empty()) {
        r.media.push_back(video.uri);
    }

    ExtractTrace trace;
    for (int round = 0; round < 2; ++round) {
        if (round == 1) r.instruction += kFormatReminder;
        auto res = backend.invoke(r);
        if (!res) {
            auto err = std::move(res).error();
            return fail(ExtractError{ExtractError::Kind::Backend, err.message, std::move(err), std::move(trace)});
        }
        trace.raw_outputs.push_back(res->text);
        auto chain = parse_chain(res->text);
        if (chain) return Extraction{std::move(chain).value(), std::move(trace)};
    }
    return fail(ExtractError{ExtractError::Kind::ChainFormat, "extractor output is not a valid chain after reprompt",
                             std::nullopt, std::move(trace)});
}

std::optional<std::size_t> parse_answer_letter(std::string_view response, std::size_t option_count) {
    auto in_range = [&](char c) { return static_cast<std::size_t>(c - 'A') < option_count; };

    {
        static const std::regex re(R"([Aa]nswer\s*(?:is|:)\s*:?\s*\(?([A-Z])\)?(?![A-Za-z]))");
        std::match_results<std::string_view::const_iterator> m;
        if (std::regex_search(response.begin(), response.end(), m, re)) {
            const char c = m[1].str()[0];
            if (in_range(c)) return static_cast<std::size_t>(c - 'A');
        }
    }

    static const std::set<std::string> kJoiners = {"or", "and", "nor", "vs", "vs.", "versus"};
    const auto tokens = split_whitespace(response);
    std::vector<char> letters;
    std::optional<char> first_token_letter;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto l = letter_token(tokens[i]);
        if (!l || !in_range(*l)) continue;
        if (is_bare_letter(tokens[i]) && (*l == 'A' || *l == 'I') && i + 1 < tokens.size()) {
            const auto next = tokens[i + 1];
            if (!next.empty() && std::islower(static_cast<unsigned char>(next[0])) &&
                !kJoiners.contains(lower(next))) {
                continue;
            }
        }
        if (i == 0) first_token_letter = *l;
        letters.push_back(*l);
    }
    if (first_token_letter) return static_cast<std::size_t>(*first_token_letter - 'A');
    std::set<char> distinct(letters.begin(), letters.end());
    if (distinct.size() == 1) return static_cast<std::size_t>(*distinct.begin() - 'A');
    return std::nullopt;
}

Result<AnswerSelection, AnswerError> answer_question(ModelBackend& backend, const PromptTemplates& t,
                                                     std::string_view question, const CausalChain& chain,
                                                     const std::vector<std::string>& options) {
    if (options.size() < AnswerOptions::kMinOptions || options.size() > AnswerOptions::kMaxOptions) {
        return fail(AnswerError{AnswerError::Kind::InvalidOptions,
                                "option count must be within [2, 26], got " + std::to_string(options.size()),
                                std::nullopt,
                                {}});
    }
    const auto chain_text = serialize_chain(chain);
    const auto options_text = render_options(options);
    ModelRequest r;
    r.role = BackendRole::Answerer;
    r.instruction = fill_template(t.get(BackendRole::Answerer), {{"question", std::string(question)},
                                                                 {"chain", chain_text},
                                                                 {"options", options_text}});
    r.context = {{BlockKind::Question, std::string(question)},
                 {BlockKind::Chain, chain_text},
                 {BlockKind::Options, options_text}};

    std::vector<std::string> raws;
    for (int round = 0; round < 2; ++round) {
        if (round == 1) r.instruction += kLetterReminder;
        auto res = backend.invoke(r);
        if (!res) {
            auto err = std::move(res).error();
            return fail(AnswerError{AnswerError::Kind::Backend, err.message, std::move(err), std::move(raws)});
        }
        raws.push_back(res->text);
        if (auto idx = parse_answer_letter(res->text, options.size())) return AnswerSelection{*idx, std::move(raws)};
    }
    return fail(AnswerError{AnswerError::Kind::Parse, "no unambiguous option letter after reprompt", std::nullopt,
                            std::move(raws)});
}

std::optional<VerifierDecision> parse_verifier_reply(std::string_view reply) {
    const auto t = trim(reply);
    const auto head = lower(t.substr(0, 6));
    if (head == "accept") {
        for (char c : t.substr(6)) {
            if (!std::ispunct(static_cast<unsigned char>(c)) && !std::isspace(static_cast<unsigned char>(c))) {
                return std::nullopt;
            }
        }
        return VerifierDecision{true, {}};
    }
    if (head == "reject") {
        auto rest = trim(t.substr(6));
        if (!rest.empty() && (rest.front() == ':' || rest.front() == '-')) rest = trim(rest.substr(1));
        return VerifierDecision{false, rest.empty() ? std::string("unspecified") : std::string(rest)};
    }
    return std::nullopt;
}

Result<VerifierDecision, VerifierError> verify_chain(ModelBackend& backend, const PromptTemplates& t,
                                                     std::string_view question, std::string_view answer,
                                                     const CausalChain& chain) {
    const auto chain_text = serialize_chain(chain);
    ModelRequest r;
    r.role = BackendRole::Verifier;
    r.instruction = fill_template(t.get(BackendRole::Verifier), {{"question", std::string(question)},
                                                                 {"answer", std::string(answer)},
                                                                 {"chain", chain_text}});
    r.context = {{BlockKind::Question, std::string(question)},
                 {BlockKind::Answer, std::string(answer)},
                 {BlockKind::Chain, chain_text}};
    for (int round = 0; round < 2; ++round) {
        if (round == 1) r.instruction += kVerifierReminder;
        auto res = backend.invoke(r);
        if (!res) {
            auto err = std::move(res).error();
            return fail(VerifierError{VerifierError::Kind::Backend, err.message, std::move(err)});
        }
        if (auto d = parse_verifier_reply(res->text)) return *d;
    }
    return fail(VerifierError{VerifierError::Kind::Parse, "verifier reply is neither ACCEPT nor REJECT", std::nullopt});
}

std::optional<bool> parse_judge_reply(std::string_view reply) {
    const auto v = lower(trim(reply));
    if (v == "true") return true;
    if (v == "false") return false;
    return std::nullopt;
}

JudgeOutcome judge_coherence(ModelBackend& backend, const PromptTemplates& t, const CausalChain& chain) {
    const auto chain_text = serialize_chain(chain);
    ModelRequest r;
    r.role = BackendRole::Judge;
    r.instruction = fill_template(t.get(BackendRole::Judge), {{"chain", chain_text}});
    r.context = {{BlockKind::Chain, chain_text}};
    std::string last;
    for (int round = 0; round < 2; ++round) {
        if (round == 1) r.instruction += kVerdictReminder;
        auto res = backend.invoke(r);
        if (!res) return fail(JudgeFailure{JudgeFailureKind::Unavailable, res.error().message});
        if (auto v = parse_judge_reply(res->text)) return CoherenceVerdict{*v, std::nullopt};
        last = res->text;
    }
    return fail(JudgeFailure{JudgeFailureKind::JudgeError, "judge replied '" + last + "'"});
}

CoherenceJudge make_judge(ModelBackend& backend, const PromptTemplates& t) {
    return [&backend, t](const CausalChain& chain) { return judge_coherence(backend, t, chain); };
}

}  // namespace chainforge
