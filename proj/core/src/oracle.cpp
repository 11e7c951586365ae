#include "chainforge/oracle.hpp"

#include <map>
#include <set>

#include "chainforge/experiments.hpp"
#include "chainforge/text.hpp"

namespace chainforge {

namespace {

std::set<std::string> content_tokens(std::string_view text) {
    std::set<std::string> out;
    for (auto& t : tokenize(text)) {
        if (!is_stopword(t)) out.insert(std::move(t));
    }
    return out;
}

// "A. text" lines back into option texts.
std::vector<std::string> parse_options_block(std::string_view block) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= block.size()) {
        auto end = block.find('\n', start);
        if (end == std::string_view::npos) end = block.size();
        auto line = block.substr(start, end - start);
        if (line.size() >= 3 && line[1] == '.' && line[2] == ' ') out.emplace_back(line.substr(3));
        start = end + 1;
    }
    return out;
}

std::optional<std::size_t> best_option(const CausalChain& chain, const std::vector<std::string>& options) {
    std::optional<std::size_t> best;
    std::size_t best_score = 0;
    bool tie = false;
    for (std::size_t i = 0; i < options.size(); ++i) {
        const auto score = option_overlap(chain, options[i]);
        if (score > best_score) {
            best = i;
            best_score = score;
            tie = false;
        } else if (score == best_score && best) {
            tie = true;
        }
    }
    if (tie || best_score == 0) return std::nullopt;
    return best;
}

std::optional<std::string> answer_letter(const ModelRequest& r, const std::function<bool(const CausalChain&)>& gate) {
    const auto* chain_block = r.find(BlockKind::Chain);
    const auto* options_block = r.find(BlockKind::Options);
    if (r.role != BackendRole::Answerer || !chain_block || !options_block) return std::nullopt;
    auto chain = parse_chain(chain_block->text);
    if (!chain || (gate && !gate(*chain))) return std::string("unsure");
    auto idx = best_option(*chain, parse_options_block(options_block->text));
    if (!idx) return std::string("unsure");
    return std::string(1, option_letter(*idx));
}

std::size_t unmasked_tokens(const CausalChain& c) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c[i].str() != kMaskText) n += tokenize(c[i].str()).size();
    }
    return n;
}

}  // namespace

std::size_t option_overlap(const CausalChain& chain, std::string_view option) {
    std::set<std::string> chain_tok;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        if (chain[i].str() == kMaskText) continue;
        chain_tok.merge(content_tokens(chain[i].str()));
    }
    std::size_t n = 0;
    for (const auto& t : content_tokens(option)) n += chain_tok.count(t);
    return n;
}

ScriptedBackend::Responder overlap_answerer() {
    return [](const ModelRequest& r) { return answer_letter(r, {}); };
}

ScriptedBackend::Responder masked_overlap_answerer(const std::vector<Sample>& corpus, double min_unmasked) {
    auto totals = std::make_shared<std::map<std::string, std::size_t>>();
    for (const auto& s : corpus) {
        if (s.gold_chain) (*totals)[s.question] = chain_tokens(*s.gold_chain).size();
    }
    return [totals, min_unmasked](const ModelRequest& r) {
        const auto* q = r.find(BlockKind::Question);
        auto it = q ? totals->find(q->text) : totals->end();
        return answer_letter(r, [&](const CausalChain& c) {
            if (it == totals->end() || it->second == 0) return false;
            return static_cast<double>(unmasked_tokens(c)) >= min_unmasked * static_cast<double>(it->second);
        });
    };
}

ScriptedBackend::Responder set_judge(const std::vector<CausalChain>& coherent) {
    auto keys = std::make_shared<std::set<std::string>>();
    for (const auto& c : coherent) keys->insert(serialize_chain(c));
    return [keys](const ModelRequest& r) -> std::optional<std::string> {
        const auto* c = r.find(BlockKind::Chain);
        if (r.role != BackendRole::Judge || !c) return std::nullopt;
        return std::string(keys->count(c->text) ? "true" : "false");
    };
}

ScriptedBackend::Responder accepting_verifier() {
    return [](const ModelRequest& r) -> std::optional<std::string> {
        if (r.role != BackendRole::Verifier) return std::nullopt;
        return std::string("ACCEPT");
    };
}

ScriptedBackend::Responder gold_chain_echo(const std::vector<Sample>& corpus) {
    auto chains = std::make_shared<std::map<std::string, std::string>>();
    for (const auto& s : corpus) {
        if (s.gold_chain) (*chains)[s.question] = serialize_chain(*s.gold_chain);
    }
    return [chains](const ModelRequest& r) -> std::optional<std::string> {
        const auto* q = r.find(BlockKind::Question);
        if (!q) return std::nullopt;
        auto it = chains->find(q->text);
        if (it == chains->end()) return std::nullopt;
        return it->second;
    };
}

}  // namespace chainforge
