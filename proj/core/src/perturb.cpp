#include "chainforge/perturb.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "chainforge/rng.hpp"
#include "chainforge/text.hpp"

namespace chainforge {

namespace {

constexpr std::array<std::string_view, 11> kAuxiliaries = {
    "is", "are", "was", "were", "has", "have", "had", "can", "will", "does", "did",
};

constexpr std::string_view kNegationPrefix = "it is not the case that ";

bool is_word_byte(char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '_' || u >= 0x80;
}

bool is_ascii_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::ispunct(u);
}

bool whole_word_at(std::string_view text, std::size_t pos, std::string_view word) {
    if (text.substr(pos, word.size()) != word) return false;
    if (pos > 0 && is_word_byte(text[pos - 1])) return false;
    const std::size_t end = pos + word.size();
    return end >= text.size() || !is_word_byte(text[end]);
}

bool contains_word(std::string_view text, std::string_view word) {
    for (std::size_t pos = text.find(word); pos != std::string_view::npos; pos = text.find(word, pos + 1)) {
        if (whole_word_at(text, pos, word)) return true;
    }
    return false;
}

// Whitespace-separated piece with surrounding punctuation peeled off.
struct WordSpan {
    std::size_t begin;  // byte offset of the word core
    std::size_t end;
};

std::vector<WordSpan> word_spans(std::string_view text) {
    std::vector<WordSpan> out;
    for (auto piece : split_whitespace(text)) {
        std::size_t b = static_cast<std::size_t>(piece.data() - text.data());
        std::size_t e = b + piece.size();
        while (b < e && is_ascii_punct(text[b])) ++b;
        while (e > b && is_ascii_punct(text[e - 1])) --e;
        if (b < e) out.push_back({b, e});
    }
    return out;
}

std::optional<CausalChain> rebuild(const std::vector<std::string>& texts) {
    return CausalChain::from_texts(texts);
}

std::vector<std::string> present_actors(const CausalChain& chain, const Lexicons& lex) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& actor : lex.actors()) {
        if (seen.contains(actor)) continue;
        for (const auto& e : chain.events()) {
            if (contains_word(e.str(), actor)) {
                out.push_back(actor);
                seen.insert(actor);
                break;
            }
        }
    }
    return out;
}

std::string swap_words(std::string_view text, std::string_view a, std::string_view b) {
    // Try the longer actor first so "Tom Hanks" wins over "Tom".
    std::string_view first = a.size() >= b.size() ? a : b;
    std::string_view second = a.size() >= b.size() ? b : a;
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (whole_word_at(text, pos, first)) {
            out += (first == a ? b : a);
            pos += first.size();
        } else if (whole_word_at(text, pos, second)) {
            out += (second == a ? b : a);
            pos += second.size();
        } else {
            out += text[pos++];
        }
    }
    return out;
}

bool has_antonym_hit(std::string_view text, const Lexicons& lex) {
    for (const auto& w : word_spans(text)) {
        if (lex.antonyms().contains(ascii_lower(text.substr(w.begin, w.end - w.begin)))) return true;
    }
    return false;
}

bool has_distinct_events(const CausalChain& chain) {
    for (std::size_t i = 1; i < chain.size(); ++i) {
        if (chain[i].str() != chain[0].str()) return true;
    }
    return false;
}

std::vector<std::string> reversed_texts(const CausalChain& chain) {
    auto t = chain.texts();
    std::reverse(t.begin(), t.end());
    return t;
}

bool valid_lexicon_entry(std::string_view s) { return EventText::make(s).has_value() && trim(s) == s; }

Unexpected<NotApplicable> not_applicable(PerturbStrategy s, std::string reason) {
    return fail(NotApplicable{s, std::move(reason)});
}

}  // namespace

std::string_view to_string(PerturbStrategy s) {
    switch (s) {
        case PerturbStrategy::ActorSwap: return "actor_swap";
        case PerturbStrategy::EventNegation: return "event_negation";
        case PerturbStrategy::EventRemoval: return "event_removal";
        case PerturbStrategy::OrderReversal: return "order_reversal";
        case PerturbStrategy::SemanticModification: return "semantic_modification";
        case PerturbStrategy::ChainShuffle: return "chain_shuffle";
    }
    return "unknown";
}

std::optional<PerturbStrategy> strategy_from_string(std::string_view name) {
    for (auto s : kAllStrategies) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

Result<Lexicons, std::string> Lexicons::make(std::vector<std::string> actors,
                                             std::map<std::string, std::string> antonyms) {
    Lexicons lex;
    for (auto& a : actors) {
        if (!valid_lexicon_entry(a)) return fail(std::string("invalid actor entry: '" + a + "'"));
        lex.actors_.push_back(std::move(a));
    }
    for (auto& [word, repl] : antonyms) {
        if (!valid_lexicon_entry(word) || !valid_lexicon_entry(repl)) {
            return fail(std::string("invalid antonym entry: '" + word + "' -> '" + repl + "'"));
        }
        auto key = ascii_lower(word);
        if (key == ascii_lower(repl)) return fail(std::string("antonym maps word to itself: '" + word + "'"));
        lex.antonyms_.emplace(std::move(key), std::move(repl));
    }
    return lex;
}

Result<std::vector<std::string>, std::string> Lexicons::read_actors(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return fail(std::string("cannot read actor list: " + path.string()));
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        out.emplace_back(t);
    }
    return out;
}

Result<std::map<std::string, std::string>, std::string> Lexicons::read_antonyms(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return fail(std::string("cannot read antonym map: " + path.string()));
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto tab = t.find('\t');
        if (tab == std::string_view::npos) {
            return fail(std::string(path.string() + ":" + std::to_string(lineno) + ": expected word<TAB>replacement"));
        }
        out.emplace(std::string(trim(t.substr(0, tab))), std::string(trim(t.substr(tab + 1))));
    }
    return out;
}

bool is_applicable(const CausalChain& chain, PerturbStrategy strategy, const Lexicons& lexicons) {
    switch (strategy) {
        case PerturbStrategy::ActorSwap:
            return present_actors(chain, lexicons).size() >= 2;
        case PerturbStrategy::EventNegation:
            return true;
        case PerturbStrategy::EventRemoval:
            return chain.size() >= 3;
        case PerturbStrategy::OrderReversal:
            return chain.size() >= 2 && reversed_texts(chain) != chain.texts();
        case PerturbStrategy::SemanticModification:
            return std::any_of(chain.events().begin(), chain.events().end(),
                               [&](const EventText& e) { return has_antonym_hit(e.str(), lexicons); });
        case PerturbStrategy::ChainShuffle:
            return chain.size() >= 2 && has_distinct_events(chain);
    }
    return false;
}

Result<PerturbedChain, NotApplicable> perturb(const CausalChain& chain, PerturbStrategy strategy,
                                              std::uint64_t seed, const Lexicons& lexicons) {
    SeededRng rng(seed);
    const std::size_t n = chain.size();
    auto texts = chain.texts();
    std::string details;

    switch (strategy) {
        case PerturbStrategy::ActorSwap: {
            const auto actors = present_actors(chain, lexicons);
            if (actors.size() < 2) return not_applicable(strategy, "fewer than 2 distinct actors present");
            const auto i = rng.below(actors.size());
            auto j = rng.below(actors.size() - 1);
            if (j >= i) ++j;
            for (auto& t : texts) t = swap_words(t, actors[i], actors[j]);
            details = "swapped '" + actors[i] + "' <-> '" + actors[j] + "'";
            break;
        }
        case PerturbStrategy::EventNegation: {
            const auto idx = rng.below(n);
            auto& t = texts[idx];
            bool inserted = false;
            for (const auto& w : word_spans(t)) {
                const auto word = ascii_lower(std::string_view(t).substr(w.begin, w.end - w.begin));
                if (std::find(kAuxiliaries.begin(), kAuxiliaries.end(), word) != kAuxiliaries.end()) {
                    t.insert(w.end, " not");
                    details = "negated event " + std::to_string(idx) + " after '" + word + "'";
                    inserted = true;
                    break;
                }
            }
            if (!inserted) {
                t = std::string(kNegationPrefix) + t;
                details = "negated event " + std::to_string(idx) + " with prefix";
            }
            break;
        }
        case PerturbStrategy::EventRemoval: {
            if (n < 3) return not_applicable(strategy, "needs at least 3 events");
            const auto idx = 1 + rng.below(n - 2);
            texts.erase(texts.begin() + static_cast<std::ptrdiff_t>(idx));
            details = "removed event " + std::to_string(idx);
            break;
        }
        case PerturbStrategy::OrderReversal: {
            if (n < 2) return not_applicable(strategy, "needs at least 2 events");
            std::reverse(texts.begin(), texts.end());
            details = "reversed " + std::to_string(n) + " events";
            break;
        }
        case PerturbStrategy::SemanticModification: {
            bool replaced = false;
            for (const auto idx : rng.permutation(n)) {
                auto& t = texts[idx];
                for (const auto& w : word_spans(t)) {
                    const auto word = std::string_view(t).substr(w.begin, w.end - w.begin);
                    const auto it = lexicons.antonyms().find(ascii_lower(word));
                    if (it == lexicons.antonyms().end()) continue;
                    std::string repl = it->second;
                    if (std::isupper(static_cast<unsigned char>(word.front())) && !repl.empty()) {
                        repl.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(repl.front())));
                    }
                    details = "event " + std::to_string(idx) + ": '" + std::string(word) + "' -> '" + repl + "'";
                    t.replace(w.begin, w.end - w.begin, repl);
                    replaced = true;
                    break;
                }
                if (replaced) break;
            }
            if (!replaced) return not_applicable(strategy, "no antonym lexicon hit");
            break;
        }
        case PerturbStrategy::ChainShuffle: {
            if (n < 2 || !has_distinct_events(chain)) {
                return not_applicable(strategy, "needs at least 2 distinct events");
            }
            const auto original = texts;
            for (;;) {
                const auto perm = rng.permutation(n);
                for (std::size_t i = 0; i < n; ++i) texts[i] = original[perm[i]];
                if (texts != original) {
                    details = "permutation";
                    for (auto p : perm) details += " " + std::to_string(p);
                    break;
                }
            }
            break;
        }
    }

    // Lexicon material glued onto neighbouring text can still form an arrow.
    auto result = rebuild(texts);
    if (!result) return not_applicable(strategy, "rewrite produced an invalid event");
    if (chain_equal(*result, chain)) return not_applicable(strategy, "rewrite left the chain unchanged");
    return PerturbedChain{chain, std::move(*result), strategy, seed, std::move(details)};
}

Result<NegativeSet, NoApplicableStrategy> generate_negatives(const CausalChain& chain, std::size_t count,
                                                             std::uint64_t seed, const Lexicons& lexicons) {
    std::vector<PerturbStrategy> applicable;
    for (auto s : kAllStrategies) {
        if (is_applicable(chain, s, lexicons)) applicable.push_back(s);
    }
    if (applicable.empty()) return fail(NoApplicableStrategy{"no perturbation strategy applies to this chain"});

    NegativeSet set;
    const std::size_t max_draws = 10 * count;
    for (std::size_t draw = 0; draw < max_draws && set.negatives.size() < count; ++draw) {
        const std::uint64_t draw_seed = mix_seed(seed + draw);
        SeededRng pick(draw_seed);
        const auto strategy = applicable[pick.below(applicable.size())];
        auto p = perturb(chain, strategy, pick.next(), lexicons);
        if (!p) continue;
        const bool duplicate = std::any_of(set.negatives.begin(), set.negatives.end(),
                                           [&](const PerturbedChain& q) { return chain_equal(q.result, p->result); });
        if (!duplicate) set.negatives.push_back(std::move(p).value());
    }
    set.shortfall = count - set.negatives.size();
    return set;
}

}  // namespace chainforge
