#pragma once

// Negative-sample generation for coherence-judge data. Each strategy is a
// deterministic, lexicon-driven rewrite of a correct chain; given the same
// (chain, strategy, seed, lexicons) it produces byte-identical output.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chainforge/chain.hpp"
#include "chainforge/result.hpp"

namespace chainforge {

enum class PerturbStrategy {
    ActorSwap,
    EventNegation,
    EventRemoval,
    OrderReversal,
    SemanticModification,
    ChainShuffle,
};

inline constexpr std::array<PerturbStrategy, 6> kAllStrategies = {
    PerturbStrategy::ActorSwap,     PerturbStrategy::EventNegation,
    PerturbStrategy::EventRemoval,  PerturbStrategy::OrderReversal,
    PerturbStrategy::SemanticModification, PerturbStrategy::ChainShuffle,
};

std::string_view to_string(PerturbStrategy s);
std::optional<PerturbStrategy> strategy_from_string(std::string_view name);

/// Actor surface strings and a content-word substitution map.
/// Antonym keys are stored case-folded.
class Lexicons {
  public:
    Lexicons() = default;

    /// Rejects empty actors, irreflexive-map violations, and entries that
    /// could not appear inside an event (brackets, newlines, arrows).
    static Result<Lexicons, std::string> make(std::vector<std::string> actors,
                                              std::map<std::string, std::string> antonyms);

    /// One actor per line; blank lines and `#` comments skipped.
    static Result<std::vector<std::string>, std::string> read_actors(const std::filesystem::path& path);
    /// `word<TAB>replacement` per line; blank lines and `#` comments skipped.
    static Result<std::map<std::string, std::string>, std::string> read_antonyms(
        const std::filesystem::path& path);

    const std::vector<std::string>& actors() const noexcept { return actors_; }
    const std::map<std::string, std::string>& antonyms() const noexcept { return antonyms_; }

  private:
    std::vector<std::string> actors_;
    std::map<std::string, std::string> antonyms_;
};

struct PerturbedChain {
    CausalChain original;
    CausalChain result;
    PerturbStrategy strategy;
    std::uint64_t seed;
    std::string details;
};

struct NotApplicable {
    PerturbStrategy strategy;
    std::string reason;
};

bool is_applicable(const CausalChain& chain, PerturbStrategy strategy, const Lexicons& lexicons);

Result<PerturbedChain, NotApplicable> perturb(const CausalChain& chain, PerturbStrategy strategy,
                                              std::uint64_t seed, const Lexicons& lexicons);

struct NegativeSet {
    std::vector<PerturbedChain> negatives;
    std::size_t shortfall = 0;  // requested - produced
};

struct NoApplicableStrategy {
    std::string reason;
};

/// Draws strategies uniformly from the applicable subset, one strategy per
/// negative. Duplicate results are redrawn; after `10 * count` draws the set
/// is returned short with the shortfall recorded.
Result<NegativeSet, NoApplicableStrategy> generate_negatives(const CausalChain& chain, std::size_t count,
                                                             std::uint64_t seed, const Lexicons& lexicons);

}  // namespace chainforge
