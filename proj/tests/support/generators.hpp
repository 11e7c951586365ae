#pragma once

// Seeded input generators for property tests.

#include <cstdint>
#include <string>
#include <vector>

#include "chainforge/chain.hpp"
#include "chainforge/rng.hpp"
#include "chainforge/sample.hpp"

namespace gen {

using chainforge::SeededRng;

std::string word(SeededRng& rng);
/// 2..6 words, optionally with inner punctuation.
std::string event_text(SeededRng& rng);
chainforge::CausalChain chain(SeededRng& rng, std::size_t min_events, std::size_t max_events);

/// Tokens over a small vocabulary so pairs share n-grams often.
std::vector<std::string> tokens(SeededRng& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab = 6);

/// Byte soup biased towards the chain grammar's special characters.
std::string fuzz_input(SeededRng& rng, std::size_t max_len);

/// A corpus sample with options and a chain. Ids are `syn-<i>`.
chainforge::Sample sample(SeededRng& rng, std::size_t i);

/// Chain with two lexicon actors and an antonym hit, so every perturbation
/// strategy applies.
chainforge::CausalChain rich_chain(SeededRng& rng);

/// 50 candidate/reference pairs with no repeated token on either side: ten
/// written out, the rest built from seeded shuffles of a 12-token vocabulary.
std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> meteor_pairs();

}  // namespace gen
