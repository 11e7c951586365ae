#pragma once

// Rule-based responders for scripted backends. They stand in for trained
// models in offline runs and tests.

#include <optional>
#include <string>
#include <vector>

#include "chainforge/backend.hpp"
#include "chainforge/chain.hpp"
#include "chainforge/sample.hpp"

namespace chainforge {

/// Content tokens (stopwords removed) an option shares with the chain,
/// counted once each. Masked events contribute nothing.
std::size_t option_overlap(const CausalChain& chain, std::string_view option);

/// Answerer picking the option with the largest overlap with the chain
/// block. Replies "unsure" on a tie for first or when nothing overlaps.
ScriptedBackend::Responder overlap_answerer();

/// Like overlap_answerer, but answers only while at least `min_unmasked` of
/// the original chain's tokens survive masking. The original chain is found
/// by question text in `corpus`.
ScriptedBackend::Responder masked_overlap_answerer(const std::vector<Sample>& corpus, double min_unmasked = 0.5);

/// Judge replying "true" exactly for the chains in `coherent`.
ScriptedBackend::Responder set_judge(const std::vector<CausalChain>& coherent);

/// Verifier accepting every chain.
ScriptedBackend::Responder accepting_verifier();

/// Extractor and generator that return the gold chain of the sample whose
/// question appears in the request.
ScriptedBackend::Responder gold_chain_echo(const std::vector<Sample>& corpus);

}  // namespace chainforge
