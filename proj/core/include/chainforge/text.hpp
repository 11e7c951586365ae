#pragma once

// The single shared tokenizer. Every metric and every lexical check in the
// library goes through `tokenize`, so scores stay comparable.
//
//   1. split on Unicode whitespace (UTF-8 decoded),
//   2. strip leading/trailing ASCII punctuation from each piece,
//   3. case-fold (ASCII letters only; other bytes pass through),
//   4. drop pieces that end up empty.

#include <string>
#include <string_view>
#include <vector>

namespace chainforge {

using TokenSequence = std::vector<std::string>;

TokenSequence tokenize(std::string_view text);

/// Tokens of all events joined by a space.
class CausalChain;
TokenSequence chain_tokens(const CausalChain& chain);

std::string ascii_lower(std::string_view s);

/// Fixed English function-word list used by the relevance screen and the
/// overlap answerers. Lookups expect already case-folded tokens.
bool is_stopword(std::string_view folded_token);
const std::vector<std::string_view>& stopword_list();

/// Raw whitespace split without punctuation stripping or folding.
std::vector<std::string_view> split_whitespace(std::string_view text);

}  // namespace chainforge
