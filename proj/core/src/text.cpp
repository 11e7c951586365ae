#include "chainforge/text.hpp"

#include <algorithm>
#include <unordered_set>

#include "chainforge/chain.hpp"

namespace chainforge {

namespace {

bool is_ascii_punct(unsigned char c) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
}

bool is_unicode_space(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// Decodes one UTF-8 code point at `pos`. Malformed sequences decode as a
// single byte so the tokenizer never stalls.
char32_t decode_at(std::string_view s, std::size_t pos, std::size_t& len) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    auto cont = [&](std::size_t i) -> int {
        if (pos + i >= s.size()) return -1;
        const auto b = static_cast<unsigned char>(s[pos + i]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    len = 1;
    if (b0 < 0x80) return b0;
    if ((b0 & 0xE0) == 0xC0) {
        const int c1 = cont(1);
        if (c1 < 0) return b0;
        len = 2;
        return (char32_t(b0 & 0x1F) << 6) | char32_t(c1);
    }
    if ((b0 & 0xF0) == 0xE0) {
        const int c1 = cont(1), c2 = cont(2);
        if (c1 < 0 || c2 < 0) return b0;
        len = 3;
        return (char32_t(b0 & 0x0F) << 12) | (char32_t(c1) << 6) | char32_t(c2);
    }
    if ((b0 & 0xF8) == 0xF0) {
        const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
        if (c1 < 0 || c2 < 0 || c3 < 0) return b0;
        len = 4;
        return (char32_t(b0 & 0x07) << 18) | (char32_t(c1) << 12) | (char32_t(c2) << 6) |
               char32_t(c3);
    }
    return b0;
}

const std::vector<std::string_view> kStopwords = {
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
    "any", "are", "as", "at", "be", "because", "been", "before", "being", "below",
    "between", "both", "but", "by", "can", "could", "did", "do", "does", "doing",
    "down", "during", "each", "few", "for", "from", "further", "had", "has", "have",
    "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how",
    "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me",
    "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off",
    "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over",
    "own", "same", "she", "should", "so", "some", "such", "than", "that", "the",
    "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
    "through", "to", "too", "under", "until", "up", "very", "was", "we", "were",
    "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with",
    "would", "you", "your", "yours", "yourself", "yourselves",
};

}  // namespace

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::vector<std::string_view> split_whitespace(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = std::string_view::npos;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t len = 1;
        const char32_t cp = decode_at(text, pos, len);
        if (is_unicode_space(cp)) {
            if (start != std::string_view::npos) {
                out.push_back(text.substr(start, pos - start));
                start = std::string_view::npos;
            }
        } else if (start == std::string_view::npos) {
            start = pos;
        }
        pos += len;
    }
    if (start != std::string_view::npos) out.push_back(text.substr(start));
    return out;
}

TokenSequence tokenize(std::string_view text) {
    TokenSequence out;
    for (auto piece : split_whitespace(text)) {
        std::size_t b = 0, e = piece.size();
        while (b < e && is_ascii_punct(static_cast<unsigned char>(piece[b]))) ++b;
        while (e > b && is_ascii_punct(static_cast<unsigned char>(piece[e - 1]))) --e;
        if (b == e) continue;
        out.push_back(ascii_lower(piece.substr(b, e - b)));
    }
    return out;
}

TokenSequence chain_tokens(const CausalChain& chain) {
    TokenSequence out;
    for (const auto& e : chain.events()) {
        auto t = tokenize(e.str());
        out.insert(out.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
    }
    return out;
}

bool is_stopword(std::string_view folded_token) {
    static const std::unordered_set<std::string_view> set(kStopwords.begin(), kStopwords.end());
    return set.contains(folded_token);
}

const std::vector<std::string_view>& stopword_list() { return kStopwords; }

}  // namespace chainforge
