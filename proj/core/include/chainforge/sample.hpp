#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <string>
#include <vector>

#include "chainforge/chain.hpp"

namespace chainforge {

/// Opaque video reference: a file path or URL. Never opened by the library
/// except to stream local files from the review service.
struct VideoRef {
    std::string uri;
    std::optional<double> duration_s;

    friend bool operator==(const VideoRef&, const VideoRef&) = default;
};

/// Lettered answer options; A is index 0.
struct AnswerOptions {
    std::vector<std::string> options;
    std::size_t gold_index = 0;

    static constexpr std::size_t kMinOptions = 2;
    static constexpr std::size_t kMaxOptions = 26;

    friend bool operator==(const AnswerOptions&, const AnswerOptions&) = default;
};

char option_letter(std::size_t index);
/// "A. first\nB. second\n..."
std::string render_options(const std::vector<std::string>& options);

enum class Split { Train, Val, Test };

const char* to_string(Split s);
std::optional<Split> split_from_string(std::string_view s);

/// One QA record: video, question, gold answer, options and optional chain.
/// `dataset` is one of nextqa, causalvidqa, causalchaos, or any other name.
struct Sample {
    std::string id;
    std::string dataset;
    Split split = Split::Train;
    VideoRef video;
    std::optional<std::string> video_surrogate;
    std::string question;
    std::string gold_answer;
    std::optional<AnswerOptions> options;
    std::optional<CausalChain> gold_chain;

    friend bool operator==(const Sample&, const Sample&) = default;
};

}  // namespace chainforge
