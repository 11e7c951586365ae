#include "chainforge/backend.hpp"

#include <cstdio>

namespace chainforge {

namespace {

bool has_block(const ModelRequest& r, BlockKind k) {
    const auto* b = r.find(k);
    return b != nullptr && !b->text.empty();
}

std::string_view block_label(BlockKind kind) {
    switch (kind) {
        case BlockKind::Question: return "Question";
        case BlockKind::Answer: return "Answer";
        case BlockKind::Chain: return "Causal chain";
        case BlockKind::Options: return "Options";
        case BlockKind::VideoSurrogate: return "Video description";
    }
    return "Context";
}

}  // namespace

std::string_view to_string(BackendRole role) {
    switch (role) {
        case BackendRole::Generator: return "generator";
        case BackendRole::Verifier: return "verifier";
        case BackendRole::Extractor: return "extractor";
        case BackendRole::Answerer: return "answerer";
        case BackendRole::Judge: return "judge";
    }
    return "unknown";
}

std::optional<BackendRole> role_from_string(std::string_view name) {
    for (auto r : {BackendRole::Generator, BackendRole::Verifier, BackendRole::Extractor, BackendRole::Answerer,
                   BackendRole::Judge}) {
        if (to_string(r) == name) return r;
    }
    return std::nullopt;
}

std::string_view to_string(BlockKind kind) {
    switch (kind) {
        case BlockKind::Question: return "question";
        case BlockKind::Answer: return "answer";
        case BlockKind::Chain: return "chain";
        case BlockKind::Options: return "options";
        case BlockKind::VideoSurrogate: return "video_surrogate";
    }
    return "unknown";
}

std::string_view to_string(BackendErrorKind kind) {
    switch (kind) {
        case BackendErrorKind::InvalidRequest: return "InvalidRequest";
        case BackendErrorKind::Timeout: return "Timeout";
        case BackendErrorKind::RateLimited: return "RateLimited";
        case BackendErrorKind::AuthFailure: return "AuthFailure";
        case BackendErrorKind::MalformedResponse: return "MalformedResponse";
        case BackendErrorKind::TransportError: return "TransportError";
    }
    return "Unknown";
}

const ContextBlock* ModelRequest::find(BlockKind kind) const {
    for (const auto& b : context) {
        if (b.kind == kind) return &b;
    }
    return nullptr;
}

nlohmann::ordered_json to_json(const ModelRequest& request) {
    nlohmann::ordered_json j;
    j["role"] = to_string(request.role);
    j["instruction"] = request.instruction;
    auto& ctx = j["context"] = nlohmann::ordered_json::array();
    for (const auto& b : request.context) ctx.push_back({{"kind", to_string(b.kind)}, {"text", b.text}});
    j["media"] = request.media;
    return j;
}

std::string request_hash(const ModelRequest& request) {
    const auto dump = to_json(request).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::optional<BackendError> check_request(const ModelRequest& r) {
    auto missing = [&](std::string what) {
        return BackendError{BackendErrorKind::InvalidRequest,
                            std::string(to_string(r.role)) + " request is missing " + what, 0};
    };
    if (r.instruction.empty()) return missing("an instruction");
    switch (r.role) {
        case BackendRole::Generator:
            if (!has_block(r, BlockKind::Question)) return missing("the question block");
            if (!has_block(r, BlockKind::Answer)) return missing("the answer block");
            break;
        case BackendRole::Verifier:
            if (!has_block(r, BlockKind::Question)) return missing("the question block");
            if (!has_block(r, BlockKind::Answer)) return missing("the answer block");
            if (!has_block(r, BlockKind::Chain)) return missing("the chain block");
            break;
        case BackendRole::Extractor:
            if (!has_block(r, BlockKind::Question)) return missing("the question block");
            if (r.media.empty() && !has_block(r, BlockKind::VideoSurrogate)) {
                return missing("media references or a video surrogate");
            }
            break;
        case BackendRole::Answerer:
            if (!has_block(r, BlockKind::Question)) return missing("the question block");
            if (!has_block(r, BlockKind::Chain)) return missing("the chain block");
            if (!has_block(r, BlockKind::Options)) return missing("the options block");
            break;
        case BackendRole::Judge:
            if (!has_block(r, BlockKind::Chain)) return missing("the chain block");
            break;
    }
    return std::nullopt;
}

std::optional<std::string> BackendConfig::check() const {
    if (timeout_ms == 0) return "timeout_ms must be > 0";
    if (max_inflight == 0) return "max_inflight must be > 0";
    if (temperature && (*temperature < 0.0 || *temperature > 2.0)) return "temperature must be within [0, 2]";
    return std::nullopt;
}

double effective_temperature(BackendRole role, const BackendConfig& config) {
    switch (role) {
        case BackendRole::Verifier:
        case BackendRole::Judge:
        case BackendRole::Answerer:
            return 0.0;
        case BackendRole::Generator:
        case BackendRole::Extractor:
            return config.temperature.value_or(0.7);
    }
    return 0.0;
}

std::optional<std::string> check_cross_model(const BackendConfig& generator, const BackendConfig& verifier,
                                             bool strict) {
    if (strict && !generator.model_name.empty() && generator.model_name == verifier.model_name) {
        return "verifier model '" + verifier.model_name +
               "' must differ from the generator model (strict cross-model verification)";
    }
    return std::nullopt;
}

void InflightGate::acquire() {
    std::unique_lock lock(mu_);
    const auto ticket = next_ticket_++;
    cv_.wait(lock, [&] { return ticket == serving_ && active_ < capacity_; });
    ++serving_;
    ++active_;
    cv_.notify_all();
}

void InflightGate::release() {
    {
        std::lock_guard lock(mu_);
        --active_;
    }
    cv_.notify_all();
}

std::string render_prompt(const ModelRequest& request) {
    std::string out = request.instruction;
    for (const auto& b : request.context) {
        if (b.text.empty() || out.find(b.text) != std::string::npos) continue;
        out += "\n\n";
        out += block_label(b.kind);
        out += ":\n";
        out += b.text;
    }
    return out;
}

}  // namespace chainforge
