#include <fstream>

#include "chainforge/backend.hpp"

namespace chainforge {

Result<std::unique_ptr<ScriptedBackend>, std::string> ScriptedBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return fail(std::string("cannot read script: " + path.string()));
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) return fail(std::string("script is not valid JSON: " + path.string()));
    return from_json(j);
}

Result<std::unique_ptr<ScriptedBackend>, std::string> ScriptedBackend::from_json(const nlohmann::json& script) {
    if (!script.is_object()) return fail(std::string("script must be a JSON object"));
    auto backend = std::make_unique<ScriptedBackend>();
    try {
        if (script.contains("responses")) {
            for (const auto& [hash, text] : script.at("responses").items()) {
                backend->add_fixture(hash, text.get<std::string>());
            }
        }
        if (script.contains("rules")) {
            for (const auto& r : script.at("rules")) {
                Rule rule;
                rule.contains = r.at("contains").get<std::string>();
                if (r.contains("texts")) {
                    rule.texts = r.at("texts").get<std::vector<std::string>>();
                } else {
                    rule.texts = {r.at("text").get<std::string>()};
                }
                if (rule.texts.empty()) return fail(std::string("rule '" + rule.contains + "' has no texts"));
                backend->add_rule(std::move(rule));
            }
        }
        if (script.contains("default")) backend->set_default(script.at("default").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        return fail(std::string("malformed script: ") + e.what());
    }
    return backend;
}

void ScriptedBackend::add_fixture(const std::string& hash, std::string text) {
    std::lock_guard lock(mu_);
    fixtures_[hash] = std::move(text);
}

void ScriptedBackend::add_rule(Rule rule) {
    std::lock_guard lock(mu_);
    rules_.push_back(std::move(rule));
    rule_cursor_.push_back(0);
}

std::vector<ModelRequest> ScriptedBackend::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

InvokeResult ScriptedBackend::invoke(const ModelRequest& request) {
    if (auto err = check_request(request)) return fail(*err);

    std::optional<std::string> text;
    Responder responder;
    {
        std::lock_guard lock(mu_);
        calls_.push_back(request);
        if (auto it = fixtures_.find(request_hash(request)); it != fixtures_.end()) {
            text = it->second;
        } else {
            const auto prompt = render_prompt(request);
            for (std::size_t i = 0; i < rules_.size(); ++i) {
                if (prompt.find(rules_[i].contains) == std::string::npos) continue;
                auto& cursor = rule_cursor_[i];
                text = rules_[i].texts[cursor];
                if (cursor + 1 < rules_[i].texts.size()) ++cursor;
                break;
            }
        }
        responder = responder_;
    }
    if (!text && responder) text = responder(request);
    if (!text) text = default_text_;
    if (!text) {
        return fail(BackendError{BackendErrorKind::TransportError,
                                 "scripted backend has no response for request " + request_hash(request), 1});
    }
    ModelResponse r;
    r.text = std::move(*text);
    return r;
}

}  // namespace chainforge
