#include "chainforge/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "chainforge/oracle.hpp"

namespace chainforge {

namespace pt = boost::property_tree;

namespace {

std::string unquote(std::string v) {
    v = std::string(trim(v));
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
    return v;
}

struct SectionReader {
    const pt::ptree& tree;
    std::string section;
    std::set<std::string> allowed;
    std::optional<std::string> error;

    std::optional<std::string> raw(const std::string& key) {
        allowed.insert(key);
        auto it = tree.find(key);
        if (it == tree.not_found()) return std::nullopt;
        return unquote(it->second.data());
    }

    void fail(const std::string& key, const std::string& what) {
        if (!error) error = "[" + section + "] " + key + ": " + what;
    }

    template <typename T>
    void number(const std::string& key, T& out) {
        auto v = raw(key);
        if (!v) return;
        try {
            std::size_t used = 0;
            if constexpr (std::is_floating_point_v<T>) {
                out = static_cast<T>(std::stod(*v, &used));
            } else {
                if (!v->empty() && v->front() == '-') throw std::invalid_argument("negative");
                out = static_cast<T>(std::stoull(*v, &used));
            }
            if (used != v->size()) throw std::invalid_argument("trailing text");
        } catch (const std::exception&) {
            fail(key, "expected a number, got \"" + *v + "\"");
        }
    }

    void boolean(const std::string& key, bool& out) {
        auto v = raw(key);
        if (!v) return;
        if (*v == "true" || *v == "1" || *v == "yes") {
            out = true;
        } else if (*v == "false" || *v == "0" || *v == "no") {
            out = false;
        } else {
            fail(key, "expected true or false, got \"" + *v + "\"");
        }
    }

    void text(const std::string& key, std::string& out) {
        if (auto v = raw(key)) out = *v;
    }

    void path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) {
        if (auto v = raw(key)) out = (base / *v).lexically_normal();
    }

    void path(const std::string& key, std::optional<std::filesystem::path>& out, const std::filesystem::path& base) {
        if (auto v = raw(key)) out = (base / *v).lexically_normal();
    }

    void finish() {
        for (const auto& [k, _] : tree) {
            if (!allowed.count(k)) fail(k, "unknown key");
        }
    }
};

const std::set<std::string> kBuiltins = {"overlap_answerer", "masked_overlap_answerer", "accepting_verifier",
                                         "gold_chain_echo", "gold_judge"};

}  // namespace

std::optional<std::string> GlobalConfig::require_roles(const std::vector<BackendRole>& needed) const {
    for (auto r : needed) {
        if (!roles.count(r)) return "no [backend." + std::string(to_string(r)) + "] section in config";
    }
    return std::nullopt;
}

Result<GlobalConfig, std::string> parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        return fail(std::string("config line ") + std::to_string(e.line()) + ": " + e.message());
    }

    GlobalConfig c;
    for (const auto& [name, section] : tree) {
        if (section.empty() && !section.data().empty()) return fail("key \"" + name + "\" outside a section");
        SectionReader r{section, name, {}, std::nullopt};
        if (name == "paths") {
            r.path("data_dir", c.paths.data_dir, base_dir);
            r.path("runs_dir", c.paths.runs_dir, base_dir);
            r.path("queue_log", c.paths.queue_log, base_dir);
            r.path("prompts_dir", c.paths.prompts_dir, base_dir);
        } else if (name == "validation") {
            r.number("max_events", c.validation.max_events);
            r.number("min_events", c.validation.min_events);
            r.number("max_event_chars", c.validation.max_event_chars);
            r.boolean("require_terminal_relevance", c.validation.require_terminal_relevance);
        } else if (name == "pipeline") {
            r.number("max_attempts", c.pipeline.max_attempts);
            r.number("worker_pool_size", c.pipeline.worker_pool_size);
            r.boolean("human_stage_enabled", c.human_stage_enabled);
            r.boolean("auto_approve", c.auto_approve);
            r.boolean("strict_models", c.strict_models);
        } else if (name == "lexicons") {
            r.path("actors", c.actors_lexicon, base_dir);
            r.path("antonyms", c.antonyms_lexicon, base_dir);
        } else if (name.rfind("backend.", 0) == 0) {
            auto role = role_from_string(name.substr(8));
            if (!role) return fail("unknown backend role in section [" + name + "]");
            RoleBinding b;
            std::string kind = "scripted";
            r.text("kind", kind);
            if (kind == "remote") {
                b.kind = RoleBinding::Kind::Remote;
            } else if (kind != "scripted") {
                r.fail("kind", "expected remote or scripted, got \"" + kind + "\"");
            }
            r.text("endpoint_url", b.backend.endpoint_url);
            r.text("api_key_env", b.backend.api_key_env_name);
            r.text("model", b.backend.model_name);
            r.number("timeout_ms", b.backend.timeout_ms);
            r.number("max_retries", b.backend.max_retries);
            r.number("backoff_initial_ms", b.backend.backoff_initial_ms);
            r.number("max_inflight", b.backend.max_inflight);
            if (section.find("temperature") != section.not_found()) {
                double temp = 0.0;
                r.number("temperature", temp);
                b.backend.temperature = temp;
            }
            r.path("script", b.script, base_dir);
            if (auto v = r.raw("builtin")) {
                if (!kBuiltins.count(*v)) r.fail("builtin", "unknown builtin \"" + *v + "\"");
                b.builtin = *v;
            }
            if (!r.error) {
                if (auto e = b.backend.check()) r.fail("kind", *e);
            }
            if (!r.error && b.kind == RoleBinding::Kind::Remote &&
                (b.backend.endpoint_url.empty() || b.backend.model_name.empty())) {
                r.fail("kind", "remote backend needs endpoint_url and model");
            }
            if (!r.error && b.kind == RoleBinding::Kind::Scripted && !b.script && !b.builtin) {
                r.fail("kind", "scripted backend needs a script or a builtin");
            }
            c.roles[*role] = std::move(b);
        } else {
            return fail("unknown section [" + name + "]");
        }
        r.finish();
        if (r.error) return fail(std::move(*r.error));
    }

    if (auto e = c.validation.check()) return fail("[validation] " + *e);
    if (auto e = c.pipeline.check()) return fail("[pipeline] " + *e);
    if (!c.human_stage_enabled) {
        c.pipeline.human_stage = HumanStageMode::Disabled;
    } else {
        c.pipeline.human_stage = c.auto_approve ? HumanStageMode::AutoApprove : HumanStageMode::Queue;
    }
    auto gen = c.roles.find(BackendRole::Generator);
    auto ver = c.roles.find(BackendRole::Verifier);
    if (gen != c.roles.end() && ver != c.roles.end()) {
        if (auto e = check_cross_model(gen->second.backend, ver->second.backend, c.strict_models)) return fail(*e);
    }
    return c;
}

Result<GlobalConfig, std::string> load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return fail("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    auto c = parse_config(buf.str(), path.parent_path());
    if (c) c->source = path;
    return c;
}

nlohmann::ordered_json to_json(const GlobalConfig& c) {
    nlohmann::ordered_json j;
    j["source"] = c.source.string();
    j["paths"] = {{"data_dir", c.paths.data_dir.string()},
                  {"runs_dir", c.paths.runs_dir.string()},
                  {"queue_log", c.paths.queue_log.string()}};
    if (c.paths.prompts_dir) j["paths"]["prompts_dir"] = c.paths.prompts_dir->string();
    j["validation"] = {{"max_events", c.validation.max_events},
                       {"min_events", c.validation.min_events},
                       {"max_event_chars", c.validation.max_event_chars},
                       {"require_terminal_relevance", c.validation.require_terminal_relevance}};
    j["pipeline"] = {{"max_attempts", c.pipeline.max_attempts},
                     {"worker_pool_size", c.pipeline.worker_pool_size},
                     {"human_stage_enabled", c.human_stage_enabled},
                     {"auto_approve", c.auto_approve},
                     {"strict_models", c.strict_models}};
    auto& roles = j["backends"] = nlohmann::ordered_json::object();
    for (const auto& [role, b] : c.roles) {
        nlohmann::ordered_json r;
        r["kind"] = b.kind == RoleBinding::Kind::Remote ? "remote" : "scripted";
        if (b.kind == RoleBinding::Kind::Remote) {
            r["endpoint_url"] = b.backend.endpoint_url;
            r["api_key_env"] = b.backend.api_key_env_name;
            r["model"] = b.backend.model_name;
            r["timeout_ms"] = b.backend.timeout_ms;
            r["max_retries"] = b.backend.max_retries;
            r["backoff_initial_ms"] = b.backend.backoff_initial_ms;
            r["max_inflight"] = b.backend.max_inflight;
        } else if (!b.backend.model_name.empty()) {
            r["model"] = b.backend.model_name;
        }
        r["temperature"] = effective_temperature(role, b.backend);
        if (b.script) r["script"] = b.script->string();
        if (b.builtin) r["builtin"] = *b.builtin;
        roles[std::string(to_string(role))] = std::move(r);
    }
    return j;
}

Result<std::unique_ptr<ModelBackend>, std::string> make_backend(const GlobalConfig& config, BackendRole role,
                                                                const std::vector<Sample>& corpus) {
    auto it = config.roles.find(role);
    if (it == config.roles.end()) return fail("no [backend." + std::string(to_string(role)) + "] section in config");
    const auto& b = it->second;
    if (b.kind == RoleBinding::Kind::Remote) {
        return std::unique_ptr<ModelBackend>(std::make_unique<RemoteBackend>(b.backend));
    }
    std::unique_ptr<ScriptedBackend> s;
    if (b.script) {
        auto loaded = ScriptedBackend::from_file(*b.script);
        if (!loaded) return fail(std::move(loaded).error());
        s = std::move(*loaded);
    } else {
        s = std::make_unique<ScriptedBackend>();
    }
    if (b.builtin) {
        const auto& name = *b.builtin;
        if (name == "overlap_answerer") {
            s->set_responder(overlap_answerer());
        } else if (name == "masked_overlap_answerer") {
            s->set_responder(masked_overlap_answerer(corpus));
        } else if (name == "accepting_verifier") {
            s->set_responder(accepting_verifier());
        } else if (name == "gold_chain_echo") {
            s->set_responder(gold_chain_echo(corpus));
        } else if (name == "gold_judge") {
            std::vector<CausalChain> gold;
            for (const auto& smp : corpus) {
                if (smp.gold_chain) gold.push_back(*smp.gold_chain);
            }
            s->set_responder(set_judge(gold));
        }
    }
    return std::unique_ptr<ModelBackend>(std::move(s));
}

}  // namespace chainforge
