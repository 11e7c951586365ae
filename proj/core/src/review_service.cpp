#include "chainforge/review_service.hpp"

#include <filesystem>
#include <fstream>

#include <httplib.h>

#include "chainforge/text.hpp"

namespace chainforge {

nlohmann::ordered_json to_json(const ValidationReport& report) {
    nlohmann::ordered_json j;
    j["verdict"] = report.passed() ? "pass" : "fail";
    j["violations"] = nlohmann::ordered_json::array();
    for (const auto& v : report.violations) j["violations"].push_back({{"rule_id", v.rule_id}, {"detail", v.detail}});
    return j;
}

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, {{"error", message}});
}

std::string mime_for(const std::filesystem::path& p) {
    auto ext = ascii_lower(p.extension().string());
    if (ext == ".mp4" || ext == ".m4v") return "video/mp4";
    if (ext == ".webm") return "video/webm";
    if (ext == ".mkv") return "video/x-matroska";
    if (ext == ".avi") return "video/x-msvideo";
    if (ext == ".mov") return "video/quicktime";
    return "application/octet-stream";
}

bool is_remote(const std::string& uri) {
    return uri.rfind("http://", 0) == 0 || uri.rfind("https://", 0) == 0;
}

// Edit chains arrive as canonical text or as a list of event texts.
std::optional<std::string> chain_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (!v.is_array()) return std::nullopt;
    std::string out;
    for (const auto& e : v) {
        if (!e.is_string()) return std::nullopt;
        if (!out.empty()) out += " -> ";
        out += "[" + e.get<std::string>() + "]";
    }
    return out;
}

}  // namespace

struct ReviewService::Impl {
    ReviewQueue& queue;
    ValidationConfig validation;
    httplib::Server server;

    Impl(ReviewQueue& q, ValidationConfig v) : queue(q), validation(v) { routes(); }

    void routes() {
        server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"status", "ok"}});
        });

        server.Get("/api/queue/next", [this](const httplib::Request& req, httplib::Response& res) {
            const auto reviewer = req.get_param_value("reviewer");
            if (reviewer.empty()) return send_error(res, 400, "reviewer query parameter is required");
            auto item = queue.lease_next(reviewer);
            if (!item) {
                res.status = 204;
                return;
            }
            send_json(res, 200, to_json(*item));
        });

        server.Get(R"(/api/items/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            auto item = queue.get(req.matches[1]);
            if (!item) return send_error(res, 404, "no item " + std::string(req.matches[1]));
            send_json(res, 200, to_json(*item));
        });

        server.Post(R"(/api/items/([^/]+)/decision)",
                    [this](const httplib::Request& req, httplib::Response& res) { decide(req, res); });

        server.Get("/api/stats", [this](const httplib::Request&, httplib::Response& res) {
            const auto c = queue.counts();
            send_json(res, 200,
                      {{"pending", c.pending}, {"approved", c.approved}, {"edited", c.edited}, {"rejected", c.rejected}});
        });

        server.Get(R"(/api/video/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            video(req.matches[1], res);
        });
    }

    void decide(const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) return send_error(res, 400, "body must be a JSON object");
        auto action = action_from_string(body.value("action", std::string()));
        if (!action) return send_error(res, 400, "action must be approve, edit or reject");
        Decision d;
        d.action = *action;
        if (!body.contains("reviewer") || !body["reviewer"].is_string() ||
            body["reviewer"].get<std::string>().empty()) {
            return send_error(res, 400, "reviewer is required");
        }
        d.reviewer = body["reviewer"].get<std::string>();
        if (body.contains("reason") && body["reason"].is_string()) d.reason = body["reason"].get<std::string>();
        if (d.action == DecisionAction::Edit) {
            auto current = queue.get(id);
            if (!current) return send_error(res, 404, "no item " + id);
            if (current->state != ReviewState::Pending) return send_error(res, 409, "item " + id + " is already decided");
            auto text = body.contains("chain") ? chain_text(body["chain"]) : std::nullopt;
            if (!text) return send_error(res, 400, "edit requires a chain (string or list of events)");
            auto report = validate_chain(*text, validation);
            if (!report.passed()) {
                return send_json(res, 400, {{"error", "edited chain fails validation"}, {"validation", to_json(report)}});
            }
            d.chain = parse_chain(*text).value();
        }
        auto r = queue.decide(id, d);
        if (r) return send_json(res, 200, to_json(*r));
        const auto& e = r.error();
        switch (e.kind) {
            case DecideError::Kind::NotFound: return send_error(res, 404, e.message);
            case DecideError::Kind::Conflict: return send_error(res, 409, e.message);
            case DecideError::Kind::Invalid: {
                nlohmann::ordered_json j{{"error", e.message}};
                if (e.report) j["validation"] = to_json(*e.report);
                return send_json(res, 400, j);
            }
            case DecideError::Kind::Io: return send_error(res, 500, e.message);
        }
    }

    void video(const std::string& sample_id, httplib::Response& res) {
        auto item = queue.latest_for_sample(sample_id);
        if (!item) return send_error(res, 404, "no review item for sample " + sample_id);
        const auto& uri = item->video_uri;
        if (is_remote(uri)) {
            res.set_redirect(uri);
            return;
        }
        std::filesystem::path p = uri.rfind("file://", 0) == 0 ? uri.substr(7) : uri;
        std::error_code ec;
        if (uri.empty() || !std::filesystem::is_regular_file(p, ec)) {
            nlohmann::ordered_json j{{"error", "video is not available locally"}, {"uri", uri}};
            j["video_surrogate"] = item->video_surrogate ? nlohmann::ordered_json(*item->video_surrogate)
                                                         : nlohmann::ordered_json(nullptr);
            return send_json(res, 404, j);
        }
        const auto size = std::filesystem::file_size(p, ec);
        auto file = std::make_shared<std::ifstream>(p, std::ios::binary);
        res.set_content_provider(static_cast<std::size_t>(size), mime_for(p),
                                 [file](std::size_t offset, std::size_t length, httplib::DataSink& sink) {
                                     std::vector<char> buf(std::min<std::size_t>(length, 1 << 16));
                                     file->seekg(static_cast<std::streamoff>(offset));
                                     file->read(buf.data(), static_cast<std::streamsize>(buf.size()));
                                     const auto got = file->gcount();
                                     if (got <= 0) return false;
                                     return sink.write(buf.data(), static_cast<std::size_t>(got));
                                 });
    }
};

ReviewService::ReviewService(ReviewQueue& queue, ValidationConfig validation)
    : impl_(std::make_unique<Impl>(queue, validation)) {}

ReviewService::~ReviewService() { stop(); }

bool ReviewService::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int ReviewService::bind_any(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool ReviewService::listen_after_bind() { return impl_->server.listen_after_bind(); }

void ReviewService::stop() {
    if (impl_) impl_->server.stop();
}

void ReviewService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace chainforge
