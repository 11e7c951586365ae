#include "stub_server.hpp"

#include <nlohmann/json.hpp>

namespace stub {

ChatServer::ChatServer(std::vector<int> statuses, std::string reply)
    : statuses_(std::move(statuses)), reply_(std::move(reply)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
        const auto i = static_cast<std::size_t>(hits_.fetch_add(1));
        {
            std::lock_guard lock(mu_);
            last_body_ = req.body;
        }
        const int status = statuses_[std::min(i, statuses_.size() - 1)];
        res.status = status;
        if (status == 200) {
            nlohmann::json body = {{"choices", {{{"message", {{"role", "assistant"}, {"content", reply_}}}}}},
                                   {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 3}}}};
            res.set_content(body.dump(), "application/json");
        } else {
            if (status == 429) res.set_header("Retry-After", "0");
            res.set_content(R"({"error":{"message":"stub"}})", "application/json");
        }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
}

ChatServer::~ChatServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
}

std::string ChatServer::last_body() const {
    std::lock_guard lock(mu_);
    return last_body_;
}

}  // namespace stub
