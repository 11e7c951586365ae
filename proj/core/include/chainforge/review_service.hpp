#pragma once

// HTTP JSON front end of the review queue:
//
//   GET  /healthz
//   GET  /api/queue/next?reviewer=NAME   oldest unleased pending item (204 when none)
//   POST /api/items/{id}/decision        {action, chain?, reason?, reviewer}
//   GET  /api/items/{id}
//   GET  /api/stats
//   GET  /api/video/{sample_id}          302 to remote URIs, file stream for local paths
//
// Errors: 400 bad request or invalid edit (body carries the validation
// report), 404 unknown item, 409 item already decided.

#include <cstdint>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "chainforge/review_queue.hpp"
#include "chainforge/validate.hpp"

namespace chainforge {

nlohmann::ordered_json to_json(const ValidationReport& report);

class ReviewService {
  public:
    explicit ReviewService(ReviewQueue& queue, ValidationConfig validation = {});
    ~ReviewService();

    ReviewService(const ReviewService&) = delete;
    ReviewService& operator=(const ReviewService&) = delete;

    /// Binds and serves until stop(). Returns false when the port cannot be bound.
    bool listen(const std::string& host, int port);
    /// Binds to a free port and returns it, or -1; serve with listen_after_bind().
    int bind_any(const std::string& host);
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace chainforge
