#pragma once

#include <string>
#include <thread>

#include "httplib.h"

#include "engine.hpp"

namespace frauddet {

/// HTTP face of the engine: the web-server block in front of the decider.
/// Endpoints: POST /payment, POST /events, GET /profile/{user},
/// GET /trace/{id}.
class PaymentService {
public:
    explicit PaymentService(Engine& engine);
    ~PaymentService();

    PaymentService(const PaymentService&) = delete;
    PaymentService& operator=(const PaymentService&) = delete;

    /// Binds and serves on a background thread; returns the bound port
    /// (pass port 0 to pick a free one). Throws on bind failure.
    int start(const std::string& host, int port);
    void stop();
    /// Blocks until stop() — the serve subcommand's foreground mode.
    void wait();

private:
    void route(const httplib::Request& req, httplib::Response& res,
               const std::function<nlohmann::json()>& handler);

    Engine& engine_;
    httplib::Server server_;
    std::thread thread_;
};

} // namespace frauddet
