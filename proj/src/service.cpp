#include "service.hpp"

#include "error.hpp"

namespace frauddet {

namespace {

const char* errc_name(Errc c) {
    switch (c) {
    case Errc::invalid_argument:
        return "invalid_argument";
    case Errc::not_found:
        return "not_found";
    case Errc::not_warm:
        return "not_warm";
    case Errc::data:
        return "data";
    case Errc::integrity:
        return "integrity";
    case Errc::assertion:
        return "assertion";
    case Errc::internal:
        return "internal";
    }
    return "?";
}

int http_status(Errc c) {
    switch (c) {
    case Errc::invalid_argument:
        return 400;
    case Errc::not_found:
        return 404;
    case Errc::not_warm:
        return 409;
    case Errc::data:
        return 422;
    case Errc::integrity:
    case Errc::assertion:
    case Errc::internal:
        return 500;
    }
    return 500;
}

} // namespace

PaymentService::PaymentService(Engine& engine) : engine_(engine) {
    server_.Post("/payment", [this](const httplib::Request& req, httplib::Response& res) {
        route(req, res, [&]() {
            nlohmann::json body = nlohmann::json::parse(req.body);
            return engine_.handle_payment(payment_request_from_json(body));
        });
    });
    server_.Post("/events", [this](const httplib::Request& req, httplib::Response& res) {
        route(req, res, [&]() { return engine_.ingest_events(req.body); });
    });
    server_.Get(R"(/profile/([^/]+))", [this](const httplib::Request& req,
                                              httplib::Response& res) {
        route(req, res, [&]() { return engine_.profile_json(req.matches[1]); });
    });
    server_.Get(R"(/trace/([^/]+))", [this](const httplib::Request& req,
                                            httplib::Response& res) {
        route(req, res, [&]() { return engine_.trace_json(req.matches[1]); });
    });
}

PaymentService::~PaymentService() { stop(); }

void PaymentService::route(const httplib::Request&, httplib::Response& res,
                           const std::function<nlohmann::json()>& handler) {
    try {
        nlohmann::json out = handler();
        // The warm-up response is not a verdict; it gets its own status code.
        bool warmup = out.is_object() && out.contains("status") &&
                      out.at("status") == "warmup_required";
        res.status = warmup ? 409 : 200;
        res.set_content(out.dump(), "application/json");
    } catch (const Error& e) {
        res.status = http_status(e.code());
        res.set_content(
            nlohmann::json({{"error", e.what()}, {"code", errc_name(e.code())}}).dump(),
            "application/json");
    } catch (const nlohmann::json::exception& e) {
        res.status = 400;
        res.set_content(
            nlohmann::json({{"error", e.what()}, {"code", "invalid_argument"}}).dump(),
            "application/json");
    } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(nlohmann::json({{"error", e.what()}, {"code", "internal"}}).dump(),
                        "application/json");
    }
}

int PaymentService::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = server_.bind_to_any_port(host);
        if (bound < 0)
            fail(Errc::internal, "could not bind to " + host);
    } else {
        if (!server_.bind_to_port(host, port))
            fail(Errc::internal, "could not bind to " + host + ":" + std::to_string(port));
    }
    thread_ = std::thread([this]() { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
}

void PaymentService::stop() {
    if (server_.is_running())
        server_.stop();
    if (thread_.joinable())
        thread_.join();
}

void PaymentService::wait() {
    if (thread_.joinable())
        thread_.join();
}

} // namespace frauddet
