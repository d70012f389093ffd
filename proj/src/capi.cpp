#include "frauddet.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "engine.hpp"
#include "error.hpp"
#include "service.hpp"
#include "simulator.hpp"

using frauddet::Errc;
using frauddet::Error;

struct fd_engine {
    explicit fd_engine(frauddet::EngineConfig config) : engine(std::move(config)) {}

    frauddet::Engine engine;
    std::unique_ptr<frauddet::PaymentService> service;
};

namespace {

thread_local std::string g_last_error;

int status_of(Errc c) {
    switch (c) {
    case Errc::invalid_argument:
        return FD_EINVAL;
    case Errc::not_found:
        return FD_ENOTFOUND;
    case Errc::not_warm:
        return FD_EWARMUP;
    case Errc::data:
        return FD_EDATA;
    case Errc::integrity:
        return FD_EINTEGRITY;
    case Errc::assertion:
        return FD_EASSERT;
    case Errc::internal:
        return FD_EINTERNAL;
    }
    return FD_EINTERNAL;
}

template <typename F>
int guarded(F&& fn) {
    try {
        int status = fn();
        if (status == FD_OK)
            g_last_error.clear();
        return status;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.code());
    } catch (const nlohmann::json::exception& e) {
        g_last_error = e.what();
        return FD_EINVAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return FD_EINTERNAL;
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void set_out(char** out, const std::string& s) {
    if (out)
        *out = dup_string(s);
}

nlohmann::json parse_or_empty(const char* json) {
    if (!json || !*json)
        return nlohmann::json::object();
    return nlohmann::json::parse(json);
}

int require(bool cond, const char* message) {
    if (cond)
        return FD_OK;
    g_last_error = message;
    return FD_EINVAL;
}

} // namespace

extern "C" {

const char* fd_version(void) { return "frauddet 1.0.0"; }

const char* fd_last_error(void) { return g_last_error.c_str(); }

void fd_string_free(char* s) { std::free(s); }

int fd_engine_new(const char* config_json, fd_engine** out_engine) {
    if (int rc = require(out_engine != nullptr, "out_engine is null"))
        return rc;
    *out_engine = nullptr;
    return guarded([&]() {
        frauddet::EngineConfig cfg = frauddet::EngineConfig::from_json(parse_or_empty(config_json));
        *out_engine = new fd_engine(std::move(cfg));
        return FD_OK;
    });
}

void fd_engine_free(fd_engine* engine) { delete engine; }

int fd_engine_ingest_events(fd_engine* engine, const char* ndjson, char** out_ack_json) {
    if (int rc = require(engine && ndjson, "engine and ndjson are required"))
        return rc;
    return guarded([&]() {
        set_out(out_ack_json, engine->engine.ingest_events(ndjson).dump());
        return FD_OK;
    });
}

int fd_engine_handle_payment(fd_engine* engine, const char* request_json,
                             char** out_response_json) {
    if (int rc = require(engine && request_json, "engine and request_json are required"))
        return rc;
    return guarded([&]() {
        nlohmann::json request = nlohmann::json::parse(request_json);
        nlohmann::json response =
            engine->engine.handle_payment(frauddet::payment_request_from_json(request));
        set_out(out_response_json, response.dump());
        if (response.contains("status")) {
            g_last_error = "profile warm-up required";
            return FD_EWARMUP;
        }
        return FD_OK;
    });
}

int fd_engine_profile(fd_engine* engine, const char* user, char** out_profile_json) {
    if (int rc = require(engine && user, "engine and user are required"))
        return rc;
    return guarded([&]() {
        set_out(out_profile_json, engine->engine.profile_json(user).dump());
        return FD_OK;
    });
}

int fd_engine_trace(fd_engine* engine, const char* trace_id, char** out_trace_json) {
    if (int rc = require(engine && trace_id, "engine and trace_id are required"))
        return rc;
    return guarded([&]() {
        set_out(out_trace_json, engine->engine.trace_json(trace_id).dump());
        return FD_OK;
    });
}

int fd_engine_train(fd_engine* engine, const char* txns_ndjson, char** out_summary_json) {
    if (int rc = require(engine && txns_ndjson, "engine and txns_ndjson are required"))
        return rc;
    return guarded([&]() {
        set_out(out_summary_json, engine->engine.train_users(txns_ndjson).dump());
        return FD_OK;
    });
}

int fd_engine_serve_start(fd_engine* engine, const char* host, int port, int* out_port) {
    if (int rc = require(engine && host, "engine and host are required"))
        return rc;
    return guarded([&]() {
        if (engine->service) {
            g_last_error = "service is already running";
            return FD_EINVAL;
        }
        auto service = std::make_unique<frauddet::PaymentService>(engine->engine);
        int bound = service->start(host, port);
        engine->service = std::move(service);
        if (out_port)
            *out_port = bound;
        return FD_OK;
    });
}

int fd_engine_serve_wait(fd_engine* engine) {
    if (int rc = require(engine != nullptr, "engine is null"))
        return rc;
    return guarded([&]() {
        if (!engine->service) {
            g_last_error = "service is not running";
            return FD_EINVAL;
        }
        engine->service->wait();
        return FD_OK;
    });
}

int fd_engine_serve_stop(fd_engine* engine) {
    if (int rc = require(engine != nullptr, "engine is null"))
        return rc;
    return guarded([&]() {
        if (engine->service) {
            engine->service->stop();
            engine->service.reset();
        }
        return FD_OK;
    });
}

int fd_score_events(const char* config_json, const char* ndjson, const char* user,
                    char** out_score_json) {
    if (int rc = require(ndjson != nullptr, "ndjson is required"))
        return rc;
    return guarded([&]() {
        frauddet::EngineConfig cfg = frauddet::EngineConfig::from_json(parse_or_empty(config_json));
        nlohmann::json score = frauddet::score_event_log(cfg, ndjson, user ? user : "");
        set_out(out_score_json, score.dump());
        return FD_OK;
    });
}

int fd_run_scenario(const char* scenario_json, char** out_metrics_json, char** out_csv) {
    if (int rc = require(scenario_json != nullptr, "scenario_json is required"))
        return rc;
    return guarded([&]() {
        frauddet::ScenarioConfig cfg =
            frauddet::ScenarioConfig::from_json(nlohmann::json::parse(scenario_json));
        frauddet::RunResult result = frauddet::run_scenario(cfg);
        set_out(out_metrics_json, result.metrics.dump());
        set_out(out_csv, result.csv);
        return FD_OK;
    });
}

int fd_compare_detectors(const char* scenario_json, char** out_report_json) {
    if (int rc = require(scenario_json != nullptr, "scenario_json is required"))
        return rc;
    return guarded([&]() {
        frauddet::ScenarioConfig cfg =
            frauddet::ScenarioConfig::from_json(nlohmann::json::parse(scenario_json));
        set_out(out_report_json, frauddet::compare_detectors(cfg).dump());
        return FD_OK;
    });
}

int fd_replay_example(char** out_trace_json) {
    return guarded([&]() {
        set_out(out_trace_json, frauddet::replay_example().dump());
        return FD_OK;
    });
}

} // extern "C"
