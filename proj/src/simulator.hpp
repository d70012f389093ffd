#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "engine.hpp"

namespace frauddet {

struct ParamModel {
    double mean = 0.0;
    double dispersion = 0.0;
};

/// Amount sampler for one spending regime: base + scale * Exp(1), so the
/// mass sits near the base with a tail upward. scale 0 is a constant amount.
struct RegimeModel {
    double base = 0.0;
    double scale = 0.0;
};

struct SpendingModel {
    std::array<double, 3> weights{1.0, 0.0, 0.0}; // low / medium / high regime mix
    std::array<RegimeModel, 3> regimes{{{10.0, 8.0}, {200.0, 150.0}, {1500.0, 400.0}}};
    int txns_per_day = 1;
};

struct UserGenerator {
    std::uint64_t seed = 1;
    std::map<std::string, ParamModel> behavior;
    // When set, daily counts follow this explicit pattern (cycled) instead of
    // the random model — used to replay fixed recorded weeks.
    std::map<std::string, std::vector<long>> fixed_behavior;
    SpendingModel spending;
    std::string home_cell = "cell-home";
};

struct FraudScenario {
    enum class Kind { none, mobile_theft, card_theft };

    Kind kind = Kind::none;
    long onset_day = 0;
    SpendingModel fraud_spending; // card theft draws amounts from this from onset
    std::string fraud_cell = "cell-far";
    // How strongly the mobile/transaction location mismatch suppresses the
    // location_presence counts from onset (1 = fully absent).
    double location_mismatch = 1.0;
    // Whether post-onset transactions are labeled fraudulent for metrics.
    // Card theft: the fraudster transacts. Mobile theft: the cardholder still
    // does, and the quantity of interest is the false-positive rate.
    bool txns_fraud_from_onset = false;
};

struct SimTxn {
    long day = 0;
    double amount = 0.0;
    std::string location;
    bool fraud = false;
};

struct UserStreams {
    std::string user;
    std::vector<MobileEvent> events; // transfer ids assigned at delivery
    std::vector<SimTxn> txns;
};

/// Deterministic event + transaction streams: identical seed, identical
/// streams. Dispersion 0 degenerates to constant counts equal to the mean.
UserStreams generate_user(const UserGenerator& gen, const std::string& user, long days);

/// Applies one of the two fraud patterns onto generated streams; `none` is
/// the identity. Pre-onset data is never touched.
void inject_fraud(UserStreams& streams, const FraudScenario& scenario);

struct ScenarioConfig {
    std::uint64_t seed = 1;
    long days = 30;
    int n_users = 1;
    UserGenerator user_template;
    FraudScenario fraud;
    nlohmann::json engine_config = nlohmann::json::object();
    // Fit the spending profile offline from this many seeded pre-run amounts
    // instead of warming it up in-stream (0 = in-stream warm-up).
    std::size_t pretrain_txns = 0;

    static ScenarioConfig from_json(const nlohmann::json& j);
};

struct RunResult {
    nlohmann::json metrics;
    std::string csv; // per-day: day, per-parameter scores, aggregate, case, verdict, delta
    std::shared_ptr<Engine> engine; // the run's engine, for trace/profile inspection
};

/// Runs the full pipeline day by day exactly as the service would: device
/// buffers transfer event batches to the gatherer, then each transaction is
/// decided. Metrics are computed from the decision traces.
RunResult run_scenario(const ScenarioConfig& config);

/// Fixed reproduction of the recorded two-parameter week with a theft the
/// day after: checks the day-by-day scores and case labels against exact
/// fraction arithmetic and returns the full trace. A mismatch beyond 1e-6
/// raises an assertion error naming the diverging quantity.
nlohmann::json replay_example();

/// Runs the same legitimate population through the hybrid cascade and both
/// baselines (single strict threshold at t2; always-escalate) and reports
/// the three false-positive rates.
nlohmann::json compare_detectors(const ScenarioConfig& config);

} // namespace frauddet
