#include "simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "error.hpp"
#include "rng.hpp"

namespace frauddet {

namespace {

double round_cents(double amount) { return std::round(amount * 100.0) / 100.0; }

int pick_regime(const std::array<double, 3>& weights, Rng& rng) {
    double total = weights[0] + weights[1] + weights[2];
    if (total <= 0)
        fail(Errc::invalid_argument, "spending weights must not all be zero");
    double u = rng.uniform() * total;
    if (u < weights[0])
        return 0;
    if (u < weights[0] + weights[1])
        return 1;
    return 2;
}

double draw_amount(const SpendingModel& model, Rng& rng) {
    int r = pick_regime(model.weights, rng);
    const RegimeModel& regime = model.regimes[static_cast<std::size_t>(r)];
    return round_cents(std::max(0.0, regime.base + regime.scale * rng.exponential()));
}

long draw_count(const ParamModel& model, Rng& rng) {
    if (model.dispersion == 0.0)
        return std::max(0L, std::lround(model.mean));
    double v = model.mean + model.dispersion * rng.normal();
    return std::max(0L, std::lround(v));
}

ParamModel param_model_from_json(const nlohmann::json& j) {
    ParamModel m;
    m.mean = j.at("mean").get<double>();
    m.dispersion = j.value("dispersion", 0.0);
    if (m.mean < 0 || m.dispersion < 0)
        fail(Errc::invalid_argument, "behavior mean and dispersion must be non-negative");
    return m;
}

SpendingModel spending_from_json(const nlohmann::json& j) {
    SpendingModel m;
    if (j.contains("weights")) {
        auto w = j.at("weights").get<std::vector<double>>();
        if (w.size() != 3)
            fail(Errc::invalid_argument, "spending weights must have 3 entries");
        for (double v : w)
            if (v < 0)
                fail(Errc::invalid_argument, "spending weights must be non-negative");
        std::copy(w.begin(), w.end(), m.weights.begin());
    }
    if (j.contains("txns_per_day")) {
        m.txns_per_day = j.at("txns_per_day").get<int>();
        if (m.txns_per_day < 0)
            fail(Errc::invalid_argument, "txns_per_day must be non-negative");
    }
    if (j.contains("regimes")) {
        const auto& r = j.at("regimes");
        const char* names[3] = {"low", "medium", "high"};
        for (int i = 0; i < 3; ++i) {
            if (!r.contains(names[i]))
                continue;
            m.regimes[static_cast<std::size_t>(i)].base = r.at(names[i]).at("base").get<double>();
            m.regimes[static_cast<std::size_t>(i)].scale =
                r.at(names[i]).value("scale", 0.0);
        }
    }
    return m;
}

} // namespace

UserStreams generate_user(const UserGenerator& gen, const std::string& user, long days) {
    if (days < 1)
        fail(Errc::invalid_argument, "simulation horizon must be at least one day");
    if (gen.behavior.empty() && gen.fixed_behavior.empty())
        fail(Errc::invalid_argument, "user generator has no behavioral parameters");

    Rng rng(gen.seed);
    UserStreams out;
    out.user = user;

    for (long day = 1; day <= days; ++day) {
        if (!gen.fixed_behavior.empty()) {
            for (const auto& [kind, pattern] : gen.fixed_behavior) {
                if (pattern.empty())
                    fail(Errc::invalid_argument, "fixed pattern for '" + kind + "' is empty");
                long count = pattern[static_cast<std::size_t>((day - 1) % static_cast<long>(
                                                                  pattern.size()))];
                out.events.push_back({user, day, kind, count, ""});
            }
        } else {
            for (const auto& [kind, model] : gen.behavior)
                out.events.push_back({user, day, kind, draw_count(model, rng), ""});
        }
        for (int t = 0; t < gen.spending.txns_per_day; ++t)
            out.txns.push_back({day, draw_amount(gen.spending, rng), gen.home_cell, false});
    }
    return out;
}

void inject_fraud(UserStreams& streams, const FraudScenario& scenario) {
    switch (scenario.kind) {
    case FraudScenario::Kind::none:
        return;
    case FraudScenario::Kind::mobile_theft:
        // The device is gone: every mobile parameter reads zero from onset.
        for (auto& e : streams.events)
            if (e.day >= scenario.onset_day)
                e.count = 0;
        if (scenario.txns_fraud_from_onset)
            for (auto& t : streams.txns)
                if (t.day >= scenario.onset_day)
                    t.fraud = true;
        return;
    case FraudScenario::Kind::card_theft: {
        // The mobile stream is untouched except that location presence
        // reflects the card/device mismatch; transactions come from the
        // fraudster's distribution and location.
        for (auto& e : streams.events)
            if (e.day >= scenario.onset_day && e.kind == param::location_presence)
                e.count = std::max(
                    0L, std::lround(static_cast<double>(e.count) *
                                    (1.0 - scenario.location_mismatch)));
        // Fraudster draws, decoupled from the victim stream; seeded portably
        // from the user id so distinct victims see distinct fraud amounts.
        std::uint64_t h = 1469598103934665603ULL;
        for (char c : streams.user)
            h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
        Rng rng(h ^ 0x9e3779b97f4a7c15ULL);
        for (auto& t : streams.txns) {
            if (t.day < scenario.onset_day)
                continue;
            t.amount = draw_amount(scenario.fraud_spending, rng);
            t.location = scenario.fraud_cell;
            t.fraud = true;
        }
        return;
    }
    }
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object())
        fail(Errc::invalid_argument, "scenario config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        static const char* allowed[] = {"seed",     "days",          "users",  "behavior",
                                        "fixed_behavior", "home_cell", "spending", "pretrain_txns",
                                        "fraud",    "engine"};
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k)
                ok = true;
        if (!ok)
            fail(Errc::invalid_argument, "unknown key '" + it.key() + "' in scenario config");
    }

    ScenarioConfig cfg;
    try {
        cfg.seed = j.value("seed", std::uint64_t{1});
        cfg.days = j.value("days", 30L);
        cfg.n_users = j.value("users", 1);
        cfg.user_template.seed = cfg.seed;
        if (j.contains("behavior"))
            for (auto it = j.at("behavior").begin(); it != j.at("behavior").end(); ++it)
                cfg.user_template.behavior[it.key()] = param_model_from_json(it.value());
        if (j.contains("fixed_behavior"))
            for (auto it = j.at("fixed_behavior").begin(); it != j.at("fixed_behavior").end();
                 ++it)
                cfg.user_template.fixed_behavior[it.key()] =
                    it.value().get<std::vector<long>>();
        cfg.user_template.home_cell = j.value("home_cell", std::string("cell-home"));
        if (j.contains("spending"))
            cfg.user_template.spending = spending_from_json(j.at("spending"));
        cfg.pretrain_txns = j.value("pretrain_txns", std::size_t{0});
        if (j.contains("fraud")) {
            const auto& f = j.at("fraud");
            std::string kind = f.value("kind", std::string("none"));
            if (kind == "none")
                cfg.fraud.kind = FraudScenario::Kind::none;
            else if (kind == "mobile_theft")
                cfg.fraud.kind = FraudScenario::Kind::mobile_theft;
            else if (kind == "card_theft")
                cfg.fraud.kind = FraudScenario::Kind::card_theft;
            else
                fail(Errc::invalid_argument, "fraud.kind must be none, mobile_theft or card_theft");
            cfg.fraud.onset_day = f.value("onset_day", 0L);
            if (f.contains("spending_weights")) {
                auto w = f.at("spending_weights").get<std::vector<double>>();
                if (w.size() != 3)
                    fail(Errc::invalid_argument, "fraud.spending_weights must have 3 entries");
                std::copy(w.begin(), w.end(), cfg.fraud.fraud_spending.weights.begin());
            } else if (cfg.fraud.kind == FraudScenario::Kind::card_theft) {
                cfg.fraud.fraud_spending.weights = {0.0, 0.0, 1.0};
            }
            cfg.fraud.fraud_spending.regimes = cfg.user_template.spending.regimes;
            cfg.fraud.fraud_cell = f.value("location_cell", std::string("cell-far"));
            cfg.fraud.location_mismatch = f.value("location_mismatch", 1.0);
            cfg.fraud.txns_fraud_from_onset =
                f.value("txns_fraud_from_onset",
                        cfg.fraud.kind == FraudScenario::Kind::card_theft);
            if (cfg.fraud.kind != FraudScenario::Kind::none &&
                (cfg.fraud.onset_day < 1 || cfg.fraud.onset_day > cfg.days))
                fail(Errc::invalid_argument, "fraud.onset_day must lie within the horizon");
            if (cfg.fraud.location_mismatch < 0 || cfg.fraud.location_mismatch > 1)
                fail(Errc::invalid_argument, "fraud.location_mismatch must be in [0,1]");
        }
        if (j.contains("engine"))
            cfg.engine_config = j.at("engine");
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_argument, std::string("bad scenario config: ") + e.what());
    }
    if (cfg.days < 1)
        fail(Errc::invalid_argument, "days must be at least 1");
    if (cfg.n_users < 1)
        fail(Errc::invalid_argument, "users must be at least 1");
    return cfg;
}

namespace {

std::string user_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "u%03d", index + 1);
    return buf;
}

std::string events_to_ndjson(const std::vector<MobileEvent>& events) {
    std::ostringstream out;
    for (const auto& e : events)
        out << nlohmann::json({{"user", e.user},
                               {"day", e.day},
                               {"kind", e.kind},
                               {"count", e.count},
                               {"transfer", e.transfer}})
                   .dump()
            << "\n";
    return out.str();
}

struct DecisionRow {
    std::string user;
    long day = 0;
    bool fraud = false;
    std::map<std::string, double> scores;
    double aggregate = 0.0;
    std::string case_label;
    std::string verdict;
    std::optional<double> delta;
};

} // namespace

RunResult run_scenario(const ScenarioConfig& config) {
    EngineConfig ecfg = EngineConfig::from_json(config.engine_config);
    ecfg.data_dir.reset(); // each run owns an in-memory store
    auto engine = std::make_shared<Engine>(ecfg);

    std::vector<UserStreams> streams;
    for (int i = 0; i < config.n_users; ++i) {
        UserGenerator gen = config.user_template;
        gen.seed = config.seed + static_cast<std::uint64_t>(i);
        UserStreams s = generate_user(gen, user_name(i), config.days);
        inject_fraud(s, config.fraud);
        streams.push_back(std::move(s));

        if (config.pretrain_txns > 0) {
            Rng rng(gen.seed ^ 0xA5A5A5A5A5A5A5A5ULL);
            std::vector<double> amounts;
            amounts.reserve(config.pretrain_txns);
            for (std::size_t k = 0; k < config.pretrain_txns; ++k)
                amounts.push_back(draw_amount(config.user_template.spending, rng));
            engine->train_user_amounts(streams.back().user, amounts, 0);
        }
    }

    std::vector<DeviceBuffer> devices;
    devices.reserve(streams.size());
    for (const auto& s : streams)
        devices.emplace_back(s.user + "-device");

    std::vector<DecisionRow> rows;
    long decided = 0, legit_decided = 0, legit_not_accepted = 0;
    long fraud_decided = 0, fraud_caught = 0, warmups = 0;
    std::optional<long> first_detection_day;

    for (long day = 1; day <= config.days; ++day) {
        for (std::size_t u = 0; u < streams.size(); ++u) {
            for (const auto& e : streams[u].events)
                if (e.day == day)
                    devices[u].record(e);
            if (devices[u].pending() > 0)
                devices[u].transfer_and_erase([&](const EventBatch& batch) {
                    nlohmann::json ack = engine->ingest_events(events_to_ndjson(batch.events));
                    return ack.at("transfer").get<std::string>() == batch.transfer_id;
                });
        }
        for (std::size_t u = 0; u < streams.size(); ++u) {
            int seq = 0;
            for (const auto& txn : streams[u].txns) {
                if (txn.day != day)
                    continue;
                PaymentRequest req;
                req.txn = streams[u].user + "-d" + std::to_string(day) + "-" +
                          std::to_string(++seq);
                req.user = streams[u].user;
                req.amount = txn.amount;
                req.location = txn.location;
                req.day = day;
                nlohmann::json resp = engine->handle_payment(req);
                if (resp.contains("status")) {
                    ++warmups;
                    continue;
                }
                ++decided;
                DecisionRow row;
                row.user = req.user;
                row.day = day;
                row.fraud = txn.fraud;
                row.aggregate = resp.at("score").get<double>();
                row.case_label = resp.at("case").get<std::string>();
                row.verdict = resp.at("verdict").get<std::string>();
                if (!resp.at("delta").is_null())
                    row.delta = resp.at("delta").get<double>();
                nlohmann::json trace = engine->trace_json(resp.at("trace").get<std::string>());
                for (const auto& s : trace.at("scores"))
                    row.scores[s.at("kind").get<std::string>()] = s.at("score").get<double>();
                rows.push_back(std::move(row));

                bool accepted = rows.back().verdict == "accept";
                if (txn.fraud) {
                    ++fraud_decided;
                    if (!accepted) {
                        ++fraud_caught;
                        if (!first_detection_day)
                            first_detection_day = day;
                    }
                } else {
                    ++legit_decided;
                    if (!accepted)
                        ++legit_not_accepted;
                }
            }
        }
    }

    std::vector<std::string> kinds;
    for (const auto& [kind, model] : config.user_template.behavior)
        kinds.push_back(kind);
    for (const auto& [kind, pattern] : config.user_template.fixed_behavior)
        kinds.push_back(kind);
    std::sort(kinds.begin(), kinds.end());
    kinds.erase(std::unique(kinds.begin(), kinds.end()), kinds.end());

    std::ostringstream csv;
    csv << "day";
    for (const auto& k : kinds)
        csv << "," << k;
    csv << ",aggregate,case,verdict,delta\n";
    nlohmann::json trajectory = nlohmann::json::array();
    for (const auto& row : rows) {
        csv << row.day;
        nlohmann::json scores = nlohmann::json::object();
        for (const auto& k : kinds) {
            auto it = row.scores.find(k);
            csv << ",";
            if (it != row.scores.end()) {
                csv << it->second;
                scores[k] = it->second;
            }
        }
        csv << "," << row.aggregate << "," << row.case_label << "," << row.verdict << ",";
        if (row.delta)
            csv << *row.delta;
        csv << "\n";
        trajectory.push_back({{"day", row.day},
                              {"user", row.user},
                              {"fraud", row.fraud},
                              {"scores", scores},
                              {"aggregate", row.aggregate},
                              {"case", row.case_label},
                              {"verdict", row.verdict},
                              {"delta", row.delta ? nlohmann::json(*row.delta)
                                                  : nlohmann::json(nullptr)}});
    }

    double fpr = legit_decided > 0
                     ? static_cast<double>(legit_not_accepted) / static_cast<double>(legit_decided)
                     : 0.0;
    nlohmann::json metrics = {
        {"seed", config.seed},
        {"days", config.days},
        {"users", config.n_users},
        {"detector", to_string(engine->config().detector)},
        {"decided", decided},
        {"warmup_responses", warmups},
        {"legit_decided", legit_decided},
        {"fraud_decided", fraud_decided},
        {"false_positive_rate", fpr},
        {"detection_rate", fraud_decided > 0
                               ? nlohmann::json(static_cast<double>(fraud_caught) /
                                                static_cast<double>(fraud_decided))
                               : nlohmann::json(nullptr)},
        {"first_detection_day", first_detection_day ? nlohmann::json(*first_detection_day)
                                                    : nlohmann::json(nullptr)},
        {"trajectory", config.n_users == 1 ? trajectory : nlohmann::json::array()}};

    RunResult result;
    result.metrics = std::move(metrics);
    result.csv = csv.str();
    result.engine = std::move(engine);
    return result;
}

nlohmann::json replay_example() {
    const std::vector<long> calls = {5, 10, 15, 3, 3, 4, 5};
    const std::vector<long> sms = {10, 15, 4, 2, 3, 2, 3};
    const Thresholds thresholds{25.0, 75.0};
    const ScoreConfig config; // window 7, signed mode, uniform weights

    auto make_window = [](const char* kind, const std::vector<long>& values) {
        BehaviorWindow w;
        w.kind = kind;
        w.window_len = values.size();
        w.values.assign(values.begin(), values.end());
        return w;
    };

    std::map<std::string, BehaviorWindow> windows;
    windows.emplace(param::calls, make_window(param::calls, calls));
    windows.emplace(param::sms, make_window(param::sms, sms));
    const std::map<std::string, long> theft_day{{param::calls, 0}, {param::sms, 0}};

    // Exact-fraction expectations, computed from the recorded integer counts.
    struct DayExpectation {
        double calls_score;
        double sms_score;
        double aggregate;
        CaseLabel label;
    };
    const DayExpectation expected[2] = {
        {100.0 * 40 / 45, 100.0 * 29 / 39, 0.5 * (100.0 * 40 / 45 + 100.0 * 29 / 39),
         CaseLabel::direct_accept},
        {100.0 * 30 / 40, 100.0 * 14 / 29, 0.5 * (100.0 * 30 / 40 + 100.0 * 14 / 29),
         CaseLabel::escalate},
    };

    auto check = [](const std::string& what, double got, double want) {
        if (std::abs(got - want) > 1e-6)
            fail(Errc::assertion, what + ": computed " + std::to_string(got) + ", expected " +
                                      std::to_string(want));
    };

    nlohmann::json days = nlohmann::json::array();
    for (int day = 0; day < 2; ++day) {
        ScoreDayResult scored = score_day(windows, theft_day, config);
        CaseLabel label = classify(scored.score.aggregate, thresholds);

        std::string prefix = "day-" + std::to_string(day + 1) + " ";
        for (const auto& p : scored.score.per_parameter)
            check(prefix + p.kind + " score", p.score,
                  p.kind == param::calls ? expected[day].calls_score : expected[day].sms_score);
        check(prefix + "aggregate", scored.score.aggregate, expected[day].aggregate);
        if (label != expected[day].label)
            fail(Errc::assertion, prefix + "case: computed " + to_string(label) + ", expected " +
                                      to_string(expected[day].label));

        nlohmann::json scores = nlohmann::json::array();
        for (const auto& p : scored.score.per_parameter)
            scores.push_back({{"kind", p.kind},
                              {"prev_avg", p.prev_avg},
                              {"new_avg", p.new_avg},
                              {"score", p.score}});
        days.push_back({{"day", day + 1},
                        {"scores", scores},
                        {"aggregate", scored.score.aggregate},
                        {"case", to_string(label)}});
        windows = std::move(scored.slid_windows);
    }

    return {{"example", "one-week calls/sms record, theft the next day"},
            {"thresholds", {{"t1", thresholds.t1}, {"t2", thresholds.t2}}},
            {"days", days}};
}

nlohmann::json compare_detectors(const ScenarioConfig& config) {
    if (config.fraud.kind != FraudScenario::Kind::none)
        fail(Errc::invalid_argument,
             "detector comparison is defined on a legitimate population (fraud.kind none)");
    if (config.n_users < 100)
        fail(Errc::invalid_argument, "detector comparison needs a population of at least 100");

    nlohmann::json report = {{"seed", config.seed},
                             {"days", config.days},
                             {"users", config.n_users}};
    for (const char* mode : {"hybrid", "mobile_only", "hmm_only"}) {
        ScenarioConfig c = config;
        c.engine_config["detector"] = mode;
        RunResult r = run_scenario(c);
        report[mode] = {{"false_positive_rate", r.metrics.at("false_positive_rate")},
                        {"legit_decided", r.metrics.at("legit_decided")},
                        {"decided", r.metrics.at("decided")}};
    }
    return report;
}

} // namespace frauddet
