#include "engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "error.hpp"

namespace frauddet {

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k)
                ok = true;
        if (!ok)
            fail(Errc::invalid_argument, "unknown key '" + it.key() + "' in " + where);
    }
}

long now_epoch_seconds() {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

} // namespace

const char* to_string(DetectorMode m) {
    switch (m) {
    case DetectorMode::hybrid:
        return "hybrid";
    case DetectorMode::mobile_only:
        return "mobile_only";
    case DetectorMode::hmm_only:
        return "hmm_only";
    }
    return "?";
}

EngineConfig EngineConfig::from_json(const nlohmann::json& j) {
    EngineConfig cfg;
    if (j.is_null())
        return cfg;
    if (!j.is_object())
        fail(Errc::invalid_argument, "engine config must be a JSON object");
    check_keys(j, {"score", "thresholds", "hmm", "detector", "data_dir"}, "engine config");
    try {
        if (j.contains("score")) {
            const auto& s = j.at("score");
            check_keys(s, {"window_len", "deviation_mode", "zero_baseline_score", "weights"},
                       "score config");
            if (s.contains("window_len"))
                cfg.score.window_len = s.at("window_len").get<std::size_t>();
            if (s.contains("deviation_mode")) {
                std::string mode = s.at("deviation_mode").get<std::string>();
                if (mode == "signed")
                    cfg.score.deviation_mode = ScoreConfig::DeviationMode::signed_mode;
                else if (mode == "absolute")
                    cfg.score.deviation_mode = ScoreConfig::DeviationMode::absolute;
                else
                    fail(Errc::invalid_argument, "deviation_mode must be 'signed' or 'absolute'");
            }
            if (s.contains("zero_baseline_score"))
                cfg.score.zero_baseline_score = s.at("zero_baseline_score").get<double>();
            if (s.contains("weights"))
                cfg.score.weights = s.at("weights").get<std::map<std::string, double>>();
        }
        if (j.contains("thresholds")) {
            const auto& t = j.at("thresholds");
            check_keys(t, {"t1", "t2"}, "thresholds");
            if (t.contains("t1"))
                cfg.thresholds.t1 = t.at("t1").get<double>();
            if (t.contains("t2"))
                cfg.thresholds.t2 = t.at("t2").get<double>();
        }
        if (j.contains("hmm")) {
            const auto& h = j.at("hmm");
            check_keys(h, {"n_states", "window_len", "theta", "train_txns", "max_iters", "tol",
                           "seed"},
                       "hmm config");
            if (h.contains("n_states"))
                cfg.hmm.n_states = h.at("n_states").get<std::size_t>();
            if (h.contains("window_len"))
                cfg.hmm.window_len = h.at("window_len").get<std::size_t>();
            if (h.contains("theta"))
                cfg.hmm.theta = h.at("theta").get<double>();
            if (h.contains("train_txns"))
                cfg.hmm.train_txns = h.at("train_txns").get<std::size_t>();
            if (h.contains("max_iters"))
                cfg.hmm.max_iters = h.at("max_iters").get<std::size_t>();
            if (h.contains("tol"))
                cfg.hmm.tol = h.at("tol").get<double>();
            if (h.contains("seed"))
                cfg.hmm.seed = h.at("seed").get<std::uint64_t>();
        }
        if (j.contains("detector")) {
            std::string d = j.at("detector").get<std::string>();
            if (d == "hybrid")
                cfg.detector = DetectorMode::hybrid;
            else if (d == "mobile_only")
                cfg.detector = DetectorMode::mobile_only;
            else if (d == "hmm_only")
                cfg.detector = DetectorMode::hmm_only;
            else
                fail(Errc::invalid_argument, "detector must be hybrid, mobile_only or hmm_only");
        }
        if (j.contains("data_dir") && !j.at("data_dir").is_null())
            cfg.data_dir = j.at("data_dir").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_argument, std::string("bad engine config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

nlohmann::json EngineConfig::to_json() const {
    nlohmann::json weights = nlohmann::json::object();
    for (const auto& [k, w] : score.weights)
        weights[k] = w;
    return {{"score",
             {{"window_len", score.window_len},
              {"deviation_mode",
               score.deviation_mode == ScoreConfig::DeviationMode::signed_mode ? "signed"
                                                                               : "absolute"},
              {"zero_baseline_score", score.zero_baseline_score},
              {"weights", weights}}},
            {"thresholds", {{"t1", thresholds.t1}, {"t2", thresholds.t2}}},
            {"hmm",
             {{"n_states", hmm.n_states},
              {"window_len", hmm.window_len},
              {"theta", hmm.theta},
              {"train_txns", hmm.train_txns},
              {"max_iters", hmm.max_iters},
              {"tol", hmm.tol},
              {"seed", hmm.seed}}},
            {"detector", to_string(detector)},
            {"data_dir", data_dir ? nlohmann::json(*data_dir) : nlohmann::json(nullptr)}};
}

void EngineConfig::validate() const {
    thresholds.validate();
    if (score.window_len < 1)
        fail(Errc::invalid_argument, "score.window_len must be at least 1");
    if (score.zero_baseline_score < 0 || score.zero_baseline_score > 100)
        fail(Errc::invalid_argument, "score.zero_baseline_score must be in [0,100]");
    for (const auto& [k, w] : score.weights)
        if (w < 0)
            fail(Errc::invalid_argument, "score.weights['" + k + "'] must be non-negative");
    if (hmm.n_states < 1)
        fail(Errc::invalid_argument, "hmm.n_states must be at least 1");
    if (hmm.window_len < 1)
        fail(Errc::invalid_argument, "hmm.window_len must be at least 1");
    if (hmm.theta < 0)
        fail(Errc::invalid_argument, "hmm.theta must be non-negative");
    if (hmm.train_txns < std::max<std::size_t>(2, hmm.window_len))
        fail(Errc::invalid_argument,
             "hmm.train_txns must cover the observation window and at least 2 transactions");
    if (hmm.max_iters < 1)
        fail(Errc::invalid_argument, "hmm.max_iters must be at least 1");
    if (hmm.tol < 0)
        fail(Errc::invalid_argument, "hmm.tol must be non-negative");
}

PaymentRequest payment_request_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        fail(Errc::invalid_argument, "payment request must be a JSON object");
    check_keys(j, {"txn", "user", "amount", "location", "day"}, "payment request");
    PaymentRequest req;
    try {
        req.txn = j.at("txn").get<std::string>();
        req.user = j.at("user").get<std::string>();
        req.amount = j.at("amount").get<double>();
        req.location = j.at("location").get<std::string>();
        req.day = j.at("day").get<long>();
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_argument, std::string("bad payment request: ") + e.what());
    }
    if (req.txn.empty() || req.user.empty())
        fail(Errc::invalid_argument, "payment request needs non-empty txn and user ids");
    if (!(req.amount >= 0) || !std::isfinite(req.amount))
        fail(Errc::invalid_argument, "payment amount must be non-negative and finite");
    if (req.day < 0)
        fail(Errc::invalid_argument, "payment day must be non-negative");
    return req;
}

nlohmann::json score_event_log(const EngineConfig& config, const std::string& ndjson,
                               const std::string& user) {
    config.validate();

    std::istringstream in(ndjson);
    std::string line;
    std::size_t line_no = 0;
    std::vector<MobileEvent> events;
    std::set<std::string> users_seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            MobileEvent e;
            e.user = j.at("user").get<std::string>();
            e.day = j.at("day").get<long>();
            e.kind = j.at("kind").get<std::string>();
            e.count = j.at("count").get<long>();
            e.transfer = j.value("transfer", std::string());
            if (e.user.empty() || e.kind.empty() || e.count < 0 || e.day < 0)
                fail(Errc::data, "bad event fields");
            users_seen.insert(e.user);
            events.push_back(std::move(e));
        } catch (const Error& e) {
            fail(Errc::data, "line " + std::to_string(line_no) + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            fail(Errc::data, "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (events.empty())
        fail(Errc::data, "event log is empty");

    std::string target = user;
    if (target.empty()) {
        if (users_seen.size() != 1)
            fail(Errc::invalid_argument,
                 "event log covers " + std::to_string(users_seen.size()) +
                     " users; name one explicitly");
        target = *users_seen.begin();
    } else if (!users_seen.count(target)) {
        fail(Errc::not_found, "no events for user '" + target + "' in the log");
    }

    const std::size_t window_len = config.score.window_len;
    std::map<std::string, ParamSeries> series;
    long today_day = -1;
    for (const MobileEvent& e : events) {
        if (e.user != target)
            continue;
        series[e.kind].add(e.day, e.count, window_len + 1);
        today_day = std::max(today_day, e.day);
    }

    std::map<std::string, BehaviorWindow> windows;
    std::map<std::string, long> today;
    for (auto& [kind, s] : series) {
        s.advance_to(today_day, window_len + 1);
        windows.emplace(kind, s.window_before(today_day, window_len, kind));
        today[kind] = s.value_on(today_day);
    }

    ScoreDayResult scored = score_day(windows, today, config.score);
    nlohmann::json per_parameter = nlohmann::json::array();
    for (const auto& p : scored.score.per_parameter)
        per_parameter.push_back({{"kind", p.kind},
                                 {"prev_avg", p.prev_avg},
                                 {"new_avg", p.new_avg},
                                 {"score", p.score}});
    return {{"user", target},
            {"day", today_day},
            {"per_parameter", per_parameter},
            {"aggregate", scored.score.aggregate}};
}

Engine::Engine(EngineConfig config) : config_(std::move(config)),
      store_(StoreConfig{config_.score.window_len, config_.hmm.window_len},
             config_.data_dir ? std::optional<std::filesystem::path>(*config_.data_dir)
                              : std::nullopt) {
    config_.validate();
}

namespace {

void fit_spending(UserProfile& profile, const HmmConfig& cfg) {
    profile.quantizer = fit_quantizer(profile.train_amounts);
    std::vector<SpendingSymbol> symbols;
    symbols.reserve(profile.train_amounts.size());
    for (double a : profile.train_amounts)
        symbols.push_back(quantize(a, *profile.quantizer));

    TrainOptions opts;
    opts.max_iters = cfg.max_iters;
    opts.tol = cfg.tol;
    opts.seed = cfg.seed;
    profile.hmm = baum_welch(symbols, cfg.n_states, opts).params;

    profile.obs_window.window_len = cfg.window_len;
    profile.obs_window.symbols.clear();
    std::size_t start = symbols.size() > cfg.window_len ? symbols.size() - cfg.window_len : 0;
    for (std::size_t i = start; i < symbols.size(); ++i)
        profile.obs_window.symbols.push_back(symbols[i]);
    profile.train_amounts.clear();
}

} // namespace

struct Engine::Decision {
    bool warmup = false;
    bool behavior_ready = false;
    std::size_t train_txns_remaining = 0;
    bool buffered_training = false;

    AuthScore score;
    Verdict verdict;
    DecisionRecord record;
    std::optional<int> committed_symbol;
};

Engine::Decision Engine::decide_payment(UserProfile& profile,
                                        const PaymentRequest& request) const {
    const std::size_t window_len = config_.score.window_len;

    for (const auto& [kind, series] : profile.series)
        if (request.day < series.last_day)
            fail(Errc::data, "payment day " + std::to_string(request.day) +
                                 " is older than gathered data for '" + kind + "'");
    if (request.day < profile.last_txn_day)
        fail(Errc::data, "payment day " + std::to_string(request.day) +
                             " is older than an already processed transaction");

    for (auto& [kind, series] : profile.series) {
        (void)kind;
        series.advance_to(request.day, window_len + 1);
    }

    Decision d;
    d.behavior_ready = !profile.series.empty();
    for (const auto& [kind, series] : profile.series) {
        (void)kind;
        if (!series.covers_window_before(request.day, window_len))
            d.behavior_ready = false;
    }

    if (!d.behavior_ready || !profile.spending_ready()) {
        d.warmup = true;
        if (!profile.spending_ready()) {
            profile.train_amounts.push_back(request.amount);
            d.buffered_training = true;
            if (profile.train_amounts.size() >= config_.hmm.train_txns)
                fit_spending(profile, config_.hmm);
        }
        d.train_txns_remaining = profile.spending_ready()
                                     ? 0
                                     : config_.hmm.train_txns - profile.train_amounts.size();
        profile.last_txn_day = request.day;
        return d;
    }

    std::map<std::string, BehaviorWindow> windows;
    std::map<std::string, long> today;
    for (const auto& [kind, series] : profile.series) {
        windows.emplace(kind, series.window_before(request.day, window_len, kind));
        today[kind] = series.value_on(request.day);
    }
    ScoreDayResult scored = score_day(windows, today, config_.score);
    d.score = scored.score;

    EscalationHook hook = [&]() -> EscalationOutcome {
        if (!profile.spending_ready())
            fail(Errc::internal, "spending profile unavailable");
        if (!profile.obs_window.warmed())
            fail(Errc::internal, "spending observation window is not warmed");
        SpendingSymbol symbol = quantize(request.amount, *profile.quantizer);
        DeviationVerdict dv =
            deviation_check(*profile.hmm, profile.obs_window, symbol, config_.hmm.theta);
        if (!dv.is_fraud) {
            // Accepted transactions join the spending sequence; flagged ones
            // leave the window untouched.
            profile.obs_window = dv.updated_window;
            d.committed_symbol = static_cast<int>(symbol);
        }
        return {dv.is_fraud, dv.alpha_prev, dv.alpha_new, dv.delta};
    };

    switch (config_.detector) {
    case DetectorMode::hybrid: {
        auto [verdict, record] = decide(d.score, config_.thresholds, hook);
        d.verdict = verdict;
        d.record = record;
        break;
    }
    case DetectorMode::hmm_only: {
        // Degenerate thresholds: every score lands in the escalation band.
        auto [verdict, record] = decide(d.score, Thresholds{0.0, 100.0}, hook);
        d.verdict = verdict;
        d.record = record;
        break;
    }
    case DetectorMode::mobile_only: {
        bool accept = d.score.aggregate > config_.thresholds.t2;
        d.verdict.outcome = accept ? Outcome::accept : Outcome::reject;
        d.verdict.case_label = accept ? CaseLabel::direct_accept : CaseLabel::direct_reject;
        d.verdict.auth_score = d.score.aggregate;
        d.record.case_label = d.verdict.case_label;
        d.record.outcome = d.verdict.outcome;
        d.record.auth_score = d.score.aggregate;
        break;
    }
    }

    profile.last_txn_day = request.day;
    return d;
}

nlohmann::json Engine::handle_payment(const PaymentRequest& request) {
    {
        std::lock_guard lock(txn_ids_mutex_);
        if (!seen_txn_ids_.insert(request.txn).second)
            fail(Errc::data, "duplicate transaction id '" + request.txn + "'");
    }

    Decision d;
    nlohmann::json snapshot;
    try {
        if (!store_.has_user(request.user))
            fail(Errc::not_found, "unknown user '" + request.user + "'");
        store_.mutate_profile(request.user, false, [&](UserProfile& profile) {
            // Snapshot before any mutation from this payment, so the trace
            // can replay the decision against the exact pre-decision state.
            // Day advancement is deterministic, so it happens inside the
            // replayed decision as well.
            snapshot = profile_to_json(profile, store_.config());
            d = decide_payment(profile, request);
        });
    } catch (...) {
        std::lock_guard lock(txn_ids_mutex_);
        seen_txn_ids_.erase(request.txn); // a rejected request does not consume the id
        throw;
    }

    store_.record_txn({request.user, request.txn, request.day, request.amount, request.location,
                       d.buffered_training});

    nlohmann::json trace = {{"txn", request.txn},
                            {"user", request.user},
                            {"day", request.day},
                            {"amount", request.amount},
                            {"location", request.location},
                            {"ts", now_epoch_seconds()},
                            {"detector", to_string(config_.detector)},
                            {"thresholds",
                             {{"t1", config_.thresholds.t1}, {"t2", config_.thresholds.t2}}},
                            {"profile_snapshot", snapshot}};

    if (d.warmup) {
        trace["status"] = "warmup_required";
        trace["behavior_ready"] = d.behavior_ready;
        trace["train_txns_remaining"] = d.train_txns_remaining;
        std::string id = persist_trace(std::move(trace));
        return {{"txn", request.txn},
                {"status", "warmup_required"},
                {"behavior_ready", d.behavior_ready},
                {"train_txns_remaining", d.train_txns_remaining},
                {"trace", id}};
    }

    trace["status"] = "decided";
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& s : d.score.per_parameter)
        scores.push_back({{"kind", s.kind},
                          {"prev_avg", s.prev_avg},
                          {"new_avg", s.new_avg},
                          {"score", s.score}});
    trace["scores"] = scores;
    trace["aggregate"] = d.score.aggregate;
    trace["case"] = to_string(d.record.case_label);
    trace["verdict"] = to_string(d.record.outcome);
    trace["alpha_prev"] = d.record.alpha_prev ? nlohmann::json(*d.record.alpha_prev)
                                              : nlohmann::json(nullptr);
    trace["alpha_new"] =
        d.record.alpha_new ? nlohmann::json(*d.record.alpha_new) : nlohmann::json(nullptr);
    trace["delta"] = d.record.delta ? nlohmann::json(*d.record.delta) : nlohmann::json(nullptr);
    trace["committed_symbol"] =
        d.committed_symbol ? nlohmann::json(*d.committed_symbol) : nlohmann::json(nullptr);
    trace["annotation"] = d.record.annotation.empty() ? nlohmann::json(nullptr)
                                                      : nlohmann::json(d.record.annotation);

    std::string id = persist_trace(std::move(trace));
    return {{"txn", request.txn},
            {"verdict", to_string(d.verdict.outcome)},
            {"case", to_string(d.verdict.case_label)},
            {"score", d.score.aggregate},
            {"delta",
             d.verdict.hmm_delta ? nlohmann::json(*d.verdict.hmm_delta) : nlohmann::json(nullptr)},
            {"trace", id}};
}

nlohmann::json Engine::ingest_events(const std::string& ndjson) {
    EventBatch batch;
    std::istringstream in(ndjson);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(Errc::data, "line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        MobileEvent event;
        try {
            check_keys(j, {"user", "day", "kind", "count", "transfer"}, "event line");
            event.user = j.at("user").get<std::string>();
            event.day = j.at("day").get<long>();
            event.kind = j.at("kind").get<std::string>();
            event.count = j.at("count").get<long>();
            event.transfer = j.at("transfer").get<std::string>();
        } catch (const Error& e) {
            fail(Errc::data, "line " + std::to_string(line_no) + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            fail(Errc::data, "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (event.transfer.empty())
            fail(Errc::data, "line " + std::to_string(line_no) + ": empty transfer id");
        if (batch.events.empty())
            batch.transfer_id = event.transfer;
        else if (event.transfer != batch.transfer_id)
            fail(Errc::data, "line " + std::to_string(line_no) +
                                 ": transfer id differs from the batch's ('" + event.transfer +
                                 "' vs '" + batch.transfer_id + "')");
        batch.events.push_back(std::move(event));
    }
    if (batch.events.empty())
        fail(Errc::data, "event batch is empty");

    ProfileStore::IngestResult result = store_.ingest_batch(batch);
    return {{"transfer", result.transfer}, {"accepted", result.accepted}};
}

nlohmann::json Engine::profile_json(const std::string& user) const {
    return profile_to_json(store_.load_profile(user), store_.config());
}

nlohmann::json Engine::trace_json(const std::string& trace_id) const {
    std::lock_guard lock(traces_mutex_);
    auto it = trace_index_.find(trace_id);
    if (it == trace_index_.end())
        fail(Errc::not_found, "unknown trace '" + trace_id + "'");
    return traces_[it->second];
}

nlohmann::json Engine::train_users(const std::string& txns_ndjson) {
    std::istringstream in(txns_ndjson);
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, std::vector<double>> amounts;
    std::map<std::string, long> last_day;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            std::string user = j.at("user").get<std::string>();
            double amount = j.at("amount").get<double>();
            long day = j.contains("day") ? j.at("day").get<long>() : 0;
            if (user.empty() || amount < 0 || !std::isfinite(amount))
                fail(Errc::data, "bad user or amount");
            amounts[user].push_back(amount);
            last_day[user] = std::max(last_day[user], day);
        } catch (const Error& e) {
            fail(Errc::data, "line " + std::to_string(line_no) + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            fail(Errc::data, "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (amounts.empty())
        fail(Errc::data, "transaction log is empty");

    nlohmann::json summary = nlohmann::json::array();
    for (const auto& [user, list] : amounts) {
        train_user_amounts(user, list, last_day[user]);
        UserProfile p = store_.load_profile(user);
        summary.push_back({{"user", user},
                           {"txns", list.size()},
                           {"centroids", p.quantizer->centroids},
                           {"obs_window_len", p.obs_window.symbols.size()}});
    }
    return summary;
}

void Engine::train_user_amounts(const std::string& user, const std::vector<double>& amounts,
                                long last_day) {
    if (user.empty())
        fail(Errc::invalid_argument, "user id is empty");
    if (amounts.size() < 2)
        fail(Errc::data, "training needs at least two transactions for user '" + user + "'");
    if (store_.has_user(user)) {
        UserProfile existing = store_.load_profile(user);
        if (existing.spending_ready())
            fail(Errc::data, "user '" + user + "' already has a fitted spending profile");
        if (!existing.train_amounts.empty())
            fail(Errc::data, "user '" + user + "' already has buffered warm-up transactions");
    }
    std::size_t seq = 0;
    for (double a : amounts)
        store_.record_txn({user, user + "-train-" + std::to_string(++seq), last_day, a, "", true});
    store_.mutate_profile(user, true, [&](UserProfile& profile) {
        profile.train_amounts = amounts;
        fit_spending(profile, config_.hmm);
        profile.last_txn_day = std::max(profile.last_txn_day, last_day);
    });
}

nlohmann::json Engine::replay_trace(const nlohmann::json& trace) const {
    UserProfile profile;
    PaymentRequest request;
    try {
        profile = profile_from_json(trace.at("profile_snapshot"), store_.config());
        request.txn = trace.at("txn").get<std::string>();
        request.user = trace.at("user").get<std::string>();
        request.amount = trace.at("amount").get<double>();
        request.location = trace.at("location").get<std::string>();
        request.day = trace.at("day").get<long>();
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::data, std::string("trace is not replayable: ") + e.what());
    }

    Decision d = decide_payment(profile, request);
    if (d.warmup)
        return {{"txn", request.txn},
                {"status", "warmup_required"},
                {"behavior_ready", d.behavior_ready},
                {"train_txns_remaining", d.train_txns_remaining},
                {"trace", nullptr}};
    return {{"txn", request.txn},
            {"verdict", to_string(d.verdict.outcome)},
            {"case", to_string(d.verdict.case_label)},
            {"score", d.score.aggregate},
            {"delta",
             d.verdict.hmm_delta ? nlohmann::json(*d.verdict.hmm_delta) : nlohmann::json(nullptr)},
            {"trace", nullptr}};
}

UserProfile Engine::rebuild_profile(const std::string& user) const {
    UserProfile live = store_.load_profile(user);

    UserProfile rebuilt;
    rebuilt.user = user;
    rebuilt.obs_window.window_len = config_.hmm.window_len;

    const std::size_t cap = config_.score.window_len + 1;
    for (const MobileEvent& e : store_.event_log())
        if (e.user == user)
            rebuilt.series[e.kind].add(e.day, e.count, cap);

    // Replay the transaction log: every request advances the day horizon
    // (zero-filling quiet days exactly as the live path did), and the
    // training-flagged amounts rebuild the fit buffer.
    for (const TxnRecord& t : store_.txn_log()) {
        if (t.user != user)
            continue;
        for (auto& [kind, series] : rebuilt.series) {
            (void)kind;
            series.advance_to(t.day, cap);
        }
        if (t.training)
            rebuilt.train_amounts.push_back(t.amount);
        rebuilt.last_txn_day = std::max(rebuilt.last_txn_day, t.day);
    }

    if (live.spending_ready()) {
        fit_spending(rebuilt, config_.hmm);
        // Escalated-and-accepted transactions joined the spending sequence;
        // re-apply them in decision order from the trace log.
        for (const nlohmann::json& trace : traces()) {
            if (trace.at("user").get<std::string>() != user)
                continue;
            if (!trace.contains("committed_symbol") || trace.at("committed_symbol").is_null())
                continue;
            int symbol = trace.at("committed_symbol").get<int>();
            rebuilt.obs_window.symbols.pop_front();
            rebuilt.obs_window.symbols.push_back(static_cast<SpendingSymbol>(symbol));
        }
    }
    return rebuilt;
}

std::vector<std::string> Engine::trace_ids() const {
    std::lock_guard lock(traces_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, idx] : trace_index_) {
        (void)idx;
        out.push_back(id);
    }
    return out;
}

std::vector<nlohmann::json> Engine::traces() const {
    std::lock_guard lock(traces_mutex_);
    return traces_;
}

std::string Engine::persist_trace(nlohmann::json trace) {
    std::lock_guard lock(traces_mutex_);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "t%06llu", static_cast<unsigned long long>(++trace_seq_));
    std::string id(buf);
    trace["trace"] = id;
    if (store_.root()) {
        std::ofstream out(*store_.root() / "traces.ndjson", std::ios::app);
        out << trace.dump() << "\n";
    }
    trace_index_[id] = traces_.size();
    traces_.push_back(std::move(trace));
    return id;
}

} // namespace frauddet
