#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "behavior.hpp"
#include "cascade.hpp"
#include "hmm.hpp"
#include "store.hpp"

namespace frauddet {

struct HmmConfig {
    std::size_t n_states = 3;
    std::size_t window_len = 10; // observation window R
    double theta = 0.5;          // deviation threshold
    std::size_t train_txns = 50; // warm-up transactions assumed legitimate
    std::size_t max_iters = 100;
    double tol = 1e-6;
    std::uint64_t seed = 20210914;
};

/// hybrid is the two-threshold cascade; the other two are the comparison
/// baselines: a single strict accept threshold at t2, and an always-escalate
/// detector that ignores the behavioral score.
enum class DetectorMode { hybrid, mobile_only, hmm_only };

const char* to_string(DetectorMode m);

struct EngineConfig {
    ScoreConfig score;
    Thresholds thresholds;
    HmmConfig hmm;
    DetectorMode detector = DetectorMode::hybrid;
    std::optional<std::string> data_dir;

    static EngineConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
};

struct PaymentRequest {
    std::string txn;
    std::string user;
    double amount = 0.0;
    std::string location;
    long day = 0;
};

PaymentRequest payment_request_from_json(const nlohmann::json& j);

/// One-shot authentication score from an event log: the log's final day is
/// treated as "today" and scored against the window of the days before it.
/// Pass an empty user when the log covers exactly one user.
nlohmann::json score_event_log(const EngineConfig& config, const std::string& ndjson,
                               const std::string& user);

/// Ties the blocks together the way the service runs them: the checker pulls
/// the gathered behavior, scores it, and the decider walks the threshold
/// cascade, escalating to the spending model when the score is ambiguous.
/// Every response is backed by an append-only trace sufficient to replay it.
class Engine {
public:
    explicit Engine(EngineConfig config);

    /// Newline-delimited event-log lines, one batch per call (all lines must
    /// carry the same transfer id). Returns {"transfer", "accepted"}.
    nlohmann::json ingest_events(const std::string& ndjson);

    /// Full payment decision. Unwarmed profiles receive a dedicated
    /// warm-up response (their amounts feed spending-profile training);
    /// warmed profiles receive a verdict response.
    nlohmann::json handle_payment(const PaymentRequest& request);

    nlohmann::json profile_json(const std::string& user) const;
    nlohmann::json trace_json(const std::string& trace_id) const;

    /// Offline spending-model fit from a transaction log (newline-delimited
    /// JSON objects with user/day/amount). Returns a per-user summary.
    nlohmann::json train_users(const std::string& txns_ndjson);
    void train_user_amounts(const std::string& user, const std::vector<double>& amounts,
                            long last_day = 0);

    /// Re-runs the decision recorded in a trace against the profile snapshot
    /// stored inside it. Returns the reproduced response.
    nlohmann::json replay_trace(const nlohmann::json& trace) const;

    /// Rebuilds the user's profile from the append-only logs (events,
    /// transactions, decision traces) instead of the incremental state.
    UserProfile rebuild_profile(const std::string& user) const;

    std::vector<std::string> trace_ids() const;
    std::vector<nlohmann::json> traces() const;

    ProfileStore& store() { return store_; }
    const ProfileStore& store() const { return store_; }
    const EngineConfig& config() const { return config_; }

private:
    struct Decision;

    Decision decide_payment(UserProfile& profile, const PaymentRequest& request) const;
    std::string persist_trace(nlohmann::json trace);

    EngineConfig config_;
    ProfileStore store_;

    mutable std::mutex traces_mutex_;
    std::vector<nlohmann::json> traces_;
    std::map<std::string, std::size_t> trace_index_;
    std::uint64_t trace_seq_ = 0;

    mutable std::mutex txn_ids_mutex_;
    std::unordered_set<std::string> seen_txn_ids_;
};

} // namespace frauddet
