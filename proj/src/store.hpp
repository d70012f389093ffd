#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "behavior.hpp"
#include "hmm.hpp"

namespace frauddet {

/// One daily activity observation collected on the device.
struct MobileEvent {
    std::string user;
    long day = 0; // integer days since epoch, supplied by the event source
    std::string kind;
    long count = 0;
    std::string transfer; // id of the batch that delivered the event
};

struct EventBatch {
    std::string device;
    std::vector<MobileEvent> events; // day-ordered per user
    std::string transfer_id;
};

struct TxnRecord {
    std::string user;
    std::string txn;
    long day = 0;
    double amount = 0.0;
    std::string location;
    bool training = false; // fed the spending-profile fit rather than a decision
};

/// Device-side staging area: activity is held locally until the gatherer
/// acknowledges a full batch, and only then erased.
class DeviceBuffer {
public:
    explicit DeviceBuffer(std::string device_id) : device_id_(std::move(device_id)) {}

    void record(MobileEvent event);
    std::size_t pending() const { return pending_.size(); }

    /// Packs the pending events into a batch with a fresh transfer id and
    /// hands it to `deliver`. The local copy is erased only after `deliver`
    /// returns true; a failed or interrupted transfer leaves it intact.
    EventBatch transfer_and_erase(const std::function<bool(const EventBatch&)>& deliver);

private:
    std::string device_id_;
    std::vector<MobileEvent> pending_;
    std::uint64_t seq_ = 0;
};

/// Daily totals of one behavioral parameter, aligned to day indices. Keeps
/// the trailing window plus the currently accumulating day.
struct ParamSeries {
    long first_day = -1;
    long last_day = -1;
    std::deque<long> slots; // totals for days [last_day - slots.size() + 1, last_day]

    bool empty() const { return slots.empty(); }
    void advance_to(long day, std::size_t cap);
    void add(long day, long count, std::size_t cap);
    long value_on(long day) const;
    /// Window of the `window_len` days strictly before `day`. Requires the
    /// series to have been advanced to `day` and to cover the span.
    BehaviorWindow window_before(long day, std::size_t window_len, const std::string& kind) const;
    bool covers_window_before(long day, std::size_t window_len) const;
};

struct UserProfile {
    std::string user;
    std::map<std::string, ParamSeries> series;

    // Spending side: amounts buffered during warm-up, then the fitted model.
    std::vector<double> train_amounts;
    std::optional<AmountQuantizer> quantizer;
    std::optional<HmmParams> hmm;
    ObservationWindow obs_window;
    long last_txn_day = -1;

    bool behavior_warm(std::size_t window_len) const;
    bool spending_ready() const { return hmm.has_value() && quantizer.has_value(); }
};

struct StoreConfig {
    std::size_t window_len = 7;     // behavior window W
    std::size_t obs_window_len = 10; // spending observation window R
};

nlohmann::json profile_to_json(const UserProfile& profile, const StoreConfig& config);
UserProfile profile_from_json(const nlohmann::json& snapshot, const StoreConfig& config);

/// Per-user profile state plus the append-only event and transaction logs.
/// All mutation of one user's profile is serialized through that user's
/// lock; distinct users proceed independently. With a root directory set,
/// snapshots and logs persist under it.
class ProfileStore {
public:
    explicit ProfileStore(StoreConfig config,
                          std::optional<std::filesystem::path> root = std::nullopt);

    struct IngestResult {
        std::string transfer;
        std::size_t accepted = 0;
    };

    /// Merges a batch into the profiles: counts accumulate additively per
    /// (user, day, kind). Atomic — a bad record rejects the whole batch —
    /// and idempotent per transfer id.
    IngestResult ingest_batch(const EventBatch& batch);

    bool has_user(const std::string& user) const;
    /// Copy of the profile, for reads. Unknown user is a not-found error.
    UserProfile load_profile(const std::string& user) const;
    /// Runs `fn` with exclusive access to the profile and persists the
    /// result. Unknown user is a not-found error unless `create` is set.
    void mutate_profile(const std::string& user, bool create,
                        const std::function<void(UserProfile&)>& fn);
    void save_profile(const UserProfile& profile);

    void record_txn(const TxnRecord& txn);

    std::vector<MobileEvent> event_log() const;
    std::vector<TxnRecord> txn_log() const;
    std::vector<std::string> users() const;
    const StoreConfig& config() const { return config_; }
    const std::optional<std::filesystem::path>& root() const { return root_; }

private:
    struct Entry {
        mutable std::mutex mutex;
        UserProfile profile;
    };

    std::shared_ptr<Entry> entry(const std::string& user, bool create) const;
    void persist_profile_locked(const UserProfile& profile);
    void append_event_lines(const std::vector<MobileEvent>& events);

    StoreConfig config_;
    std::optional<std::filesystem::path> root_;

    mutable std::shared_mutex map_mutex_;
    mutable std::map<std::string, std::shared_ptr<Entry>> profiles_;

    mutable std::mutex transfers_mutex_;
    std::set<std::string> seen_transfers_;

    mutable std::mutex log_mutex_;
    std::vector<MobileEvent> event_log_;
    std::vector<TxnRecord> txn_log_;
};

} // namespace frauddet
