#include "store.hpp"

#include <algorithm>
#include <fstream>

#include "error.hpp"

namespace frauddet {

namespace {

void validate_event_fields(const MobileEvent& e) {
    if (e.user.empty())
        fail(Errc::data, "event has an empty user");
    if (e.kind.empty())
        fail(Errc::data, "event has an empty kind");
    if (e.count < 0)
        fail(Errc::data, "event has a negative count");
    if (e.day < 0)
        fail(Errc::data, "event has a negative day index");
}

nlohmann::json event_to_json(const MobileEvent& e) {
    return {{"user", e.user}, {"day", e.day},           {"kind", e.kind},
            {"count", e.count}, {"transfer", e.transfer}};
}

} // namespace

void DeviceBuffer::record(MobileEvent event) {
    validate_event_fields(event);
    if (!pending_.empty() && event.user == pending_.back().user &&
        event.day < pending_.back().day)
        fail(Errc::data, "device events must be recorded in day order");
    pending_.push_back(std::move(event));
}

EventBatch DeviceBuffer::transfer_and_erase(const std::function<bool(const EventBatch&)>& deliver) {
    if (pending_.empty())
        fail(Errc::invalid_argument, "device buffer is empty");

    EventBatch batch;
    batch.device = device_id_;
    batch.transfer_id = device_id_ + "-" + std::to_string(++seq_);
    batch.events = pending_;
    for (auto& e : batch.events)
        e.transfer = batch.transfer_id;

    if (!deliver(batch))
        fail(Errc::data, "transfer " + batch.transfer_id +
                             " was not acknowledged; device buffer retained");
    pending_.clear();
    return batch;
}

void ParamSeries::advance_to(long day, std::size_t cap) {
    if (slots.empty() || day <= last_day)
        return;
    if (day - last_day >= static_cast<long>(cap)) {
        slots.assign(cap, 0);
        last_day = day;
        return;
    }
    while (last_day < day) {
        slots.push_back(0);
        ++last_day;
        if (slots.size() > cap)
            slots.pop_front();
    }
}

void ParamSeries::add(long day, long count, std::size_t cap) {
    if (slots.empty()) {
        first_day = last_day = day;
        slots.push_back(count);
        return;
    }
    if (day > last_day) {
        advance_to(day, cap);
        slots.back() += count;
        return;
    }
    long front_day = last_day - static_cast<long>(slots.size()) + 1;
    if (day < front_day)
        fail(Errc::data, "event for day " + std::to_string(day) +
                             " is older than the retained window (oldest " +
                             std::to_string(front_day) + ")");
    slots[static_cast<std::size_t>(day - front_day)] += count;
}

long ParamSeries::value_on(long day) const {
    if (slots.empty())
        return 0;
    long front_day = last_day - static_cast<long>(slots.size()) + 1;
    if (day < front_day || day > last_day)
        return 0;
    return slots[static_cast<std::size_t>(day - front_day)];
}

bool ParamSeries::covers_window_before(long day, std::size_t window_len) const {
    if (slots.empty())
        return false;
    long front_day = last_day - static_cast<long>(slots.size()) + 1;
    return front_day <= day - static_cast<long>(window_len) && last_day >= day - 1;
}

BehaviorWindow ParamSeries::window_before(long day, std::size_t window_len,
                                          const std::string& kind) const {
    if (!covers_window_before(day, window_len))
        fail(Errc::not_warm, "series '" + kind + "' does not cover the " +
                                 std::to_string(window_len) + " days before day " +
                                 std::to_string(day));
    BehaviorWindow w;
    w.kind = kind;
    w.window_len = window_len;
    for (long d = day - static_cast<long>(window_len); d < day; ++d)
        w.values.push_back(value_on(d));
    return w;
}

bool UserProfile::behavior_warm(std::size_t window_len) const {
    if (series.empty())
        return false;
    for (const auto& [kind, s] : series) {
        (void)kind;
        if (s.slots.size() < window_len)
            return false;
    }
    return true;
}

nlohmann::json profile_to_json(const UserProfile& p, const StoreConfig& config) {
    nlohmann::json windows = nlohmann::json::object();
    nlohmann::json window_days = nlohmann::json::object();
    for (const auto& [kind, s] : p.series) {
        windows[kind] = s.slots;
        window_days[kind] = {{"first", s.first_day}, {"last", s.last_day}};
    }

    nlohmann::json hmm = nullptr;
    if (p.hmm) {
        hmm = {{"n", p.hmm->n_states},
               {"A", p.hmm->transition},
               {"B", p.hmm->emission},
               {"pi", p.hmm->initial}};
    }

    nlohmann::json quantizer = nullptr;
    if (p.quantizer)
        quantizer = p.quantizer->centroids;

    std::vector<int> obs;
    for (SpendingSymbol s : p.obs_window.symbols)
        obs.push_back(static_cast<int>(s));

    return {{"user", p.user},
            {"windows", windows},
            {"window_days", window_days},
            {"hmm", hmm},
            {"quantizer", quantizer},
            {"obs_window", obs},
            {"warm", p.spending_ready() && p.behavior_warm(config.window_len)},
            {"train_amounts", p.train_amounts},
            {"last_txn_day", p.last_txn_day}};
}

UserProfile profile_from_json(const nlohmann::json& snapshot, const StoreConfig& config) {
    UserProfile p;
    try {
        p.user = snapshot.at("user").get<std::string>();
        const auto& windows = snapshot.at("windows");
        const auto& window_days = snapshot.at("window_days");
        for (auto it = windows.begin(); it != windows.end(); ++it) {
            ParamSeries s;
            for (const auto& v : it.value()) {
                long count = v.get<long>();
                if (count < 0)
                    fail(Errc::integrity, "windows." + it.key() + " holds a negative count");
                s.slots.push_back(count);
            }
            const auto& days = window_days.at(it.key());
            s.first_day = days.at("first").get<long>();
            s.last_day = days.at("last").get<long>();
            if (!s.slots.empty() &&
                s.last_day - s.first_day + 1 < static_cast<long>(s.slots.size()))
                fail(Errc::integrity, "window_days." + it.key() + " spans fewer days than slots");
            p.series.emplace(it.key(), std::move(s));
        }

        if (!snapshot.at("hmm").is_null()) {
            HmmParams h;
            const auto& j = snapshot.at("hmm");
            h.n_states = j.at("n").get<std::size_t>();
            h.transition = j.at("A").get<std::vector<std::vector<double>>>();
            h.emission = j.at("B").get<std::vector<std::vector<double>>>();
            h.initial = j.at("pi").get<std::vector<double>>();
            h.validate(); // integrity errors name the offending row
            p.hmm = std::move(h);
        }

        if (!snapshot.at("quantizer").is_null()) {
            AmountQuantizer q;
            q.centroids = snapshot.at("quantizer").get<std::vector<double>>();
            if (q.centroids.empty() || q.centroids.size() > 3 ||
                !std::is_sorted(q.centroids.begin(), q.centroids.end()))
                fail(Errc::integrity, "quantizer centroids must be 1..3 ascending values");
            p.quantizer = std::move(q);
        }

        p.obs_window.window_len = config.obs_window_len;
        for (const auto& v : snapshot.at("obs_window")) {
            int s = v.get<int>();
            if (s < 0 || s >= kSymbolCount)
                fail(Errc::integrity, "obs_window holds an out-of-range symbol");
            p.obs_window.symbols.push_back(static_cast<SpendingSymbol>(s));
        }
        if (p.obs_window.symbols.size() > config.obs_window_len)
            fail(Errc::integrity, "obs_window is longer than the configured window");

        p.train_amounts = snapshot.at("train_amounts").get<std::vector<double>>();
        p.last_txn_day = snapshot.at("last_txn_day").get<long>();

        bool warm = snapshot.at("warm").get<bool>();
        if (warm != (p.spending_ready() && p.behavior_warm(config.window_len)))
            fail(Errc::integrity, "warm flag is inconsistent with the profile contents");
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::integrity, std::string("malformed profile snapshot: ") + e.what());
    }
    return p;
}

ProfileStore::ProfileStore(StoreConfig config, std::optional<std::filesystem::path> root)
    : config_(config), root_(std::move(root)) {
    if (!root_)
        return;
    std::filesystem::create_directories(*root_ / "profiles");
    for (const auto& entry : std::filesystem::directory_iterator(*root_ / "profiles")) {
        if (entry.path().extension() != ".json")
            continue;
        std::ifstream in(entry.path());
        nlohmann::json snapshot = nlohmann::json::parse(in);
        UserProfile p = profile_from_json(snapshot, config_);
        auto e = std::make_shared<Entry>();
        e->profile = std::move(p);
        profiles_.emplace(e->profile.user, std::move(e));
    }
}

std::shared_ptr<ProfileStore::Entry> ProfileStore::entry(const std::string& user,
                                                         bool create) const {
    {
        std::shared_lock lock(map_mutex_);
        auto it = profiles_.find(user);
        if (it != profiles_.end())
            return it->second;
    }
    if (!create)
        fail(Errc::not_found, "unknown user '" + user + "'");
    std::unique_lock lock(map_mutex_);
    auto it = profiles_.find(user);
    if (it != profiles_.end())
        return it->second;
    auto e = std::make_shared<Entry>();
    e->profile.user = user;
    e->profile.obs_window.window_len = config_.obs_window_len;
    profiles_.emplace(user, e);
    return e;
}

ProfileStore::IngestResult ProfileStore::ingest_batch(const EventBatch& batch) {
    if (batch.transfer_id.empty())
        fail(Errc::data, "batch has an empty transfer id");

    {
        std::lock_guard lock(transfers_mutex_);
        if (seen_transfers_.count(batch.transfer_id))
            return {batch.transfer_id, 0}; // replay: already applied
    }

    std::size_t line = 0;
    std::map<std::string, long> last_day_in_batch;
    for (const auto& e : batch.events) {
        ++line;
        try {
            validate_event_fields(e);
        } catch (const Error& err) {
            fail(Errc::data, "line " + std::to_string(line) + ": " + err.what());
        }
        auto it = last_day_in_batch.find(e.user);
        if (it != last_day_in_batch.end() && e.day < it->second)
            fail(Errc::data, "line " + std::to_string(line) + ": events for user '" + e.user +
                                 "' are not day-ordered within the batch");
        last_day_in_batch[e.user] = e.day;
    }

    // Lock every touched user (sorted, so multi-user batches cannot deadlock
    // against each other), validate against current state, then apply.
    std::vector<std::string> users;
    for (const auto& [user, day] : last_day_in_batch) {
        (void)day;
        users.push_back(user);
    }
    std::vector<std::shared_ptr<Entry>> entries;
    std::vector<std::unique_lock<std::mutex>> locks;
    for (const auto& user : users) {
        auto e = entry(user, true);
        locks.emplace_back(e->mutex);
        entries.push_back(std::move(e));
    }

    const std::size_t cap = config_.window_len + 1;
    // Dry run on copies: a stale or inconsistent record rejects the whole
    // batch without touching the live profiles.
    {
        std::map<std::string, std::map<std::string, ParamSeries>> scratch;
        for (std::size_t i = 0; i < users.size(); ++i)
            scratch[users[i]] = entries[i]->profile.series;
        line = 0;
        for (const auto& e : batch.events) {
            ++line;
            try {
                scratch[e.user][e.kind].add(e.day, e.count, cap);
            } catch (const Error& err) {
                fail(Errc::data, "line " + std::to_string(line) + ": " + err.what());
            }
        }
    }

    for (const auto& e : batch.events) {
        auto idx = std::lower_bound(users.begin(), users.end(), e.user) - users.begin();
        entries[static_cast<std::size_t>(idx)]->profile.series[e.kind].add(e.day, e.count, cap);
    }
    for (std::size_t i = 0; i < users.size(); ++i)
        persist_profile_locked(entries[i]->profile);

    {
        std::lock_guard lock(transfers_mutex_);
        seen_transfers_.insert(batch.transfer_id);
    }
    append_event_lines(batch.events);
    return {batch.transfer_id, batch.events.size()};
}

bool ProfileStore::has_user(const std::string& user) const {
    std::shared_lock lock(map_mutex_);
    return profiles_.count(user) > 0;
}

UserProfile ProfileStore::load_profile(const std::string& user) const {
    auto e = entry(user, false);
    std::lock_guard lock(e->mutex);
    return e->profile;
}

void ProfileStore::mutate_profile(const std::string& user, bool create,
                                  const std::function<void(UserProfile&)>& fn) {
    auto e = entry(user, create);
    std::lock_guard lock(e->mutex);
    fn(e->profile);
    persist_profile_locked(e->profile);
}

void ProfileStore::save_profile(const UserProfile& profile) {
    if (profile.user.empty())
        fail(Errc::invalid_argument, "profile has an empty user id");
    auto e = entry(profile.user, true);
    std::lock_guard lock(e->mutex);
    e->profile = profile;
    persist_profile_locked(e->profile);
}

void ProfileStore::persist_profile_locked(const UserProfile& profile) {
    if (!root_)
        return;
    nlohmann::json snapshot = profile_to_json(profile, config_);
    std::ofstream out(*root_ / "profiles" / (profile.user + ".json"));
    out << snapshot.dump(2) << "\n";
}

void ProfileStore::append_event_lines(const std::vector<MobileEvent>& events) {
    std::lock_guard lock(log_mutex_);
    event_log_.insert(event_log_.end(), events.begin(), events.end());
    if (!root_)
        return;
    std::ofstream out(*root_ / "events.ndjson", std::ios::app);
    for (const auto& e : events)
        out << event_to_json(e).dump() << "\n";
}

void ProfileStore::record_txn(const TxnRecord& txn) {
    std::lock_guard lock(log_mutex_);
    txn_log_.push_back(txn);
    if (!root_)
        return;
    std::ofstream out(*root_ / "txns.ndjson", std::ios::app);
    out << nlohmann::json({{"user", txn.user},
                           {"txn", txn.txn},
                           {"day", txn.day},
                           {"amount", txn.amount},
                           {"location", txn.location},
                           {"training", txn.training}})
               .dump()
        << "\n";
}

std::vector<MobileEvent> ProfileStore::event_log() const {
    std::lock_guard lock(log_mutex_);
    return event_log_;
}

std::vector<TxnRecord> ProfileStore::txn_log() const {
    std::lock_guard lock(log_mutex_);
    return txn_log_;
}

std::vector<std::string> ProfileStore::users() const {
    std::shared_lock lock(map_mutex_);
    std::vector<std::string> out;
    for (const auto& [user, e] : profiles_) {
        (void)e;
        out.push_back(user);
    }
    return out;
}

} // namespace frauddet
