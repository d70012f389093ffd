#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

namespace frauddet {

/// Built-in behavioral parameter names. Profiles may track additional
/// user-defined parameters; any non-empty name flows through the same math.
namespace param {
inline constexpr const char* calls = "calls";
inline constexpr const char* sms = "sms";
inline constexpr const char* web = "web";
inline constexpr const char* location_presence = "location_presence";
} // namespace param

/// Sliding window of daily activity counts for one behavioral parameter.
/// Holds the most recent `window_len` daily totals, oldest first.
struct BehaviorWindow {
    std::string kind;
    std::deque<long> values;
    std::size_t window_len = 7;

    bool warmed() const { return values.size() == window_len; }
};

struct ScoreConfig {
    enum class DeviationMode { signed_mode, absolute };

    std::size_t window_len = 7;
    DeviationMode deviation_mode = DeviationMode::signed_mode;
    // Score used when both averages are zero (no activity matching no activity).
    double zero_baseline_score = 100.0;
    // Per-parameter aggregation weights; empty means uniform.
    std::map<std::string, double> weights;

    double weight_for(const std::string& kind) const;
};

struct ParameterScore {
    std::string kind;
    double prev_avg = 0.0;
    double new_avg = 0.0;
    double score = 0.0; // percentage of matching, clamped to [0,100]
};

struct AuthScore {
    std::vector<ParameterScore> per_parameter;
    double aggregate = 0.0;
};

/// Arithmetic mean of the window's daily counts. Errors on an empty window
/// (profile not warmed).
double window_average(const BehaviorWindow& window);

/// Drops the oldest value and appends `new_value`; length is unchanged.
BehaviorWindow slide(const BehaviorWindow& window, long new_value);

/// Percentage of matching between the past and recent averages.
/// Signed mode (default): 100 - 100*(prev - new)/prev, clamped to [0,100],
/// so activity above the historical average never lowers the score.
/// Absolute mode penalizes deviation in either direction.
ParameterScore parameter_score(const std::string& kind, double prev_avg, double new_avg,
                               const ScoreConfig& config);

/// Weighted mean of per-parameter scores (uniform by default).
AuthScore aggregate_score(std::vector<ParameterScore> scores, const ScoreConfig& config);

struct ScoreDayResult {
    AuthScore score;
    std::map<std::string, BehaviorWindow> slid_windows;
};

/// Scores one day of activity against the per-parameter windows: for each
/// parameter the previous average comes from the current window, the window
/// is slid with today's count, and the two averages are compared. Parameters
/// missing from `today` count as zero activity; a `today` parameter without a
/// warmed window is an error naming the parameter.
ScoreDayResult score_day(const std::map<std::string, BehaviorWindow>& windows,
                         const std::map<std::string, long>& today, const ScoreConfig& config);

} // namespace frauddet
