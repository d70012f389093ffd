#include "behavior.hpp"

#include <algorithm>
#include <numeric>

#include "error.hpp"

namespace frauddet {

double ScoreConfig::weight_for(const std::string& kind) const {
    if (weights.empty())
        return 1.0;
    auto it = weights.find(kind);
    return it == weights.end() ? 1.0 : it->second;
}

double window_average(const BehaviorWindow& window) {
    if (window.values.empty())
        fail(Errc::not_warm, "behavior window for '" + window.kind + "' is empty");
    long sum = std::accumulate(window.values.begin(), window.values.end(), 0L);
    return static_cast<double>(sum) / static_cast<double>(window.values.size());
}

BehaviorWindow slide(const BehaviorWindow& window, long new_value) {
    if (new_value < 0)
        fail(Errc::invalid_argument, "negative daily count for '" + window.kind + "'");
    if (window.values.empty())
        fail(Errc::not_warm, "cannot slide empty window for '" + window.kind + "'");
    BehaviorWindow out = window;
    out.values.pop_front();
    out.values.push_back(new_value);
    return out;
}

ParameterScore parameter_score(const std::string& kind, double prev_avg, double new_avg,
                               const ScoreConfig& config) {
    if (prev_avg < 0 || new_avg < 0)
        fail(Errc::invalid_argument, "averages must be non-negative for '" + kind + "'");

    double raw;
    if (prev_avg == 0.0) {
        // Division by zero in the matching formula; resolved by configuration:
        // silence matching silence is a perfect match, any activity after
        // silence is a maximal mismatch.
        raw = (new_avg == 0.0) ? config.zero_baseline_score : 0.0;
    } else {
        double dev = prev_avg - new_avg;
        if (config.deviation_mode == ScoreConfig::DeviationMode::absolute)
            dev = std::abs(dev);
        raw = 100.0 - 100.0 * dev / prev_avg;
    }

    ParameterScore out;
    out.kind = kind;
    out.prev_avg = prev_avg;
    out.new_avg = new_avg;
    out.score = std::clamp(raw, 0.0, 100.0);
    return out;
}

AuthScore aggregate_score(std::vector<ParameterScore> scores, const ScoreConfig& config) {
    if (scores.empty())
        fail(Errc::invalid_argument, "cannot aggregate an empty score list");

    double weighted_sum = 0.0;
    double weight_sum = 0.0;
    for (const auto& s : scores) {
        double w = config.weight_for(s.kind);
        if (w < 0)
            fail(Errc::invalid_argument, "negative weight for '" + s.kind + "'");
        weighted_sum += w * s.score;
        weight_sum += w;
    }
    if (weight_sum <= 0)
        fail(Errc::invalid_argument, "aggregation weights sum to zero");

    AuthScore out;
    out.per_parameter = std::move(scores);
    out.aggregate = weighted_sum / weight_sum;
    return out;
}

ScoreDayResult score_day(const std::map<std::string, BehaviorWindow>& windows,
                         const std::map<std::string, long>& today, const ScoreConfig& config) {
    for (const auto& [kind, count] : today) {
        (void)count;
        if (!windows.count(kind))
            fail(Errc::invalid_argument, "unknown parameter '" + kind + "'");
    }

    ScoreDayResult result;
    std::vector<ParameterScore> scores;
    for (const auto& [kind, window] : windows) {
        if (!window.warmed())
            fail(Errc::not_warm, "window for '" + kind + "' is not warmed");
        long count = 0;
        if (auto it = today.find(kind); it != today.end())
            count = it->second;
        double prev_avg = window_average(window);
        BehaviorWindow next = slide(window, count);
        double new_avg = window_average(next);
        scores.push_back(parameter_score(kind, prev_avg, new_avg, config));
        result.slid_windows.emplace(kind, std::move(next));
    }
    result.score = aggregate_score(std::move(scores), config);
    return result;
}

} // namespace frauddet
