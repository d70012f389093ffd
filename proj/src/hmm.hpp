#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

namespace frauddet {

/// Quantized transaction-amount class fed to the spending model.
enum class SpendingSymbol : int { low = 0, medium = 1, high = 2 };

inline constexpr int kSymbolCount = 3;

/// Maps raw currency amounts onto the three spending symbols by nearest
/// centroid. With fewer than three centroids (degenerate spending history)
/// the symbols collapse: one centroid -> always medium, two -> low/high.
struct AmountQuantizer {
    std::vector<double> centroids; // ascending, size 1..3
};

/// Fits centroids to a user's amounts with 1-D k-means, K = min(3, #distinct),
/// deterministically initialized at (min, median, max). Iterates until the
/// assignment is stable (at most 100 rounds).
AmountQuantizer fit_quantizer(const std::vector<double>& amounts);

/// Nearest centroid by absolute distance; ties resolve to the lower symbol.
SpendingSymbol quantize(double amount, const AmountQuantizer& quantizer);

/// Hidden Markov model over the three spending symbols.
struct HmmParams {
    std::size_t n_states = 0;
    std::vector<std::vector<double>> transition; // N x N, row-stochastic
    std::vector<std::vector<double>> emission;   // N x 3, row-stochastic
    std::vector<double> initial;                 // length N, stochastic

    /// Throws an integrity error naming the offending row when any
    /// distribution fails to sum to 1 within 1e-9 or has negative entries.
    void validate() const;
};

/// Most recent R spending symbols of a cardholder, oldest first.
struct ObservationWindow {
    std::deque<SpendingSymbol> symbols;
    std::size_t window_len = 10;

    bool warmed() const { return symbols.size() == window_len; }
};

/// P(symbols | params), computed with the scaled forward recursion so the
/// result stays a reportable probability in [0,1]. Validates params first.
double forward_likelihood(const HmmParams& params, const std::vector<SpendingSymbol>& symbols);

struct TrainOptions {
    std::size_t max_iters = 100;
    double tol = 1e-6;          // stop when log-likelihood improves less than this
    std::uint64_t seed = 20210914; // deterministic initialization
    std::optional<HmmParams> init; // start from these params instead of seeding
};

struct TrainResult {
    HmmParams params;
    // Log-likelihood of the params at the start of each iteration; the
    // re-estimation guarantees this sequence is non-decreasing.
    std::vector<double> log_likelihoods;
};

/// Baum-Welch re-estimation with per-step scaling. Rows are re-normalized
/// every iteration; stops at max_iters or when the improvement drops below
/// tol. A sequence of one repeated symbol converges to emission 1 for it.
TrainResult baum_welch(const std::vector<SpendingSymbol>& symbols, std::size_t n_states,
                       const TrainOptions& options = {});

struct DeviationVerdict {
    double alpha_prev = 0.0; // likelihood of the current window
    double alpha_new = 0.0;  // likelihood with the new transaction slid in
    double delta = 0.0;      // (alpha_prev - alpha_new) / alpha_prev
    bool is_fraud = false;
    ObservationWindow updated_window; // slid when accepted, unchanged when flagged
};

/// Checks how much sliding `new_symbol` into the window drops the sequence
/// likelihood. Flags fraud when delta exceeds theta; only accepted
/// transactions are committed into the returned window. A window that is
/// already impossible (alpha_prev = 0) yields delta 0: no evidence either way.
DeviationVerdict deviation_check(const HmmParams& params, const ObservationWindow& window,
                                 SpendingSymbol new_symbol, double theta);

} // namespace frauddet
