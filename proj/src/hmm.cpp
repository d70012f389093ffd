#include "hmm.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "error.hpp"

namespace frauddet {

namespace {

double median_of_sorted(const std::vector<double>& sorted) {
    std::size_t n = sorted.size();
    if (n % 2 == 1)
        return sorted[n / 2];
    return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

std::size_t nearest_centroid(double amount, const std::vector<double>& centroids) {
    std::size_t best = 0;
    double best_dist = std::abs(amount - centroids[0]);
    for (std::size_t i = 1; i < centroids.size(); ++i) {
        double d = std::abs(amount - centroids[i]);
        if (d < best_dist) { // strict: ties keep the lower index
            best_dist = d;
            best = i;
        }
    }
    return best;
}

void check_row(const std::vector<double>& row, std::size_t expect, const std::string& name) {
    if (row.size() != expect)
        fail(Errc::integrity, name + " has " + std::to_string(row.size()) + " entries, expected " +
                                  std::to_string(expect));
    double sum = 0.0;
    for (double v : row) {
        if (v < 0.0 || !std::isfinite(v))
            fail(Errc::integrity, name + " has a negative or non-finite entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        fail(Errc::integrity, name + " sums to " + std::to_string(sum) + ", expected 1");
}

void normalize(std::vector<double>& row) {
    double sum = 0.0;
    for (double v : row)
        sum += v;
    if (sum <= 0.0) {
        std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(row.size()));
        return;
    }
    for (double& v : row)
        v /= sum;
}

} // namespace

AmountQuantizer fit_quantizer(const std::vector<double>& amounts) {
    if (amounts.empty())
        fail(Errc::invalid_argument, "cannot fit a quantizer on an empty amount list");
    for (double a : amounts)
        if (a < 0 || !std::isfinite(a))
            fail(Errc::invalid_argument, "amounts must be non-negative and finite");

    std::vector<double> sorted = amounts;
    std::sort(sorted.begin(), sorted.end());
    std::set<double> distinct(sorted.begin(), sorted.end());
    std::size_t k = std::min<std::size_t>(3, distinct.size());

    std::vector<double> centroids;
    if (k == 1) {
        centroids = {sorted.front()};
    } else if (k == 2) {
        centroids = {sorted.front(), sorted.back()};
    } else {
        centroids = {sorted.front(), median_of_sorted(sorted), sorted.back()};
    }

    std::vector<std::size_t> assign(sorted.size(), 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            std::size_t c = nearest_centroid(sorted[i], centroids);
            if (c != assign[i]) {
                assign[i] = c;
                changed = true;
            }
        }
        if (!changed && iter > 0)
            break;
        std::vector<double> sums(k, 0.0);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            sums[assign[i]] += sorted[i];
            counts[assign[i]]++;
        }
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c] > 0) // an emptied cluster keeps its centroid
                centroids[c] = sums[c] / static_cast<double>(counts[c]);
        if (!changed)
            break;
    }

    std::sort(centroids.begin(), centroids.end());
    AmountQuantizer out;
    out.centroids = std::move(centroids);
    return out;
}

SpendingSymbol quantize(double amount, const AmountQuantizer& quantizer) {
    if (quantizer.centroids.empty())
        fail(Errc::integrity, "quantizer has no centroids");
    if (amount < 0)
        fail(Errc::invalid_argument, "amount must be non-negative");

    std::size_t idx = nearest_centroid(amount, quantizer.centroids);
    switch (quantizer.centroids.size()) {
    case 1:
        return SpendingSymbol::medium;
    case 2:
        return idx == 0 ? SpendingSymbol::low : SpendingSymbol::high;
    default:
        return static_cast<SpendingSymbol>(static_cast<int>(idx));
    }
}

void HmmParams::validate() const {
    if (n_states == 0)
        fail(Errc::integrity, "hmm has zero states");
    if (transition.size() != n_states || emission.size() != n_states)
        fail(Errc::integrity, "hmm matrix dimensions do not match n_states");
    for (std::size_t i = 0; i < n_states; ++i) {
        check_row(transition[i], n_states, "hmm.A[" + std::to_string(i) + "]");
        check_row(emission[i], kSymbolCount, "hmm.B[" + std::to_string(i) + "]");
    }
    check_row(initial, n_states, "hmm.pi");
}

double forward_likelihood(const HmmParams& params, const std::vector<SpendingSymbol>& symbols) {
    params.validate();
    if (symbols.empty())
        fail(Errc::invalid_argument, "observation sequence is empty");

    const std::size_t n = params.n_states;
    std::vector<double> alpha(n), next(n);

    int o0 = static_cast<int>(symbols[0]);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        alpha[i] = params.initial[i] * params.emission[i][o0];
        scale += alpha[i];
    }
    if (scale == 0.0)
        return 0.0;
    for (double& a : alpha)
        a /= scale;
    double log_prob = std::log(scale);

    for (std::size_t t = 1; t < symbols.size(); ++t) {
        int ot = static_cast<int>(symbols[t]);
        scale = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                sum += alpha[i] * params.transition[i][j];
            next[j] = sum * params.emission[j][ot];
            scale += next[j];
        }
        if (scale == 0.0)
            return 0.0;
        for (double& a : next)
            a /= scale;
        alpha.swap(next);
        log_prob += std::log(scale);
    }
    return std::exp(log_prob);
}

TrainResult baum_welch(const std::vector<SpendingSymbol>& symbols, std::size_t n_states,
                       const TrainOptions& options) {
    if (symbols.size() < 2)
        fail(Errc::invalid_argument, "training needs at least two observations");
    if (n_states < 1)
        fail(Errc::invalid_argument, "training needs at least one state");

    const std::size_t n = n_states;
    const std::size_t len = symbols.size();
    std::vector<int> obs(len);
    for (std::size_t t = 0; t < len; ++t)
        obs[t] = static_cast<int>(symbols[t]);

    HmmParams p;
    if (options.init) {
        p = *options.init;
        p.validate();
        if (p.n_states != n)
            fail(Errc::invalid_argument, "initial params have the wrong state count");
    } else {
        // Near-uniform rows with a seeded perturbation; exact uniformity is a
        // symmetric fixed point the re-estimation cannot leave.
        std::mt19937_64 rng(options.seed);
        auto perturbed_row = [&](std::size_t len_row) {
            std::vector<double> row(len_row);
            for (double& v : row)
                v = 1.0 + 0.2 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
            normalize(row);
            return row;
        };
        p.n_states = n;
        for (std::size_t i = 0; i < n; ++i) {
            p.transition.push_back(perturbed_row(n));
            p.emission.push_back(perturbed_row(kSymbolCount));
        }
        p.initial = perturbed_row(n);
    }

    TrainResult result;
    std::vector<std::vector<double>> alpha(len, std::vector<double>(n));
    std::vector<std::vector<double>> beta(len, std::vector<double>(n));
    std::vector<double> scale(len);

    for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
        // Scaled forward pass.
        double log_prob = 0.0;
        bool impossible = false;
        for (std::size_t t = 0; t < len && !impossible; ++t) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double v;
                if (t == 0) {
                    v = p.initial[j] * p.emission[j][obs[0]];
                } else {
                    double sum = 0.0;
                    for (std::size_t i = 0; i < n; ++i)
                        sum += alpha[t - 1][i] * p.transition[i][j];
                    v = sum * p.emission[j][obs[t]];
                }
                alpha[t][j] = v;
                s += v;
            }
            if (s == 0.0) {
                impossible = true;
                break;
            }
            scale[t] = s;
            for (std::size_t j = 0; j < n; ++j)
                alpha[t][j] /= s;
            log_prob += std::log(s);
        }
        if (impossible) {
            // The data contains a symbol the current params cannot emit; the
            // seeded initialization never produces this, but a caller-supplied
            // init can. Report what we have.
            result.log_likelihoods.push_back(-std::numeric_limits<double>::infinity());
            break;
        }

        result.log_likelihoods.push_back(log_prob);
        if (result.log_likelihoods.size() >= 2) {
            double prev = result.log_likelihoods[result.log_likelihoods.size() - 2];
            if (log_prob - prev < options.tol)
                break;
        }

        // Scaled backward pass (same scale factors).
        for (std::size_t j = 0; j < n; ++j)
            beta[len - 1][j] = 1.0;
        for (std::size_t t = len - 1; t-- > 0;) {
            for (std::size_t i = 0; i < n; ++i) {
                double sum = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    sum += p.transition[i][j] * p.emission[j][obs[t + 1]] * beta[t + 1][j];
                beta[t][i] = sum / scale[t + 1];
            }
        }

        // Re-estimate.
        HmmParams next = p;
        std::vector<double> gamma_sum(n, 0.0);      // over t = 0..len-2
        std::vector<double> gamma_sum_full(n, 0.0); // over all t
        std::vector<std::vector<double>> xi_sum(n, std::vector<double>(n, 0.0));
        std::vector<std::vector<double>> emit_sum(n, std::vector<double>(kSymbolCount, 0.0));

        for (std::size_t t = 0; t < len; ++t) {
            double norm = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                norm += alpha[t][i] * beta[t][i];
            if (norm <= 0.0)
                continue;
            for (std::size_t i = 0; i < n; ++i) {
                double g = alpha[t][i] * beta[t][i] / norm;
                gamma_sum_full[i] += g;
                emit_sum[i][obs[t]] += g;
                if (t == 0)
                    next.initial[i] = g;
                if (t + 1 < len)
                    gamma_sum[i] += g;
            }
        }
        for (std::size_t t = 0; t + 1 < len; ++t) {
            double norm = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    norm += alpha[t][i] * p.transition[i][j] * p.emission[j][obs[t + 1]] *
                            beta[t + 1][j];
            if (norm <= 0.0)
                continue;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    xi_sum[i][j] += alpha[t][i] * p.transition[i][j] * p.emission[j][obs[t + 1]] *
                                    beta[t + 1][j] / norm;
        }

        for (std::size_t i = 0; i < n; ++i) {
            if (gamma_sum[i] > 0.0)
                for (std::size_t j = 0; j < n; ++j)
                    next.transition[i][j] = xi_sum[i][j] / gamma_sum[i];
            if (gamma_sum_full[i] > 0.0)
                for (int m = 0; m < kSymbolCount; ++m)
                    next.emission[i][m] = emit_sum[i][m] / gamma_sum_full[i];
            normalize(next.transition[i]);
            normalize(next.emission[i]);
        }
        normalize(next.initial);
        p = std::move(next);
    }

    result.params = std::move(p);
    return result;
}

DeviationVerdict deviation_check(const HmmParams& params, const ObservationWindow& window,
                                 SpendingSymbol new_symbol, double theta) {
    if (!window.warmed())
        fail(Errc::not_warm, "observation window is not warmed");

    std::vector<SpendingSymbol> prev(window.symbols.begin(), window.symbols.end());
    std::vector<SpendingSymbol> cand = prev;
    cand.erase(cand.begin());
    cand.push_back(new_symbol);

    DeviationVerdict v;
    v.alpha_prev = forward_likelihood(params, prev);
    v.alpha_new = forward_likelihood(params, cand);
    v.delta = v.alpha_prev > 0.0 ? (v.alpha_prev - v.alpha_new) / v.alpha_prev : 0.0;
    v.is_fraud = v.delta > theta;

    v.updated_window = window;
    if (!v.is_fraud) {
        v.updated_window.symbols.pop_front();
        v.updated_window.symbols.push_back(new_symbol);
    }
    return v;
}

} // namespace frauddet
