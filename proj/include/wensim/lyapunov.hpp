// Exponential Lyapunov function over the m-state, exact rate-weighted
// drift, and drift-sign scans over state boxes.
//
// V(m) = sum over cuts S of N_{|S|} (1+delta)^(sum_{S' subset of S} m_S').
// Values grow doubly fast in the coordinates, so everything is kept in
// log domain; drifts are returned as (sign, log magnitude).

#ifndef WENSIM_LYAPUNOV_HPP
#define WENSIM_LYAPUNOV_HPP

#include <cstdint>
#include <vector>

#include "wensim/markov.hpp"
#include "wensim/topology.hpp"

namespace wensim {

struct LyapunovParams {
    int relays = 0;
    double scale = 0.0; // the coupling constant N of the coefficient recursion
    double delta = 0.0;
    // log N_k indexed by subset cardinality k (source counted), k = 1..n+1.
    // Index 0 unused.
    std::vector<double> log_coeff;

    double log_coeff_for_mask(std::uint32_t mask) const;
    double coefficient(int cardinality) const; // exp(log N_k), may overflow to inf
};

// N_{n+1} = 1 and, descending, N_k = (1+1e-3) * N * sum of binom-weighted
// larger coefficients, which satisfies the strict recursion.
LyapunovParams build_coefficients(int relays, double scale, double delta);

// Strict recursion check on an arbitrary parameter set.
bool coefficients_valid(const LyapunovParams& p);

double evaluate_log(const LyapunovParams& p, const StateVector& state);

struct Drift {
    int sign = 0;           // -1, 0, +1
    double log_mag = -1e308;
    double value() const;   // sign * exp(log_mag); +-inf when out of range
};

// Exact expected drift: sum of rate * (V(next) - V(state)) over all
// transitions, accumulated term by term (each transition touches a known
// subset of the V_S terms) instead of by full re-evaluation.
Drift expected_drift(const Topology& t, const LyapunovParams& p, const StateVector& state);

// Independent slow route: two full V evaluations per transition.
Drift expected_drift_bruteforce(const Topology& t, const LyapunovParams& p,
                                const StateVector& state);

// Stability threshold (N/(N+1)) * (1+delta)^-2 * min-cut.
double lemma_threshold(const Topology& t, double scale, double delta);
// Single-relay variant with a (1+delta)^-1 factor.
double lemma_threshold_n1(const Topology& t, double scale, double delta);

struct DriftScanReport {
    double lambda = 0.0;
    double threshold = 0.0; // lemma_threshold at the scan's parameters
    int box_cap = 0;
    bool exhaustive = true; // false: axis-slice + random-sample evidence
    long long scanned = 0;
    long long positive_count = 0;
    bool interior = true;   // no positive-drift state touches a cap face
    // Componentwise bounds of the positive-drift set; empty when none.
    std::vector<std::int64_t> bbox_min, bbox_max;
};

// Enumerates drift signs over [0,cap]^(2^n) (exhaustive when feasible,
// otherwise slices and random samples) with the arrival rate overridden
// to `lambda`.
DriftScanReport scan_positive_drift(const Topology& t, const LyapunovParams& p, double lambda,
                                    int box_cap);

} // namespace wensim

#endif // WENSIM_LYAPUNOV_HPP
