#include "wensim/lyapunov.hpp"

#include "wensim/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <thread>
#include <stdexcept>

namespace wensim {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

// log(e^a - e^b) for a >= b.
double log_sub(double a, double b) {
    if (b == kNegInf) return a;
    const double d = -std::expm1(b - a);
    return d <= 0.0 ? kNegInf : a + std::log(d);
}

struct SignedLogSum {
    double pos = kNegInf;
    double neg = kNegInf;

    void add(int sign, double log_mag) {
        if (sign > 0) pos = log_add(pos, log_mag);
        else if (sign < 0) neg = log_add(neg, log_mag);
    }
    Drift result() const {
        if (pos > neg) return {+1, log_sub(pos, neg)};
        if (neg > pos) return {-1, log_sub(neg, pos)};
        return {0, kNegInf};
    }
};

double log_binom(int n, int k) {
    double b = 1.0;
    for (int i = 0; i < k; ++i) b = b * (n - i) / (i + 1);
    return std::log(b);
}

// e[S] = sum over subsets S' of S of m[S'] (zeta transform).
std::vector<std::int64_t> subset_sums(const StateVector& state) {
    std::vector<std::int64_t> e = state.m;
    const int n = state.relays();
    for (int r = 0; r < n; ++r)
        for (std::uint32_t mask = 0; mask < e.size(); ++mask)
            if (mask & (1u << r)) e[mask] += e[mask ^ (1u << r)];
    return e;
}

} // namespace

double LyapunovParams::log_coeff_for_mask(std::uint32_t mask) const {
    return log_coeff[std::popcount(mask) + 1];
}

double LyapunovParams::coefficient(int cardinality) const {
    return std::exp(log_coeff[cardinality]);
}

LyapunovParams build_coefficients(int relays, double scale, double delta) {
    if (!(scale > 0.0)) throw std::invalid_argument("N must be > 0");
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be > 0");
    if (relays < 0) throw std::invalid_argument("relay count must be >= 0");

    LyapunovParams p;
    p.relays = relays;
    p.scale = scale;
    p.delta = delta;
    p.log_coeff.assign(relays + 2, 0.0);
    p.log_coeff[relays + 1] = 0.0; // the full-set coefficient is 1
    constexpr double margin = 1e-3;
    for (int k = relays; k >= 1; --k) {
        double superset_sum = kNegInf;
        for (int j = k + 1; j <= relays + 1; ++j)
            superset_sum = log_add(superset_sum,
                                   log_binom(relays + 1 - k, j - k) + p.log_coeff[j]);
        p.log_coeff[k] = std::log1p(margin) + std::log(scale) + superset_sum;
        if (!std::isfinite(p.log_coeff[k]))
            throw std::overflow_error("Lyapunov coefficients overflow log-double range");
    }
    return p;
}

bool coefficients_valid(const LyapunovParams& p) {
    if (p.log_coeff.size() != static_cast<std::size_t>(p.relays) + 2) return false;
    if (p.log_coeff[p.relays + 1] != 0.0) return false;
    for (int k = 1; k <= p.relays; ++k) {
        double superset_sum = kNegInf;
        for (int j = k + 1; j <= p.relays + 1; ++j)
            superset_sum = log_add(superset_sum,
                                   log_binom(p.relays + 1 - k, j - k) + p.log_coeff[j]);
        if (!(p.log_coeff[k] > std::log(p.scale) + superset_sum)) return false;
    }
    return true;
}

double evaluate_log(const LyapunovParams& p, const StateVector& state) {
    if (state.relays() != p.relays)
        throw std::invalid_argument("state dimension does not match Lyapunov parameters");
    const std::vector<std::int64_t> e = subset_sums(state);
    const double log1d = std::log1p(p.delta);
    double acc = kNegInf;
    for (std::uint32_t mask = 0; mask < e.size(); ++mask)
        acc = log_add(acc, p.log_coeff_for_mask(mask) + static_cast<double>(e[mask]) * log1d);
    return acc;
}

double Drift::value() const {
    if (sign == 0) return 0.0;
    return sign * std::exp(log_mag);
}

Drift expected_drift(const Topology& t, const LyapunovParams& p, const StateVector& state) {
    const int n = t.relay_count();
    if (state.relays() != n || p.relays != n)
        throw std::invalid_argument("topology, parameters and state must share n");

    const std::vector<Transition> transitions = enumerate_transitions(t, state);
    const std::uint32_t full = t.cut_count() - 1u;

    // Rate mass of V-decreasing transitions touching each term V_S: a
    // departure from S1 touches every S containing S1; an advance
    // S1 -> S2 touches S containing S1 but not S2.
    std::vector<double> touched(state.m.size(), 0.0);
    double lambda = 0.0;
    for (const auto& tr : transitions) {
        if (tr.kind == Transition::Kind::Arrival) {
            lambda += tr.rate;
            continue;
        }
        const std::uint32_t free = full & ~tr.from;
        for (std::uint32_t sub = free;; sub = (sub - 1) & free) {
            const std::uint32_t s = tr.from | sub;
            if (tr.kind != Transition::Kind::Advance || (s & tr.to) != tr.to)
                touched[s] += tr.rate;
            if (sub == 0) break;
        }
    }

    const std::vector<std::int64_t> e = subset_sums(state);
    const double log1d = std::log1p(p.delta);
    const double log_delta = std::log(p.delta);
    SignedLogSum sum;
    for (std::uint32_t s = 0; s < e.size(); ++s) {
        // delta * N_S (1+delta)^e_S * (lambda - touched_S / (1+delta))
        const double coef = lambda - touched[s] / (1.0 + p.delta);
        if (coef == 0.0) continue;
        const double log_mag = log_delta + p.log_coeff_for_mask(s) +
                               static_cast<double>(e[s]) * log1d + std::log(std::abs(coef));
        sum.add(coef > 0.0 ? +1 : -1, log_mag);
    }
    return sum.result();
}

Drift expected_drift_bruteforce(const Topology& t, const LyapunovParams& p,
                                const StateVector& state) {
    const double log_v = evaluate_log(p, state);
    SignedLogSum sum;
    for (const auto& tr : enumerate_transitions(t, state)) {
        const double log_v_next = evaluate_log(p, apply_transition(state, tr));
        const double log_rate = std::log(tr.rate);
        if (log_v_next > log_v) sum.add(+1, log_rate + log_sub(log_v_next, log_v));
        else if (log_v_next < log_v) sum.add(-1, log_rate + log_sub(log_v, log_v_next));
    }
    return sum.result();
}

double lemma_threshold(const Topology& t, double scale, double delta) {
    const double mc = min_cut(t).rate;
    return scale / (scale + 1.0) / ((1.0 + delta) * (1.0 + delta)) * mc;
}

double lemma_threshold_n1(const Topology& t, double scale, double delta) {
    const double mc = min_cut(t).rate;
    return scale / (scale + 1.0) / (1.0 + delta) * mc;
}

namespace {

struct ScanAccum {
    DriftScanReport rep;
    int coords = 0;

    void note(const StateVector& s, const Drift& d, int cap) {
        ++rep.scanned;
        if (d.sign <= 0) return;
        ++rep.positive_count;
        if (rep.bbox_min.empty()) {
            rep.bbox_min.assign(s.m.begin(), s.m.end());
            rep.bbox_max.assign(s.m.begin(), s.m.end());
        } else {
            for (int k = 0; k < coords; ++k) {
                rep.bbox_min[k] = std::min(rep.bbox_min[k], s.m[k]);
                rep.bbox_max[k] = std::max(rep.bbox_max[k], s.m[k]);
            }
        }
        for (int k = 0; k < coords; ++k)
            if (s.m[k] == cap) rep.interior = false;
    }
};

} // namespace

DriftScanReport scan_positive_drift(const Topology& t, const LyapunovParams& p, double lambda,
                                    int box_cap) {
    if (box_cap < 0) throw std::invalid_argument("box cap must be >= 0");
    Topology scan_topo = t;
    scan_topo.set_arrival_rate(lambda);
    validate(scan_topo);

    const int coords = 1 << t.relay_count();
    ScanAccum acc;
    acc.coords = coords;
    acc.rep.lambda = lambda;
    acc.rep.threshold = lemma_threshold(t, p.scale, p.delta);
    acc.rep.box_cap = box_cap;

    double total_states = 1.0;
    for (int k = 0; k < coords; ++k) total_states *= box_cap + 1.0;
    acc.rep.exhaustive = total_states <= 4e6;

    StateVector s(t.relay_count());
    if (acc.rep.exhaustive) {
        // Disjoint contiguous ranges of the mixed-radix index space, one
        // worker each; merged counts and boxes are order-independent.
        const auto total = static_cast<std::size_t>(total_states);
        unsigned jobs = std::thread::hardware_concurrency();
        if (jobs == 0) jobs = 1;
        jobs = std::min<std::size_t>({jobs, 8, std::max<std::size_t>(total / 20000, 1)});

        std::vector<ScanAccum> parts(jobs);
        auto worker = [&](unsigned w) {
            ScanAccum& local = parts[w];
            local.coords = coords;
            const std::size_t begin = total * w / jobs;
            const std::size_t end = total * (w + 1) / jobs;
            StateVector state(t.relay_count());
            std::size_t idx = begin;
            for (int k = 0; k < coords; ++k) {
                state.m[k] = static_cast<std::int64_t>(idx % (box_cap + 1));
                idx /= box_cap + 1;
            }
            for (std::size_t at = begin; at < end; ++at) {
                local.note(state, expected_drift(scan_topo, p, state), box_cap);
                for (int k = 0; k < coords; ++k) {
                    if (state.m[k] < box_cap) {
                        ++state.m[k];
                        break;
                    }
                    state.m[k] = 0;
                }
            }
        };
        if (jobs == 1) {
            worker(0);
        } else {
            std::vector<std::thread> threads;
            for (unsigned w = 0; w < jobs; ++w) threads.emplace_back(worker, w);
            for (auto& th : threads) th.join();
        }
        for (const auto& part : parts) {
            acc.rep.scanned += part.rep.scanned;
            acc.rep.positive_count += part.rep.positive_count;
            acc.rep.interior = acc.rep.interior && part.rep.interior;
            if (part.rep.bbox_min.empty()) continue;
            if (acc.rep.bbox_min.empty()) {
                acc.rep.bbox_min = part.rep.bbox_min;
                acc.rep.bbox_max = part.rep.bbox_max;
            } else {
                for (int k = 0; k < coords; ++k) {
                    acc.rep.bbox_min[k] = std::min(acc.rep.bbox_min[k], part.rep.bbox_min[k]);
                    acc.rep.bbox_max[k] = std::max(acc.rep.bbox_max[k], part.rep.bbox_max[k]);
                }
            }
        }
        return acc.rep;
    }

    // Evidence mode: axis and pairwise slices plus random interior samples.
    for (int k = 0; k < coords; ++k) {
        std::fill(s.m.begin(), s.m.end(), 0);
        for (int v = 0; v <= box_cap; ++v) {
            s.m[k] = v;
            acc.note(s, expected_drift(scan_topo, p, s), box_cap);
        }
    }
    const int pair_cap = std::min(box_cap, 60);
    for (int a = 0; a < coords; ++a) {
        for (int b = a + 1; b < coords; ++b) {
            std::fill(s.m.begin(), s.m.end(), 0);
            for (int va = 1; va <= pair_cap; ++va)
                for (int vb = 1; vb <= pair_cap; ++vb) {
                    s.m[a] = va;
                    s.m[b] = vb;
                    acc.note(s, expected_drift(scan_topo, p, s), box_cap);
                }
        }
    }
    Rng rng(0x5C4Eu); // fixed: scans are reproducible
    for (int it = 0; it < 20000; ++it) {
        for (int k = 0; k < coords; ++k)
            s.m[k] = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(box_cap) + 1));
        acc.note(s, expected_drift(scan_topo, p, s), box_cap);
    }
    return acc.rep;
}

} // namespace wensim
