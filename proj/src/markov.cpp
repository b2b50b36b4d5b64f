#include "wensim/markov.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

namespace wensim {

std::int64_t queue_length(const StateVector& s, NodeId i) {
    const int n = s.relays();
    if (i == 0) {
        std::int64_t q = 0;
        for (const auto v : s.m) q += v;
        return q;
    }
    if (i > n) return 0; // destination keeps no buffer
    const std::uint32_t bit = 1u << (i - 1);
    std::int64_t q = 0;
    for (std::uint32_t mask = 0; mask < s.m.size(); ++mask)
        if (mask & bit) q += s.m[mask];
    return q;
}

OutcomeSplit transmitter_outcomes(const Topology& t, NodeId i, CutSet s1) {
    if (!s1.contains(i, t.relay_count()))
        throw std::invalid_argument("transmitter must be a member of S1");
    const int n = t.relay_count();
    OutcomeSplit out;

    if (t.reception().correlated()) {
        const std::uint32_t dbit = node_bit(t.destination());
        std::map<std::uint32_t, double> adv;
        for (const auto& atom : t.reception().dist[i]) {
            if (atom.receivers & dbit) {
                out.departure += atom.p;
                continue;
            }
            std::uint32_t s2 = s1.mask;
            for (int r = 1; r <= n; ++r)
                if (atom.receivers & node_bit(r)) s2 |= 1u << (r - 1);
            if (s2 == s1.mask) out.no_change += atom.p;
            else adv[s2] += atom.p;
        }
        // Any residual mass (distribution sums to 1 within tolerance) is a
        // no-reception event.
        double listed = out.departure + out.no_change;
        for (const auto& [s2, p] : adv) listed += p;
        out.no_change += 1.0 - listed;
        out.advances.assign(adv.begin(), adv.end());
        return out;
    }

    out.departure = t.success(i, t.destination());
    double stay = t.erasure(i, t.destination());
    const std::uint32_t grow = (t.cut_count() - 1u) & ~s1.mask;
    for (int r = 1; r <= n; ++r)
        if (grow & (1u << (r - 1))) stay *= t.erasure(i, r);
    out.no_change = stay;
    // Strict supersets S2 = S1 | g for non-empty g outside S1.
    for (std::uint32_t g = grow; g != 0; g = (g - 1) & grow) {
        double p = t.erasure(i, t.destination());
        for (int r = 1; r <= n; ++r) {
            const std::uint32_t bit = 1u << (r - 1);
            if (g & bit) p *= t.success(i, r);
            else if (grow & bit) p *= t.erasure(i, r);
        }
        if (p > 0.0) out.advances.emplace_back(s1.mask | g, p);
    }
    std::sort(out.advances.begin(), out.advances.end());
    return out;
}

std::vector<Transition> enumerate_transitions(const Topology& t, const StateVector& state) {
    const int n = t.relay_count();
    if (state.m.size() != (std::size_t{1} << n))
        throw std::invalid_argument("state dimension does not match topology");

    std::vector<Transition> out;
    const double lambda = t.arrival_rate();
    if (lambda > 0.0) out.push_back({Transition::Kind::Arrival, 0, 0, lambda});

    // q(i) for the source and each relay.
    std::vector<double> q(n + 1, 0.0);
    for (std::uint32_t mask = 0; mask < state.m.size(); ++mask) {
        if (state.m[mask] == 0) continue;
        q[0] += static_cast<double>(state.m[mask]);
        for (int r = 1; r <= n; ++r)
            if (mask & (1u << (r - 1))) q[r] += static_cast<double>(state.m[mask]);
    }

    std::map<std::uint32_t, double> adv; // reused per S1
    for (std::uint32_t s1 = 0; s1 < state.m.size(); ++s1) {
        if (state.m[s1] == 0) continue;
        const double count = static_cast<double>(state.m[s1]);
        double dep = 0.0;
        adv.clear();
        for (NodeId i = 0; i <= n; ++i) {
            if (i != 0 && !(s1 & (1u << (i - 1)))) continue;
            const double weight = count / q[i]; // q(i) >= m[S1] > 0 here
            const OutcomeSplit split = transmitter_outcomes(t, i, CutSet{s1});
            dep += weight * split.departure;
            for (const auto& [s2, p] : split.advances) adv[s2] += weight * p;
        }
        if (dep > 0.0) out.push_back({Transition::Kind::Departure, s1, 0, dep});
        for (const auto& [s2, r] : adv)
            if (r > 0.0) out.push_back({Transition::Kind::Advance, s1, s2, r});
    }
    return out;
}

StateVector apply_transition(const StateVector& state, const Transition& tr) {
    StateVector next = state;
    switch (tr.kind) {
    case Transition::Kind::Arrival:
        next.m[0] += 1;
        break;
    case Transition::Kind::Departure:
        if (next.m[tr.from] <= 0)
            throw std::invalid_argument("departure from an empty m[S1]");
        next.m[tr.from] -= 1;
        break;
    case Transition::Kind::Advance:
        if ((tr.from & ~tr.to) != 0 || tr.from == tr.to)
            throw std::invalid_argument("advance target must be a strict superset");
        if (next.m[tr.from] <= 0)
            throw std::invalid_argument("advance from an empty m[S1]");
        next.m[tr.from] -= 1;
        next.m[tr.to] += 1;
        break;
    }
    return next;
}

double total_exit_rate(const Topology& t, const StateVector& state) {
    double total = 0.0;
    for (const auto& tr : enumerate_transitions(t, state)) total += tr.rate;
    return total;
}

StateVector state_from_buffers(int relays, const std::vector<std::vector<PacketId>>& buffers) {
    if (buffers.size() != static_cast<std::size_t>(relays + 1))
        throw std::invalid_argument("expected one buffer per source/relay node");
    StateVector s(relays);
    std::map<PacketId, std::uint32_t> mask_of;
    for (const PacketId p : buffers[0]) mask_of[p] = 0;
    for (int r = 1; r <= relays; ++r) {
        for (const PacketId p : buffers[r]) {
            auto it = mask_of.find(p);
            if (it == mask_of.end())
                throw ValidationError("protocol violation: relay " + std::to_string(r) +
                                      " holds a packet the source does not");
            it->second |= 1u << (r - 1);
        }
    }
    for (const auto& [p, mask] : mask_of) s.m[mask] += 1;
    return s;
}

std::size_t state_index(const StateVector& s, int cap) {
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (std::size_t k = 0; k < s.m.size(); ++k) {
        idx += static_cast<std::size_t>(s.m[k]) * stride;
        stride *= static_cast<std::size_t>(cap) + 1;
    }
    return idx;
}

namespace {

struct TruncatedChain {
    int coords = 0;
    int cap = 0;
    std::size_t states = 0;

    TruncatedChain(const Topology& t, int cap_) : cap(cap_) {
        coords = 1 << t.relay_count();
        states = 1;
        for (int k = 0; k < coords; ++k) {
            if (states > 1'000'000ull / (static_cast<std::size_t>(cap) + 1))
                throw std::invalid_argument("truncated state space too large (limit 1e6 states)");
            states *= static_cast<std::size_t>(cap) + 1;
        }
    }

    void decode(std::size_t idx, StateVector& s) const {
        for (int k = 0; k < coords; ++k) {
            s.m[k] = static_cast<std::int64_t>(idx % (cap + 1));
            idx /= cap + 1;
        }
    }

    bool in_box(const StateVector& s) const {
        for (const auto v : s.m)
            if (v > cap) return false;
        return true;
    }
};

} // namespace

StationaryResult solve_stationary_truncated(const Topology& t, int cap) {
    validate(t);
    if (t.relay_count() > 2)
        throw std::invalid_argument("stationary solver supports n <= 2 relays");
    if (cap < 0) throw std::invalid_argument("truncation cap must be >= 0");
    const MinCut mc = min_cut(t);
    if (t.arrival_rate() >= mc.rate && t.arrival_rate() > 0.0)
        throw std::invalid_argument("stationary solver requires lambda < min-cut");

    TruncatedChain box(t, cap);
    const double uni = t.arrival_rate() + (t.relay_count() + 1) + 0.5;

    // Sparse uniformized kernel, row-compressed.
    std::vector<std::size_t> row_start(box.states + 1, 0);
    std::vector<std::size_t> col;
    std::vector<double> prob;
    StateVector s(t.relay_count());
    for (std::size_t idx = 0; idx < box.states; ++idx) {
        box.decode(idx, s);
        double off = 0.0;
        for (const auto& tr : enumerate_transitions(t, s)) {
            const StateVector next = apply_transition(s, tr);
            if (!box.in_box(next)) continue; // reflected into the self loop
            col.push_back(state_index(next, cap));
            prob.push_back(tr.rate / uni);
            off += tr.rate / uni;
        }
        col.push_back(idx);
        prob.push_back(1.0 - off);
        row_start[idx + 1] = col.size();
    }

    std::vector<double> pi(box.states, 0.0), next(box.states, 0.0), snap;
    pi[0] = 1.0;
    const long max_iters = 500'000;
    const long check_every = 64;
    long iters = 0;
    snap = pi;
    for (; iters < max_iters; ++iters) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < box.states; ++i) {
            const double w = pi[i];
            if (w == 0.0) continue;
            for (std::size_t k = row_start[i]; k < row_start[i + 1]; ++k)
                next[col[k]] += w * prob[k];
        }
        pi.swap(next);
        if ((iters + 1) % check_every == 0) {
            double delta = 0.0;
            for (std::size_t i = 0; i < box.states; ++i) delta += std::abs(pi[i] - snap[i]);
            if (delta < 1e-13) break;
            snap = pi;
        }
    }
    if (iters >= max_iters)
        throw std::runtime_error("stationary solver did not converge");

    double total = 0.0;
    for (const auto v : pi) total += v;
    for (auto& v : pi) v /= total;

    StationaryResult res;
    res.cap = cap;
    res.iterations = iters;
    res.mean_queue.assign(t.relay_count() + 1, 0.0);
    res.mean_m.assign(box.coords, 0.0);
    for (std::size_t idx = 0; idx < box.states; ++idx) {
        if (pi[idx] == 0.0) continue;
        box.decode(idx, s);
        bool boundary = false;
        for (int k = 0; k < box.coords; ++k) {
            res.mean_m[k] += pi[idx] * static_cast<double>(s.m[k]);
            if (s.m[k] == cap) boundary = true;
        }
        for (NodeId i = 0; i <= t.relay_count(); ++i)
            res.mean_queue[i] += pi[idx] * static_cast<double>(queue_length(s, i));
        if (boundary) res.boundary_mass += pi[idx];
    }
    res.boundary_warning = res.boundary_mass > 1e-6;
    res.pi = std::move(pi);
    return res;
}

void dump_generator(const Topology& t, int cap, std::ostream& out) {
    TruncatedChain box(t, cap);
    out.precision(17);
    StateVector s(t.relay_count());
    for (std::size_t idx = 0; idx < box.states; ++idx) {
        box.decode(idx, s);
        double diag = 0.0;
        std::map<std::size_t, double> row;
        for (const auto& tr : enumerate_transitions(t, s)) {
            const StateVector next = apply_transition(s, tr);
            if (!box.in_box(next)) continue;
            row[state_index(next, cap)] += tr.rate;
            diag += tr.rate;
        }
        if (diag > 0.0) out << idx << ' ' << idx << ' ' << -diag << '\n';
        for (const auto& [j, rate] : row) out << idx << ' ' << j << ' ' << rate << '\n';
    }
}

} // namespace wensim
