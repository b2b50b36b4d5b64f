// Continuous-time Markov chain model of the relaying network.
//
// The state is the vector m indexed by cut masks: m[S] counts packets held
// by exactly the node set S (source implicit). Queue lengths are subset
// sums of m. Transitions are arrivals, departures (destination received)
// and advances (a strictly larger relay set now holds the packet).

#ifndef WENSIM_MARKOV_HPP
#define WENSIM_MARKOV_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "wensim/topology.hpp"

namespace wensim {

using PacketId = std::uint64_t;

struct StateVector {
    std::vector<std::int64_t> m; // size 2^n, indexed by CutSet mask

    StateVector() = default;
    explicit StateVector(int relays) : m(std::size_t{1} << relays, 0) {}
    StateVector(std::initializer_list<std::int64_t> init) : m(init) {}

    int relays() const {
        int n = 0;
        while ((std::size_t{1} << n) < m.size()) ++n;
        return n;
    }
    std::int64_t& operator[](std::uint32_t mask) { return m[mask]; }
    std::int64_t operator[](std::uint32_t mask) const { return m[mask]; }
    friend bool operator==(const StateVector&, const StateVector&) = default;
};

// q(i): total packets buffered at node i. Source sums everything, a relay
// sums the masks containing it, the destination holds nothing.
std::int64_t queue_length(const StateVector& s, NodeId i);

struct Transition {
    enum class Kind { Arrival, Departure, Advance };
    Kind kind = Kind::Arrival;
    std::uint32_t from = 0; // S1 (Departure, Advance)
    std::uint32_t to = 0;   // S2 (Advance only), strict superset of S1
    double rate = 0.0;
};

// Every transition with strictly positive rate out of `state`.
std::vector<Transition> enumerate_transitions(const Topology& t, const StateVector& state);

StateVector apply_transition(const StateVector& state, const Transition& tr);

double total_exit_rate(const Topology& t, const StateVector& state);

// Outcome split of one transmission by node i of a packet held by S1,
// conditioned on that packet being picked. Probabilities sum to 1.
struct OutcomeSplit {
    double departure = 0.0; // destination received
    double no_change = 0.0; // no new relay, destination missed
    std::vector<std::pair<std::uint32_t, double>> advances; // S2 -> prob
};
OutcomeSplit transmitter_outcomes(const Topology& t, NodeId i, CutSet s1);

// Rebuilds m from per-node buffers (index 0 = source, 1..n = relays).
// Throws ValidationError if a relay holds a packet the source lacks.
StateVector state_from_buffers(int relays, const std::vector<std::vector<PacketId>>& buffers);

// Stationary distribution of the chain truncated to the box
// [0,cap]^(2^n) with reflecting truncation (rates leaving the box are
// dropped). Solved by uniformization + power iteration.
struct StationaryResult {
    int cap = 0;
    std::vector<double> pi;          // mixed-radix state index (see state_index)
    std::vector<double> mean_queue;  // E[q(i)] for i = 0..n (source first)
    std::vector<double> mean_m;      // E[m_S] per mask
    double boundary_mass = 0.0;      // mass on states with any coordinate == cap
    bool boundary_warning = false;   // boundary_mass > 1e-6
    long iterations = 0;
};
StationaryResult solve_stationary_truncated(const Topology& t, int cap);

std::size_t state_index(const StateVector& s, int cap);

// Generator triplets "row col rate" (diagonal included) for inspection.
void dump_generator(const Topology& t, int cap, std::ostream& out);

} // namespace wensim

#endif // WENSIM_MARKOV_HPP
