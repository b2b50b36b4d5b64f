// Event-driven simulator of the randomized forwarding protocol with
// destination-acknowledgment flush.
//
// Async mode: unit-rate exponential transmit clocks per node plus a
// Poisson arrival stream; every event commits immediately. Slotted mode:
// per slot, one Bernoulli arrival, then every node transmits against the
// slot-start buffers; receptions and ack flushes commit at slot end, so
// node iteration order never matters. A packet the destination received
// is flushed even if some relay also received it in the same slot.

#ifndef WENSIM_PROTOCOL_HPP
#define WENSIM_PROTOCOL_HPP

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "wensim/markov.hpp"
#include "wensim/rng.hpp"
#include "wensim/topology.hpp"

namespace wensim {

enum class Timing { Async, Slotted };

inline constexpr std::uint64_t kDefaultSeed = 0x57454E53494D253ULL;

struct SimConfig {
    Timing timing = Timing::Slotted;
    double arrival_rate = -1.0; // < 0: use the topology's rate
    double horizon = 1500;      // slots (Slotted) or time units (Async)
    std::uint64_t seed = kDefaultSeed;
    int trials = 1;
    int feedback_delay = 0;     // Async only; > 0 runs on the delay-chain transform
    bool record_events = false;
    double sample_interval = 1.0; // Async queue sampling grid
};

// Throws ValidationError on inconsistent settings.
void validate_config(const Topology& t, const SimConfig& c);
double effective_arrival_rate(const Topology& t, const SimConfig& c);
// The topology a trial actually runs on (delay-chain transform applied).
Topology effective_topology(const Topology& t, const SimConfig& c);

// Packet buffer with O(1) insert, delete-by-id and uniform sampling.
class PacketBuffer {
public:
    bool contains(PacketId p) const { return pos_.count(p) != 0; }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const std::vector<PacketId>& items() const { return items_; }

    bool insert(PacketId p) {
        if (contains(p)) return false;
        pos_[p] = items_.size();
        items_.push_back(p);
        return true;
    }
    bool erase(PacketId p) {
        auto it = pos_.find(p);
        if (it == pos_.end()) return false;
        const std::size_t idx = it->second;
        pos_.erase(it);
        items_[idx] = items_.back();
        if (idx + 1 != items_.size()) pos_[items_[idx]] = idx;
        items_.pop_back();
        return true;
    }
    PacketId sample(Rng& rng) const { return items_[rng.below(items_.size())]; }

private:
    std::vector<PacketId> items_;
    std::unordered_map<PacketId, std::size_t> pos_;
};

struct EventRecord {
    enum class Kind : std::uint8_t { Arrival, Transmit, SlotEnd };
    double time = 0.0;
    Kind kind = Kind::Arrival;
    NodeId tx = -1;
    PacketId packet = 0;          // 0: none (empty-buffer opportunity)
    std::uint32_t receivers = 0;  // node-id mask
    bool delivered = false;
};

// Mutable per-trial world: buffers, packet holder masks and the
// incrementally tracked m-state (sparse, exactly mirrors the buffers).
class SimWorld {
public:
    explicit SimWorld(const Topology& t);

    const Topology& topology() const { return *topo_; }
    const PacketBuffer& buffer(NodeId i) const { return buffers_[i]; }
    std::int64_t queue(NodeId i) const {
        return i < static_cast<NodeId>(buffers_.size())
                   ? static_cast<std::int64_t>(buffers_[i].size())
                   : 0;
    }
    std::int64_t arrivals() const { return arrivals_; }
    std::int64_t delivered() const { return delivered_; }
    const std::vector<double>& delivery_times() const { return delivery_times_; }

    const std::unordered_map<std::uint32_t, std::int64_t>& tracked_counts() const {
        return m_counts_;
    }
    // Dense snapshot of the tracked state (n <= 24 enforced upstream).
    StateVector tracked_state() const;
    // Buffers as plain id lists, source first (for state_from_buffers).
    std::vector<std::vector<PacketId>> buffer_contents() const;

    PacketId spawn_arrival();
    // Gives packet p to a relay; returns false for duplicate reception.
    bool give_packet(NodeId relay, PacketId p);
    void ack_flush(PacketId p, double now);

    struct TxDraw {
        bool fired = false;          // buffer was non-empty
        PacketId packet = 0;
        std::uint32_t receivers = 0; // node-id mask
    };
    // Picks a packet uniformly and draws the receiver set; no commit.
    TxDraw draw_transmission(NodeId node, Rng& pick, Rng& reception);
    // Async semantics: draw and commit in one step.
    EventRecord transmit_event(NodeId node, double now, Rng& pick, Rng& reception);

private:
    const Topology* topo_;
    std::vector<PacketBuffer> buffers_; // 0 = source, 1..n = relays
    std::unordered_map<PacketId, std::uint32_t> holder_; // packet -> relay mask
    std::unordered_map<std::uint32_t, std::int64_t> m_counts_;
    PacketId next_id_ = 1;
    std::int64_t arrivals_ = 0;
    std::int64_t delivered_ = 0;
    std::vector<double> delivery_times_;

    void bump(std::uint32_t mask, std::int64_t delta);
};

struct SimTrace {
    std::vector<double> times;                       // sample grid
    std::vector<std::vector<std::int64_t>> queues;   // [node 0..n][sample]
    std::vector<EventRecord> events;                 // only if record_events
};

struct SimSummary {
    int trial = 0;
    std::uint64_t seed = 0;
    double horizon = 0.0;
    std::int64_t arrivals = 0;
    std::int64_t delivered = 0;
    double throughput = 0.0;              // delivered / horizon
    std::vector<double> mean_queue;       // time-average per node 0..n
};

struct SimResult {
    SimTrace trace;
    SimSummary summary;
};

// Observer called after every committed async event and after every
// slotted slot; used by invariant checks.
using EventObserver = std::function<void(const SimWorld&, const EventRecord&)>;

SimResult run_trial(const Topology& t, const SimConfig& c, int trial,
                    const EventObserver& observer = {});

// All trials, sequential. The harness parallelizes over trials.
std::vector<SimResult> run(const Topology& t, const SimConfig& c);

struct EnsembleStats {
    std::vector<double> times;
    std::vector<std::vector<double>> mean;       // [node][sample]
    std::vector<std::vector<double>> stderr_mean;
    int trials = 0;
};

// Pointwise mean and standard error across traces (grids must match).
EnsembleStats aggregate_trials(const std::vector<SimTrace>& traces);

} // namespace wensim

#endif // WENSIM_PROTOCOL_HPP
