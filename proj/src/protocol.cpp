#include "wensim/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace wensim {

void validate_config(const Topology& t, const SimConfig& c) {
    const double lambda = effective_arrival_rate(t, c);
    if (!(lambda >= 0.0)) throw ValidationError("arrival rate must be >= 0");
    if (c.timing == Timing::Slotted && lambda > 1.0)
        throw ValidationError("slotted arrivals are Bernoulli: lambda must be <= 1");
    if (!(c.horizon > 0.0)) throw ValidationError("horizon must be > 0");
    if (c.trials < 1) throw ValidationError("trials must be >= 1");
    if (!(c.sample_interval > 0.0)) throw ValidationError("sample interval must be > 0");
    if (c.feedback_delay < 0) throw ValidationError("feedback delay must be >= 0");
    if (c.feedback_delay > 0 && c.timing != Timing::Async)
        throw ValidationError("feedback delay applies to async timing only; transform the "
                              "topology explicitly for slotted runs");
}

double effective_arrival_rate(const Topology& t, const SimConfig& c) {
    return c.arrival_rate < 0.0 ? t.arrival_rate() : c.arrival_rate;
}

Topology effective_topology(const Topology& t, const SimConfig& c) {
    if (c.feedback_delay > 0) return insert_feedback_delay_chain(t, c.feedback_delay);
    return t;
}

SimWorld::SimWorld(const Topology& t) : topo_(&t), buffers_(t.relay_count() + 1) {}

void SimWorld::bump(std::uint32_t mask, std::int64_t delta) {
    auto it = m_counts_.try_emplace(mask, 0).first;
    it->second += delta;
    if (it->second == 0) m_counts_.erase(it);
}

StateVector SimWorld::tracked_state() const {
    StateVector s(topo_->relay_count());
    for (const auto& [mask, count] : m_counts_) s.m[mask] += count;
    return s;
}

std::vector<std::vector<PacketId>> SimWorld::buffer_contents() const {
    std::vector<std::vector<PacketId>> out;
    out.reserve(buffers_.size());
    for (const auto& b : buffers_) out.push_back(b.items());
    return out;
}

PacketId SimWorld::spawn_arrival() {
    const PacketId p = next_id_++;
    buffers_[0].insert(p);
    holder_.emplace(p, 0u);
    bump(0u, +1);
    ++arrivals_;
    return p;
}

bool SimWorld::give_packet(NodeId relay, PacketId p) {
    auto it = holder_.find(p);
    if (it == holder_.end())
        throw std::logic_error("give_packet: packet is not live in this world");
    if (!buffers_[relay].insert(p)) return false;
    const std::uint32_t old_mask = it->second;
    const std::uint32_t new_mask = old_mask | (1u << (relay - 1));
    it->second = new_mask;
    bump(old_mask, -1);
    bump(new_mask, +1);
    return true;
}

void SimWorld::ack_flush(PacketId p, double now) {
    auto it = holder_.find(p);
    if (it == holder_.end())
        throw std::logic_error("ack flush of a packet that is not in the network");
    const std::uint32_t mask = it->second;
    buffers_[0].erase(p);
    for (int r = 1; r <= topo_->relay_count(); ++r)
        if (mask & (1u << (r - 1))) buffers_[r].erase(p);
    bump(mask, -1);
    holder_.erase(it);
    ++delivered_;
    delivery_times_.push_back(now);
}

SimWorld::TxDraw SimWorld::draw_transmission(NodeId node, Rng& pick, Rng& reception) {
    TxDraw d;
    if (buffers_[node].empty()) return d; // opportunity lost
    d.fired = true;
    d.packet = buffers_[node].sample(pick);

    const Topology& t = *topo_;
    if (t.reception().correlated()) {
        const double u = reception.uniform();
        double cum = 0.0;
        for (const auto& atom : t.reception().dist[node]) {
            cum += atom.p;
            if (u < cum) {
                d.receivers = atom.receivers;
                return d;
            }
        }
        return d; // residual normalization mass: nothing received
    }
    // One Bernoulli per candidate receiver, in fixed node order.
    for (NodeId j = 1; j <= t.relay_count() + 1; ++j) {
        if (j == node) continue;
        if (reception.bernoulli(t.success(node, j))) d.receivers |= node_bit(j);
    }
    return d;
}

EventRecord SimWorld::transmit_event(NodeId node, double now, Rng& pick, Rng& reception) {
    EventRecord rec;
    rec.time = now;
    rec.kind = EventRecord::Kind::Transmit;
    rec.tx = node;
    const TxDraw d = draw_transmission(node, pick, reception);
    if (!d.fired) return rec;
    rec.packet = d.packet;
    rec.receivers = d.receivers;
    if (d.receivers & node_bit(topo_->destination())) {
        rec.delivered = true;
        ack_flush(d.packet, now);
    } else {
        for (int r = 1; r <= topo_->relay_count(); ++r)
            if (d.receivers & node_bit(r)) give_packet(r, d.packet);
    }
    return rec;
}

namespace {

SimResult run_async(const Topology& t, const SimConfig& c, int trial,
                    const EventObserver& observer) {
    const double lambda = effective_arrival_rate(t, c);
    const int n = t.relay_count();
    const int ntx = n + 1;
    const double total_rate = lambda + ntx;

    Rng ev = Rng::substream(c.seed, trial, RngPurpose::Events);
    Rng pick = Rng::substream(c.seed, trial, RngPurpose::PacketChoice);
    Rng recv = Rng::substream(c.seed, trial, RngPurpose::Reception);

    SimWorld w(t);
    SimResult res;
    const std::size_t samples =
        static_cast<std::size_t>(std::floor(c.horizon / c.sample_interval)) + 1;
    res.trace.times.resize(samples);
    for (std::size_t k = 0; k < samples; ++k) res.trace.times[k] = k * c.sample_interval;
    res.trace.queues.assign(ntx, std::vector<std::int64_t>(samples, 0));

    std::vector<double> q_integral(ntx, 0.0);
    std::size_t cursor = 0;
    auto sample_now = [&](double upto) {
        while (cursor < samples && res.trace.times[cursor] < upto) {
            for (int i = 0; i < ntx; ++i) res.trace.queues[i][cursor] = w.queue(i);
            ++cursor;
        }
    };

    double now = 0.0;
    while (true) {
        const double next = now + ev.exponential(total_rate);
        const double stop = std::min(next, c.horizon);
        for (int i = 0; i < ntx; ++i)
            q_integral[i] += static_cast<double>(w.queue(i)) * (stop - now);
        sample_now(stop);
        if (next >= c.horizon) break;
        now = next;

        const double u = ev.uniform() * total_rate;
        EventRecord rec;
        if (u < lambda) {
            rec.time = now;
            rec.kind = EventRecord::Kind::Arrival;
            rec.packet = w.spawn_arrival();
        } else {
            NodeId node = static_cast<NodeId>(u - lambda);
            if (node >= ntx) node = ntx - 1; // guard the open upper edge
            rec = w.transmit_event(node, now, pick, recv);
        }
        if (observer) observer(w, rec);
        if (c.record_events) res.trace.events.push_back(rec);
    }
    // Remaining grid points carry the final state.
    while (cursor < samples) {
        for (int i = 0; i < ntx; ++i) res.trace.queues[i][cursor] = w.queue(i);
        ++cursor;
    }

    res.summary.trial = trial;
    res.summary.seed = c.seed;
    res.summary.horizon = c.horizon;
    res.summary.arrivals = w.arrivals();
    res.summary.delivered = w.delivered();
    res.summary.throughput = static_cast<double>(w.delivered()) / c.horizon;
    res.summary.mean_queue.resize(ntx);
    for (int i = 0; i < ntx; ++i) res.summary.mean_queue[i] = q_integral[i] / c.horizon;
    return res;
}

SimResult run_slotted(const Topology& t, const SimConfig& c, int trial,
                      const EventObserver& observer) {
    const double lambda = effective_arrival_rate(t, c);
    const int n = t.relay_count();
    const int ntx = n + 1;
    const auto slots = static_cast<std::int64_t>(std::llround(c.horizon));
    const std::uint32_t dbit = node_bit(t.destination());

    Rng arr = Rng::substream(c.seed, trial, RngPurpose::Events);
    Rng pick = Rng::substream(c.seed, trial, RngPurpose::PacketChoice);
    Rng recv = Rng::substream(c.seed, trial, RngPurpose::Reception);

    SimWorld w(t);
    SimResult res;
    res.trace.times.resize(slots);
    res.trace.queues.assign(ntx, std::vector<std::int64_t>(slots, 0));

    struct Staged {
        NodeId tx;
        PacketId packet;
        std::uint32_t receivers;
    };
    std::vector<Staged> staged;
    std::set<PacketId> delivered_now;
    std::vector<double> q_sum(ntx, 0.0);

    for (std::int64_t slot = 0; slot < slots; ++slot) {
        const auto tslot = static_cast<double>(slot);
        if (arr.bernoulli(lambda)) {
            const PacketId p = w.spawn_arrival();
            if (c.record_events)
                res.trace.events.push_back(
                    {tslot, EventRecord::Kind::Arrival, -1, p, 0, false});
        }

        // All nodes transmit against the slot-start buffers.
        staged.clear();
        delivered_now.clear();
        for (NodeId node = 0; node < ntx; ++node) {
            const SimWorld::TxDraw d = w.draw_transmission(node, pick, recv);
            if (!d.fired) continue;
            staged.push_back({node, d.packet, d.receivers});
            if (d.receivers & dbit) delivered_now.insert(d.packet);
        }

        // Commit receptions; the ack wins over same-slot relay receptions.
        for (const auto& s : staged) {
            if (delivered_now.count(s.packet)) continue;
            for (int r = 1; r <= n; ++r)
                if (s.receivers & node_bit(r)) w.give_packet(r, s.packet);
        }
        for (const PacketId p : delivered_now) w.ack_flush(p, tslot);

        if (c.record_events)
            for (const auto& s : staged)
                res.trace.events.push_back({tslot, EventRecord::Kind::Transmit, s.tx, s.packet,
                                            s.receivers,
                                            delivered_now.count(s.packet) != 0});

        res.trace.times[slot] = tslot;
        for (int i = 0; i < ntx; ++i) {
            res.trace.queues[i][slot] = w.queue(i);
            q_sum[i] += static_cast<double>(w.queue(i));
        }
        if (observer)
            observer(w, {tslot, EventRecord::Kind::SlotEnd, -1, 0, 0, false});
    }

    res.summary.trial = trial;
    res.summary.seed = c.seed;
    res.summary.horizon = static_cast<double>(slots);
    res.summary.arrivals = w.arrivals();
    res.summary.delivered = w.delivered();
    res.summary.throughput =
        slots > 0 ? static_cast<double>(w.delivered()) / static_cast<double>(slots) : 0.0;
    res.summary.mean_queue.resize(ntx);
    for (int i = 0; i < ntx; ++i)
        res.summary.mean_queue[i] = slots > 0 ? q_sum[i] / static_cast<double>(slots) : 0.0;
    return res;
}

} // namespace

SimResult run_trial(const Topology& t, const SimConfig& c, int trial,
                    const EventObserver& observer) {
    validate(t);
    validate_config(t, c);
    if (c.timing == Timing::Async) {
        if (c.feedback_delay > 0) {
            const Topology delayed = insert_feedback_delay_chain(t, c.feedback_delay);
            return run_async(delayed, c, trial, observer);
        }
        return run_async(t, c, trial, observer);
    }
    return run_slotted(t, c, trial, observer);
}

std::vector<SimResult> run(const Topology& t, const SimConfig& c) {
    std::vector<SimResult> out;
    out.reserve(c.trials);
    for (int trial = 0; trial < c.trials; ++trial) out.push_back(run_trial(t, c, trial));
    return out;
}

EnsembleStats aggregate_trials(const std::vector<SimTrace>& traces) {
    if (traces.empty()) throw std::invalid_argument("no traces to aggregate");
    const auto& grid = traces[0].times;
    const std::size_t nodes = traces[0].queues.size();
    for (const auto& tr : traces)
        if (tr.times != grid || tr.queues.size() != nodes)
            throw std::invalid_argument("mismatched sampling grids");

    EnsembleStats st;
    st.times = grid;
    st.trials = static_cast<int>(traces.size());
    st.mean.assign(nodes, std::vector<double>(grid.size(), 0.0));
    st.stderr_mean.assign(nodes, std::vector<double>(grid.size(), 0.0));
    const double k = static_cast<double>(traces.size());
    for (std::size_t i = 0; i < nodes; ++i) {
        for (std::size_t s = 0; s < grid.size(); ++s) {
            double sum = 0.0;
            for (const auto& tr : traces) sum += static_cast<double>(tr.queues[i][s]);
            const double mean = sum / k;
            st.mean[i][s] = mean;
            if (traces.size() > 1) {
                double ss = 0.0;
                for (const auto& tr : traces) {
                    const double d = static_cast<double>(tr.queues[i][s]) - mean;
                    ss += d * d;
                }
                st.stderr_mean[i][s] = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
            }
        }
    }
    return st;
}

} // namespace wensim
