#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "test_util.hpp"
#include "wensim/protocol.hpp"

using namespace wensim;
using testutil::fig4;
using testutil::n1_half;

TEST_CASE("packet choice is uniform over the buffer") {
    // No edges, so transmissions never land and the buffer stays put.
    const Topology t(0, 0.0);
    SimWorld w(t);
    for (int k = 0; k < 3; ++k) w.spawn_arrival();

    Rng pick = Rng::substream(987, 0, RngPurpose::PacketChoice);
    Rng recv = Rng::substream(987, 0, RngPurpose::Reception);
    std::map<PacketId, long> counts;
    const long draws = 100000;
    for (long k = 0; k < draws; ++k) {
        const EventRecord rec = w.transmit_event(0, 0.0, pick, recv);
        REQUIRE(rec.packet != 0);
        counts[rec.packet]++;
    }
    REQUIRE(counts.size() == 3);
    const double expect = draws / 3.0;
    double chi2 = 0.0;
    for (const auto& [p, c] : counts) chi2 += (c - expect) * (c - expect) / expect;
    CHECK(chi2 < testutil::kChi2Df2P01);
}

TEST_CASE("empty buffers lose the opportunity") {
    const Topology t = fig4();
    SimWorld w(t);
    Rng pick(1), recv(2);
    const EventRecord rec = w.transmit_event(1, 0.0, pick, recv);
    CHECK(rec.packet == 0);
    CHECK(rec.receivers == 0);
    CHECK(w.arrivals() == 0);
    CHECK(w.tracked_counts().empty());
}

TEST_CASE("duplicate reception leaves the buffer unchanged") {
    Topology t(1, 0.0);
    t.set_erasure(0, 1, 0.0); // s -> relay always succeeds, no path to d
    SimWorld w(t);
    w.spawn_arrival();
    Rng pick(3), recv(4);
    w.transmit_event(0, 0.0, pick, recv);
    CHECK(w.queue(1) == 1);
    const StateVector after_first = w.tracked_state();
    w.transmit_event(0, 1.0, pick, recv);
    CHECK(w.queue(1) == 1);
    CHECK(w.tracked_state() == after_first);
    CHECK(after_first == StateVector{0, 1});
}

TEST_CASE("destination reception flushes every buffer") {
    Topology t(2, 0.0);
    t.set_erasure(1, 3, 0.0); // relay 1 -> d is lossless
    SimWorld w(t);
    const PacketId p = w.spawn_arrival();
    w.give_packet(1, p);
    w.give_packet(2, p);
    CHECK(w.queue(0) == 1);
    CHECK(w.queue(1) == 1);
    CHECK(w.queue(2) == 1);

    Rng pick(5), recv(6);
    const EventRecord rec = w.transmit_event(1, 2.5, pick, recv);
    CHECK(rec.delivered);
    CHECK(w.queue(0) == 0);
    CHECK(w.queue(1) == 0);
    CHECK(w.queue(2) == 0);
    CHECK(w.delivered() == 1);
    CHECK(w.delivery_times() == std::vector<double>{2.5});
    CHECK(w.arrivals() == w.delivered() + w.queue(0));

    // Flushing a packet that is gone is a logic error by construction.
    CHECK_THROWS_AS(w.ack_flush(p, 3.0), std::logic_error);
}

TEST_CASE("runs are deterministic in (config, seed) and differ across trials") {
    const Topology t = fig4();
    SimConfig c;
    c.timing = Timing::Slotted;
    c.horizon = 400;
    c.seed = 424242;
    c.record_events = true;

    const SimResult a = run_trial(t, c, 0);
    const SimResult b = run_trial(t, c, 0);
    CHECK(a.trace.times == b.trace.times);
    CHECK(a.trace.queues == b.trace.queues);
    CHECK(a.trace.events.size() == b.trace.events.size());
    CHECK(a.summary.delivered == b.summary.delivered);

    const SimResult other = run_trial(t, c, 1);
    CHECK(a.trace.queues != other.trace.queues);

    SimConfig c2 = c;
    c2.timing = Timing::Async;
    const SimResult a2 = run_trial(t, c2, 0);
    const SimResult b2 = run_trial(t, c2, 0);
    CHECK(a2.trace.queues == b2.trace.queues);
    CHECK(a2.summary.arrivals == b2.summary.arrivals);
}

TEST_CASE("degenerate arrival rates") {
    const Topology t = fig4();
    SimConfig c;
    c.timing = Timing::Slotted;
    c.horizon = 200;
    c.arrival_rate = 0.0;
    const SimResult quiet = run_trial(t, c, 0);
    CHECK(quiet.summary.arrivals == 0);
    CHECK(quiet.summary.delivered == 0);
    for (const auto& series : quiet.trace.queues)
        for (const auto q : series) CHECK(q == 0);

    c.arrival_rate = 1.0; // an arrival every slot
    const SimResult busy = run_trial(t, c, 0);
    CHECK(busy.summary.arrivals == 200);

    c.arrival_rate = 1.5;
    CHECK_THROWS_AS(run_trial(t, c, 0), ValidationError);
    c.arrival_rate = 0.5;
    c.feedback_delay = 2;
    CHECK_THROWS_AS(run_trial(t, c, 0), ValidationError);
}

TEST_CASE("invariants hold after every async event and every slot") {
    for (const bool slotted : {false, true}) {
        for (int trial = 0; trial < 3; ++trial) {
            const Topology t = fig4(0.45);
            SimConfig c;
            c.timing = slotted ? Timing::Slotted : Timing::Async;
            c.horizon = slotted ? 400 : 300;
            c.seed = 777;
            long checks = 0;
            const auto obs = [&](const SimWorld& w, const EventRecord&) {
                ++checks;
                // Relay buffers are subsets of the source buffer.
                for (int r = 1; r <= 2; ++r)
                    for (const PacketId p : w.buffer(r).items())
                        CHECK(w.buffer(0).contains(p));
                // Conservation.
                CHECK(w.arrivals() == w.delivered() + w.queue(0));
                // Incremental m-state vs rebuilt-from-buffers.
                CHECK(w.tracked_state() == state_from_buffers(2, w.buffer_contents()));
            };
            run_trial(t, c, trial, obs);
            CHECK(checks > 100);
        }
    }
}

TEST_CASE("async throughput converges to the arrival rate below the min-cut") {
    const Topology t = n1_half(0.5); // min-cut 0.75
    SimConfig c;
    c.timing = Timing::Async;
    c.horizon = 1e5;
    c.sample_interval = 100.0;
    double mean_thr = 0.0;
    const int seeds = 20;
    for (int trial = 0; trial < seeds; ++trial)
        mean_thr += run_trial(t, c, trial).summary.throughput;
    mean_thr /= seeds;
    CHECK(std::abs(mean_thr - 0.5) / 0.5 < 0.02);
}

TEST_CASE("overloaded slotted source queue grows at the fluid rate") {
    // lambda above the min-cut: the source backlog grows at lambda - 0.5.
    const Topology t = fig4(0.55);
    SimConfig c;
    c.timing = Timing::Slotted;
    c.horizon = 20000;
    double mean_final = 0.0;
    const int seeds = 50;
    for (int trial = 0; trial < seeds; ++trial) {
        const SimResult r = run_trial(t, c, trial);
        mean_final += static_cast<double>(r.trace.queues[0].back());
    }
    mean_final /= seeds;
    const double predicted = (0.55 - 0.5) * 20000;
    CHECK(std::abs(mean_final - predicted) / predicted < 0.2);
}

TEST_CASE("loaded-but-stable source queue stays bounded at long horizons") {
    // lambda = 0.9 min-cut: the time-averaged source queue settles; the
    // running mean at the full horizon stays within noise of the mean at
    // half horizon instead of growing.
    const Topology t = fig4(0.45);
    SimConfig c;
    c.timing = Timing::Slotted;
    c.horizon = 100000;
    const int seeds = 20;
    double first_half = 0.0, second_half = 0.0;
    for (int trial = 0; trial < seeds; ++trial) {
        const SimResult r = run_trial(t, c, trial);
        const auto& q = r.trace.queues[0];
        double a = 0.0, b = 0.0;
        for (std::size_t k = 0; k < q.size() / 2; ++k) a += static_cast<double>(q[k]);
        for (std::size_t k = q.size() / 2; k < q.size(); ++k) b += static_cast<double>(q[k]);
        first_half += a / (q.size() / 2.0);
        second_half += b / (q.size() - q.size() / 2.0);
    }
    first_half /= seeds;
    second_half /= seeds;
    CHECK(second_half < 100.0); // bounded, nowhere near linear growth
    CHECK(second_half < first_half * 1.25);
    CHECK(second_half > first_half * 0.75);
}

TEST_CASE("ack wins over same-slot relay reception") {
    // Every source transmission reaches both the relay and the
    // destination, so packets are flushed before the relay keeps a copy.
    Topology t(1, 1.0);
    t.set_erasure(0, 1, 0.0);
    t.set_erasure(0, 2, 0.0);
    SimConfig c;
    c.timing = Timing::Slotted;
    c.horizon = 50;
    const auto obs = [&](const SimWorld& w, const EventRecord&) {
        CHECK(w.queue(1) == 0);
        CHECK(w.queue(0) == 0); // the arriving packet is delivered the same slot
    };
    const SimResult r = run_trial(t, c, 0, obs);
    CHECK(r.summary.delivered == r.summary.arrivals);
}

TEST_CASE("feedback delay keeps packets buffered until the virtual destination") {
    const Topology t = n1_half(0.4);
    SimConfig c;
    c.timing = Timing::Async;
    c.horizon = 2000;
    c.feedback_delay = 3;
    c.record_events = true;

    // Effective network: relays 1 (original), 2 (old destination), 3-4
    // (chain); node 5 is the virtual destination.
    const Topology eff = effective_topology(t, c);
    REQUIRE(eff.relay_count() == 4);
    const std::uint32_t old_dest_bit = node_bit(2);
    const std::uint32_t virt_dest_bit = node_bit(5);

    long reached_old_dest_undelivered = 0;
    const auto obs = [&](const SimWorld& w, const EventRecord& rec) {
        if (rec.kind != EventRecord::Kind::Transmit || rec.packet == 0) return;
        if (rec.delivered) {
            // Deliveries happen only at the virtual destination.
            CHECK((rec.receivers & virt_dest_bit) != 0);
        } else if (rec.receivers & old_dest_bit) {
            // The real destination received, yet upstream copies stay.
            ++reached_old_dest_undelivered;
            CHECK(w.buffer(0).contains(rec.packet));
        }
    };
    const SimResult r = run_trial(t, c, 0, obs);
    CHECK(reached_old_dest_undelivered > 50);
    CHECK(r.summary.delivered > 0);
    CHECK(r.summary.mean_queue.size() == 5);
}

TEST_CASE("trial aggregation") {
    const Topology t = fig4();
    SimConfig c;
    c.timing = Timing::Slotted;
    c.horizon = 100;

    const SimResult one = run_trial(t, c, 0);
    const EnsembleStats single = aggregate_trials({one.trace});
    for (std::size_t i = 0; i < single.mean.size(); ++i)
        for (std::size_t s = 0; s < single.times.size(); ++s) {
            CHECK(single.mean[i][s] == static_cast<double>(one.trace.queues[i][s]));
            CHECK(single.stderr_mean[i][s] == 0.0);
        }

    const EnsembleStats twin = aggregate_trials({one.trace, one.trace});
    for (const auto& series : twin.stderr_mean)
        for (const double se : series) CHECK(se == 0.0);

    SimConfig c2 = c;
    c2.horizon = 50;
    const SimResult shorter = run_trial(t, c2, 1);
    CHECK_THROWS_AS(aggregate_trials({one.trace, shorter.trace}), std::invalid_argument);
}
