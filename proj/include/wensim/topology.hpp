// Erasure network topology: directed graph with per-edge erasure
// probabilities, broadcast reception, cut enumeration and cut-set
// capacities.
//
// Node ids: 0 is the source, 1..n are relays, n+1 is the destination.
// A cut S always contains the source and never the destination, so it is
// stored as an n-bit mask over relays only (bit r-1 set <=> relay r in S).

#ifndef WENSIM_TOPOLOGY_HPP
#define WENSIM_TOPOLOGY_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wensim {

using NodeId = int;

// Data-dependent validation failure (bad config, bad probabilities).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CutSet {
    std::uint32_t mask = 0; // bit r-1 <=> relay r in S

    bool contains_relay(int relay) const { return (mask >> (relay - 1)) & 1u; }
    bool contains(NodeId node, int relays) const {
        if (node == 0) return true;          // source always in S
        if (node == relays + 1) return false; // destination never in S
        return contains_relay(node);
    }
    friend bool operator==(const CutSet&, const CutSet&) = default;
};

// Node-id masks (bit j <=> node j) are used for receiver sets W.
inline std::uint32_t node_bit(NodeId j) { return 1u << j; }

struct ReceptionAtom {
    std::uint32_t receivers = 0; // node-id mask, excludes the transmitter
    double p = 0.0;
};

struct ReceptionModel {
    enum class Mode { Independent, Correlated };
    Mode mode = Mode::Independent;
    // Per transmitter (index = node id), sparse: only atoms with p > 0.
    // Empty for the Independent mode.
    std::vector<std::vector<ReceptionAtom>> dist;

    bool correlated() const { return mode == Mode::Correlated; }
};

class Topology {
public:
    Topology() = default;
    // All edges absent (erasure 1 everywhere).
    Topology(int relays, double arrival_rate)
        : relays_(relays), arrival_rate_(arrival_rate),
          eps_(static_cast<std::size_t>(relays + 2) * (relays + 2), 1.0) {}

    int relay_count() const { return relays_; }
    int node_count() const { return relays_ + 2; }
    NodeId source() const { return 0; }
    NodeId destination() const { return relays_ + 1; }
    bool is_relay(NodeId i) const { return i >= 1 && i <= relays_; }

    double arrival_rate() const { return arrival_rate_; }
    void set_arrival_rate(double lambda) { arrival_rate_ = lambda; }

    double erasure(NodeId i, NodeId j) const {
        return eps_[static_cast<std::size_t>(i) * node_count() + j];
    }
    double success(NodeId i, NodeId j) const { return 1.0 - erasure(i, j); }
    void set_erasure(NodeId i, NodeId j, double eps) {
        eps_[static_cast<std::size_t>(i) * node_count() + j] = eps;
    }

    const ReceptionModel& reception() const { return reception_; }
    void set_reception(ReceptionModel m) { reception_ = std::move(m); }

    std::uint32_t cut_count() const { return 1u << relays_; }
    // Members of S as a node-id mask (source bit included).
    std::uint32_t cut_node_mask(CutSet s) const { return (s.mask << 1) | 1u; }
    // Complement S^C as a node-id mask (relays outside S plus destination).
    std::uint32_t cut_complement_mask(CutSet s) const {
        std::uint32_t out_relays = (~s.mask & (cut_count() - 1)) << 1;
        return out_relays | node_bit(destination());
    }

private:
    int relays_ = 0;
    double arrival_rate_ = 0.0;
    std::vector<double> eps_;
    ReceptionModel reception_;
};

std::string node_name(const Topology& t, NodeId i);

// Throws ValidationError on the first violated invariant, otherwise
// returns its argument.
const Topology& validate(const Topology& t);

// C_i(S): rate at which node i in S pushes packets across the S boundary.
double node_cut_contribution(const Topology& t, NodeId i, CutSet s);
// Same value via the complementary route 1 - P(nobody in S^C receives).
// Exact for both reception modes; used for agreement checks.
double node_cut_contribution_complement(const Topology& t, NodeId i, CutSet s);

double cut_capacity(const Topology& t, CutSet s);

struct MinCut {
    double rate = 0.0;
    CutSet cut;
};
// Exhaustive over all 2^n cuts; ties broken by smallest mask.
MinCut min_cut(const Topology& t);

// p(i, W): probability that exactly the node set W receives i's
// transmission. W is a node-id mask not containing i.
double reception_probability(const Topology& t, NodeId i, std::uint32_t receiver_mask);

// Exact correlated model equivalent to the topology's independent
// erasures (atoms with p > 0 only). Intended for small n.
ReceptionModel expand_to_correlated(const Topology& t);

// Max residual of the subset-sum identities behind the cut-capacity
// algebra: total reception probability sums to 1, and for every S
// containing S1 the "escapes S" mass equals 1 - prod_{j notin S, j != d}
// eps_ij. Requires i in S1.
double subset_identity_check(const Topology& t, NodeId i, CutSet s1);

// Models feedback delay: the old destination becomes a relay feeding a
// chain of lossless hops ending at a new virtual destination. `delay`
// new serial nodes are added in total (the last one is the new
// destination), so the relay count grows by `delay`.
Topology insert_feedback_delay_chain(const Topology& t, int delay);

// JSON config ingestion (format documented in README / configs/).
Topology topology_from_json_text(const std::string& text);
Topology load_topology_file(const std::string& path);

} // namespace wensim

#endif // WENSIM_TOPOLOGY_HPP
