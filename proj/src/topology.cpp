#include "wensim/topology.hpp"

#include <algorithm>
#include <limits>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace wensim {

std::string node_name(const Topology& t, NodeId i) {
    if (i == t.source()) return "s";
    if (i == t.destination()) return "d";
    return std::to_string(i);
}

namespace {

std::string edge_str(const Topology& t, NodeId i, NodeId j) {
    return node_name(t, i) + "->" + node_name(t, j);
}

} // namespace

const Topology& validate(const Topology& t) {
    const int n = t.relay_count();
    if (n < 0) throw ValidationError("relay count must be >= 0");
    if (n > 24)
        throw ValidationError("relay count exceeds the supported limit of 24 "
                              "(cut enumeration is exhaustive over 2^n masks)");
    if (!(t.arrival_rate() >= 0.0))
        throw ValidationError("arrival rate must be >= 0");

    for (NodeId i = 0; i < t.node_count(); ++i) {
        for (NodeId j = 0; j < t.node_count(); ++j) {
            const double e = t.erasure(i, j);
            if (!(e >= 0.0 && e <= 1.0))
                throw ValidationError("probability out of range on edge " + edge_str(t, i, j));
            if (i == j && e != 1.0)
                throw ValidationError("self edge " + edge_str(t, i, j) + " must be absent");
            if (j == t.source() && e != 1.0)
                throw ValidationError("edge into source: " + edge_str(t, i, j));
            if (i == t.destination() && e != 1.0)
                throw ValidationError("edge out of destination: " + edge_str(t, i, j));
        }
    }

    const auto& rm = t.reception();
    if (rm.correlated()) {
        if (rm.dist.size() != static_cast<std::size_t>(t.node_count()))
            throw ValidationError("correlated reception needs one distribution per node");
        const std::uint32_t all_nodes = (1u << t.node_count()) - 1u;
        for (NodeId i = 0; i < t.node_count(); ++i) {
            if (i == t.destination()) {
                if (!rm.dist[i].empty())
                    throw ValidationError("destination cannot transmit");
                continue;
            }
            double total = 0.0;
            for (const auto& atom : rm.dist[i]) {
                if (!(atom.p >= 0.0 && atom.p <= 1.0))
                    throw ValidationError("reception probability out of range for tx " +
                                          node_name(t, i));
                if (atom.receivers & node_bit(i))
                    throw ValidationError("transmitter " + node_name(t, i) +
                                          " listed in its own receiver set");
                if (atom.receivers & node_bit(t.source()))
                    throw ValidationError("source listed as receiver for tx " + node_name(t, i));
                if (atom.receivers & ~all_nodes)
                    throw ValidationError("receiver mask out of range for tx " + node_name(t, i));
                total += atom.p;
            }
            if (std::abs(total - 1.0) > 1e-12)
                throw ValidationError("reception distribution not normalized for tx " +
                                      node_name(t, i));
        }
    }
    return t;
}

double node_cut_contribution(const Topology& t, NodeId i, CutSet s) {
    if (!s.contains(i, t.relay_count()))
        throw std::invalid_argument("node " + node_name(t, i) + " is not in the cut");
    const std::uint32_t comp = t.cut_complement_mask(s);
    if (t.reception().correlated()) {
        double sum = 0.0;
        for (const auto& atom : t.reception().dist[i])
            if (atom.receivers & comp) sum += atom.p;
        return sum;
    }
    double prod = 1.0;
    for (NodeId j = 0; j < t.node_count(); ++j)
        if (comp & node_bit(j)) prod *= t.erasure(i, j);
    return 1.0 - prod;
}

double node_cut_contribution_complement(const Topology& t, NodeId i, CutSet s) {
    if (!s.contains(i, t.relay_count()))
        throw std::invalid_argument("node " + node_name(t, i) + " is not in the cut");
    const std::uint32_t comp = t.cut_complement_mask(s);
    if (t.reception().correlated()) {
        double inside = 0.0;
        for (const auto& atom : t.reception().dist[i])
            if (!(atom.receivers & comp)) inside += atom.p;
        return 1.0 - inside;
    }
    // Independent erasures: P(nobody in S^C receives) is the same product
    // either way, so the two routes coincide by construction.
    double prod = 1.0;
    for (NodeId j = 0; j < t.node_count(); ++j)
        if (comp & node_bit(j)) prod *= t.erasure(i, j);
    return 1.0 - prod;
}

double cut_capacity(const Topology& t, CutSet s) {
    double c = node_cut_contribution(t, t.source(), s);
    for (int r = 1; r <= t.relay_count(); ++r)
        if (s.contains_relay(r)) c += node_cut_contribution(t, r, s);
    return c;
}

MinCut min_cut(const Topology& t) {
    MinCut best{std::numeric_limits<double>::infinity(), CutSet{0}};
    for (std::uint32_t mask = 0; mask < t.cut_count(); ++mask) {
        const double c = cut_capacity(t, CutSet{mask});
        if (c < best.rate) best = MinCut{c, CutSet{mask}};
    }
    return best;
}

double reception_probability(const Topology& t, NodeId i, std::uint32_t receiver_mask) {
    if (receiver_mask & node_bit(i))
        throw std::invalid_argument("transmitter cannot be its own receiver");
    if (t.reception().correlated()) {
        double p = 0.0;
        for (const auto& atom : t.reception().dist[i])
            if (atom.receivers == receiver_mask) p += atom.p;
        return p;
    }
    double p = 1.0;
    for (NodeId j = 0; j < t.node_count(); ++j) {
        if (j == i) continue;
        p *= (receiver_mask & node_bit(j)) ? t.success(i, j) : t.erasure(i, j);
    }
    return p;
}

ReceptionModel expand_to_correlated(const Topology& t) {
    ReceptionModel rm;
    rm.mode = ReceptionModel::Mode::Correlated;
    rm.dist.resize(t.node_count());
    // Positive support lives on subsets of {relays, destination} \ {i}:
    // the source never receives (no edges into it).
    std::vector<NodeId> candidates;
    for (NodeId i = 0; i < t.node_count(); ++i) {
        if (i == t.destination()) continue;
        candidates.clear();
        for (NodeId j = 1; j <= t.relay_count() + 1; ++j)
            if (j != i) candidates.push_back(j);
        const std::uint32_t subsets = 1u << candidates.size();
        for (std::uint32_t sub = 0; sub < subsets; ++sub) {
            double p = 1.0;
            std::uint32_t mask = 0;
            for (std::size_t k = 0; k < candidates.size(); ++k) {
                if (sub & (1u << k)) {
                    p *= t.success(i, candidates[k]);
                    mask |= node_bit(candidates[k]);
                } else {
                    p *= t.erasure(i, candidates[k]);
                }
            }
            if (p > 0.0) rm.dist[i].push_back({mask, p});
        }
    }
    return rm;
}

double subset_identity_check(const Topology& t, NodeId i, CutSet s1) {
    if (!s1.contains(i, t.relay_count()))
        throw std::invalid_argument("node " + node_name(t, i) + " is not in S1");
    const int n = t.relay_count();
    double worst = 0.0;

    // Total reception mass over every receiver subset is 1.
    {
        std::vector<NodeId> candidates;
        for (NodeId j = 1; j <= n + 1; ++j)
            if (j != i) candidates.push_back(j);
        double sum = 0.0;
        const std::uint32_t subsets = 1u << candidates.size();
        for (std::uint32_t sub = 0; sub < subsets; ++sub) {
            double p = 1.0;
            for (std::size_t k = 0; k < candidates.size(); ++k)
                p *= (sub & (1u << k)) ? t.success(i, candidates[k])
                                       : t.erasure(i, candidates[k]);
            sum += p;
        }
        worst = std::max(worst, std::abs(1.0 - sum));
    }

    // For every cut S containing S1, the mass of advances that escape S
    // equals 1 - prod over relays outside S of eps_ij (destination kept
    // out of both sides).
    const std::uint32_t full = t.cut_count() - 1u;
    const std::uint32_t free1 = full & ~s1.mask;
    for (std::uint32_t add = free1;; add = (add - 1) & free1) {
        const std::uint32_t s = s1.mask | add;
        double lhs = 0.0;
        const std::uint32_t grow = full & ~s1.mask;
        for (std::uint32_t g = grow;; g = (g - 1) & grow) {
            if (g != 0) { // S2 = S1 | g must be a strict superset
                const std::uint32_t s2 = s1.mask | g;
                if ((s2 & ~s) != 0) { // and escape S
                    double p = 1.0;
                    for (int r = 1; r <= n; ++r) {
                        const std::uint32_t bit = 1u << (r - 1);
                        if (g & bit) p *= t.success(i, r);
                        else if (!(s2 & bit)) p *= t.erasure(i, r);
                    }
                    lhs += p;
                }
            }
            if (g == 0) break;
        }
        double rhs = 1.0;
        for (int r = 1; r <= n; ++r)
            if (!(s & (1u << (r - 1)))) rhs *= t.erasure(i, r);
        rhs = 1.0 - rhs;
        worst = std::max(worst, std::abs(lhs - rhs));
        if (add == 0) break;
    }
    return worst;
}

Topology insert_feedback_delay_chain(const Topology& t, int delay) {
    if (delay < 1) throw std::invalid_argument("delay chain length must be >= 1");
    const int n = t.relay_count();
    Topology out(n + delay, t.arrival_rate());
    // Old node ids are preserved: the old destination n+1 becomes a relay.
    for (NodeId i = 0; i <= n; ++i)
        for (NodeId j = 0; j <= n + 1; ++j)
            out.set_erasure(i, j, t.erasure(i, j));
    // Lossless serial chain: n+1 -> n+2 -> ... -> n+delay+1 (new destination).
    for (NodeId k = n + 1; k <= n + delay; ++k)
        out.set_erasure(k, k + 1, 0.0);

    if (t.reception().correlated()) {
        ReceptionModel rm;
        rm.mode = ReceptionModel::Mode::Correlated;
        rm.dist.resize(out.node_count());
        for (NodeId i = 0; i <= n; ++i) rm.dist[i] = t.reception().dist[i];
        for (NodeId k = n + 1; k <= n + delay; ++k)
            rm.dist[k].push_back({node_bit(k + 1), 1.0});
        out.set_reception(std::move(rm));
    }
    return out;
}

namespace {

NodeId parse_node(const nlohmann::json& v, const Topology& t, const char* field) {
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "s") return t.source();
        if (s == "d") return t.destination();
        try {
            std::size_t pos = 0;
            const int r = std::stoi(s, &pos);
            if (pos == s.size() && r >= 1 && r <= t.relay_count()) return r;
        } catch (const std::exception&) {
        }
        throw ValidationError(std::string(field) + ": unknown node '" + s + "'");
    }
    if (v.is_number_integer()) {
        const int r = v.get<int>();
        if (r >= 1 && r <= t.relay_count()) return r;
        throw ValidationError(std::string(field) + ": relay index " + std::to_string(r) +
                              " out of range");
    }
    throw ValidationError(std::string(field) + ": expected \"s\", \"d\" or a relay index");
}

} // namespace

Topology topology_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config parse error: ") + e.what());
    }
    try {
        if (!j.contains("relays"))
            throw ValidationError("config missing \"relays\"");
        const int n = j.at("relays").get<int>();
        const double lambda = j.value("arrival_rate", 0.0);
        Topology t(n, lambda);
        for (const auto& e : j.value("edges", nlohmann::json::array())) {
            const NodeId from = parse_node(e.at("from"), t, "from");
            const NodeId to = parse_node(e.at("to"), t, "to");
            t.set_erasure(from, to, e.at("erasure").get<double>());
        }
        if (j.contains("reception")) {
            const auto& r = j.at("reception");
            const std::string mode = r.at("mode").get<std::string>();
            if (mode == "correlated") {
                ReceptionModel rm;
                rm.mode = ReceptionModel::Mode::Correlated;
                rm.dist.resize(t.node_count());
                for (const auto& atom : r.at("dist")) {
                    const NodeId tx = parse_node(atom.at("tx"), t, "tx");
                    std::uint32_t mask = 0;
                    for (const auto& recv : atom.at("receivers"))
                        mask |= node_bit(parse_node(recv, t, "receivers"));
                    rm.dist[tx].push_back({mask, atom.at("p").get<double>()});
                }
                t.set_reception(std::move(rm));
            } else if (mode != "independent") {
                throw ValidationError("reception mode must be \"independent\" or \"correlated\"");
            }
        }
        validate(t);
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config error: ") + e.what());
    }
}

Topology load_topology_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return topology_from_json_text(ss.str());
}

} // namespace wensim
