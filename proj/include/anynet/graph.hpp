#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anynet/rng.hpp"

namespace anynet {

struct GraphError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class EdgeKind { linear, conv, depthwise_conv, residual_add, pool, io };

inline const char* to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::linear: return "linear";
        case EdgeKind::conv: return "conv";
        case EdgeKind::depthwise_conv: return "depthwise_conv";
        case EdgeKind::residual_add: return "residual_add";
        case EdgeKind::pool: return "pool";
        case EdgeKind::io: return "io";
    }
    return "?";
}

inline EdgeKind edge_kind_from_string(const std::string& s) {
    if (s == "linear") return EdgeKind::linear;
    if (s == "conv") return EdgeKind::conv;
    if (s == "depthwise_conv") return EdgeKind::depthwise_conv;
    if (s == "residual_add") return EdgeKind::residual_add;
    if (s == "pool") return EdgeKind::pool;
    if (s == "io") return EdgeKind::io;
    throw GraphError("unknown edge kind: " + s);
}

struct EdgeSpec {
    std::string id;
    std::string src, dst;
    EdgeKind kind = EdgeKind::linear;
    int c_in = 1, c_out = 1;
    double cost = 0.0;  // FLOPs at full width
    bool always_keep = false;
};

// Unvalidated description; SupernetGraph::build turns it into a graph.
struct GraphSpec {
    std::vector<std::string> nodes;
    std::vector<EdgeSpec> edges;
    std::string input, output;
};

// Which edges are kept and at which channel fractions. Fractions are stored
// per edge but are derived from per-node channel counts, so the coupling
// rules (consumer in_frac == producer out_frac, depthwise in == out) hold by
// construction. Fractions of dropped edges are 0.
struct SubnetworkMask {
    std::vector<char> kept;
    std::vector<double> in_frac, out_frac;

    bool is_kept(int e) const { return kept[static_cast<size_t>(e)] != 0; }

    friend bool operator==(const SubnetworkMask& a, const SubnetworkMask& b) {
        return a.kept == b.kept && a.in_frac == b.in_frac && a.out_frac == b.out_frac;
    }
};

// Per-edge keep probabilities plus the channel-fraction grid used when
// sampling subnetworks. If default_keep_prob is unset, every edge must have
// an explicit entry.
struct SamplingPolicy {
    std::optional<double> default_keep_prob = 0.5;
    std::map<std::string, double> keep_prob_overrides;
    std::vector<double> fraction_grid = {0.25, 0.5, 0.75, 1.0};
    int max_retries = 1000;

    double keep_prob_for(const EdgeSpec& e) const {
        auto it = keep_prob_overrides.find(e.id);
        double p;
        if (it != keep_prob_overrides.end()) p = it->second;
        else if (default_keep_prob) p = *default_keep_prob;
        else throw GraphError("sampling policy omits edge: " + e.id);
        if (p < 0.0 || p > 1.0) throw GraphError("keep probability outside [0,1] for edge: " + e.id);
        return p;
    }
};

class SupernetGraph {
public:
    static SupernetGraph build(const GraphSpec& spec) {
        SupernetGraph g;
        g.init(spec);
        return g;
    }

    int node_count() const { return static_cast<int>(nodes_.size()); }
    int edge_count() const { return static_cast<int>(edges_.size()); }
    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::vector<EdgeSpec>& edges() const { return edges_; }
    const EdgeSpec& edge(int e) const { return edges_[static_cast<size_t>(e)]; }
    const std::string& node_id(int v) const { return nodes_[static_cast<size_t>(v)]; }

    int input_index() const { return 0; }
    int output_index() const { return node_count() - 1; }

    int node_index(const std::string& id) const {
        auto it = node_index_.find(id);
        if (it == node_index_.end()) throw GraphError("unknown node: " + id);
        return it->second;
    }

    int edge_index(const std::string& id) const {
        auto it = edge_index_.find(id);
        if (it == edge_index_.end()) throw GraphError("unknown edge: " + id);
        return it->second;
    }

    int edge_src(int e) const { return edge_src_[static_cast<size_t>(e)]; }
    int edge_dst(int e) const { return edge_dst_[static_cast<size_t>(e)]; }

    // Channel count of the featuremap a node carries.
    int node_channels(int v) const { return node_channels_[static_cast<size_t>(v)]; }

    const std::vector<int>& topo_order() const { return topo_; }
    // Unique successor / predecessor node lists, sorted ascending.
    const std::vector<std::vector<int>>& successors() const { return succ_; }
    const std::vector<std::vector<int>>& predecessors() const { return pred_; }
    const std::vector<std::vector<int>>& out_edges() const { return out_edges_; }
    const std::vector<std::vector<int>>& in_edges() const { return in_edges_; }

    // All edges from node u to node v (parallel edges possible).
    std::vector<int> edges_between(int u, int v) const {
        std::vector<int> r;
        for (int e : out_edges_[static_cast<size_t>(u)])
            if (edge_dst_[static_cast<size_t>(e)] == v) r.push_back(e);
        return r;
    }

    std::string canonical_description() const {
        std::string s;
        for (const auto& n : nodes_) s += n + ";";
        s += "|";
        for (const auto& e : edges_) {
            s += e.id + "," + e.src + "," + e.dst + "," + to_string(e.kind) + ",";
            s += std::to_string(e.c_in) + "," + std::to_string(e.c_out) + ",";
            s += std::to_string(e.cost) + "," + (e.always_keep ? "1" : "0") + ";";
        }
        return s;
    }

    std::uint64_t content_hash() const { return hash_name(canonical_description()); }

private:
    void init(const GraphSpec& spec) {
        if (spec.nodes.empty()) throw GraphError("graph has no nodes");
        if (spec.input.empty() || spec.output.empty()) throw GraphError("missing input or output node");

        // Canonical node order: input first, output last, middle in file order.
        std::set<std::string> seen;
        bool has_in = false, has_out = false;
        for (const auto& n : spec.nodes) {
            if (!seen.insert(n).second) throw GraphError("duplicate node id: " + n);
            if (n == spec.input) has_in = true;
            if (n == spec.output) has_out = true;
        }
        if (!has_in) throw GraphError("missing input or output node: " + spec.input);
        if (!has_out) throw GraphError("missing input or output node: " + spec.output);
        if (spec.input == spec.output) throw GraphError("input and output must differ");
        nodes_.push_back(spec.input);
        for (const auto& n : spec.nodes)
            if (n != spec.input && n != spec.output) nodes_.push_back(n);
        nodes_.push_back(spec.output);
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) node_index_[nodes_[static_cast<size_t>(i)]] = i;

        edges_ = spec.edges;
        if (edges_.empty()) throw GraphError("graph has no edges");
        const size_t n = nodes_.size();
        out_edges_.assign(n, {});
        in_edges_.assign(n, {});
        for (int e = 0; e < static_cast<int>(edges_.size()); ++e) {
            const EdgeSpec& es = edges_[static_cast<size_t>(e)];
            if (es.id.empty()) throw GraphError("edge with empty id");
            if (!edge_index_.emplace(es.id, e).second) throw GraphError("duplicate edge id: " + es.id);
            edge_src_.push_back(node_index(es.src));
            edge_dst_.push_back(node_index(es.dst));
            if (edge_src_.back() == edge_dst_.back()) throw GraphError("self-loop edge: " + es.id);
            if (es.c_in <= 0 || es.c_out <= 0) throw GraphError("nonpositive channel count on edge: " + es.id);
            if (es.cost < 0) throw GraphError("negative cost on edge: " + es.id);
            if (es.kind == EdgeKind::depthwise_conv && es.c_in != es.c_out)
                throw GraphError("depthwise edge with c_in != c_out: " + es.id);
            out_edges_[static_cast<size_t>(edge_src_.back())].push_back(e);
            in_edges_[static_cast<size_t>(edge_dst_.back())].push_back(e);
        }

        // Unique sorted neighbor lists.
        succ_.assign(n, {});
        pred_.assign(n, {});
        for (size_t v = 0; v < n; ++v) {
            std::set<int> s, p;
            for (int e : out_edges_[v]) s.insert(edge_dst_[static_cast<size_t>(e)]);
            for (int e : in_edges_[v]) p.insert(edge_src_[static_cast<size_t>(e)]);
            succ_[v].assign(s.begin(), s.end());
            pred_[v].assign(p.begin(), p.end());
        }

        // Exactly one source (the input) and one sink (the output).
        for (size_t v = 0; v < n; ++v) {
            if (in_edges_[v].empty() && static_cast<int>(v) != input_index())
                throw GraphError("node without incoming edges is not the input: " + nodes_[v]);
            if (out_edges_[v].empty() && static_cast<int>(v) != output_index())
                throw GraphError("node without outgoing edges is not the output: " + nodes_[v]);
        }
        if (!in_edges_[static_cast<size_t>(input_index())].empty())
            throw GraphError("input node has incoming edges");
        if (!out_edges_[static_cast<size_t>(output_index())].empty())
            throw GraphError("output node has outgoing edges");

        // Kahn's algorithm; also detects cycles.
        std::vector<int> indeg(n, 0);
        for (size_t v = 0; v < n; ++v) indeg[v] = static_cast<int>(in_edges_[v].size());
        std::priority_queue<int, std::vector<int>, std::greater<>> q;
        for (size_t v = 0; v < n; ++v)
            if (indeg[v] == 0) q.push(static_cast<int>(v));
        while (!q.empty()) {
            int v = q.top();
            q.pop();
            topo_.push_back(v);
            for (int e : out_edges_[static_cast<size_t>(v)]) {
                int w = edge_dst_[static_cast<size_t>(e)];
                if (--indeg[static_cast<size_t>(w)] == 0) q.push(w);
            }
        }
        if (topo_.size() != n) throw GraphError("cyclic edge relation");

        // Channel consistency: all producers into a node agree on c_out, all
        // consumers agree on c_in, and the two match.
        node_channels_.assign(n, 0);
        for (size_t v = 0; v < n; ++v) {
            int width = 0;
            for (int e : in_edges_[v]) {
                int c = edges_[static_cast<size_t>(e)].c_out;
                if (width == 0) width = c;
                else if (width != c) throw GraphError("channel mismatch at node: " + nodes_[v]);
            }
            for (int e : out_edges_[v]) {
                int c = edges_[static_cast<size_t>(e)].c_in;
                if (width == 0) width = c;
                else if (width != c) throw GraphError("channel mismatch at node: " + nodes_[v]);
            }
            node_channels_[v] = width;
        }

        // Every node must lie on some input->output path.
        std::vector<char> fwd(n, 0), bwd(n, 0);
        reach(input_index(), succ_, fwd);
        reach(output_index(), pred_, bwd);
        for (size_t v = 0; v < n; ++v)
            if (!fwd[v] || !bwd[v])
                throw GraphError("node not on any input->output path: " + nodes_[v]);
    }

    static void reach(int start, const std::vector<std::vector<int>>& nbrs, std::vector<char>& mark) {
        std::vector<int> stack{start};
        mark[static_cast<size_t>(start)] = 1;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int w : nbrs[static_cast<size_t>(v)])
                if (!mark[static_cast<size_t>(w)]) {
                    mark[static_cast<size_t>(w)] = 1;
                    stack.push_back(w);
                }
        }
    }

    std::vector<std::string> nodes_;
    std::vector<EdgeSpec> edges_;
    std::map<std::string, int> node_index_, edge_index_;
    std::vector<int> edge_src_, edge_dst_;
    std::vector<int> node_channels_;
    std::vector<int> topo_;
    std::vector<std::vector<int>> succ_, pred_, out_edges_, in_edges_;
};

namespace detail {

inline bool mask_connects(const SupernetGraph& g, const std::vector<char>& kept) {
    std::vector<char> seen(static_cast<size_t>(g.node_count()), 0);
    std::vector<int> stack{g.input_index()};
    seen[static_cast<size_t>(g.input_index())] = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int e : g.out_edges()[static_cast<size_t>(v)]) {
            if (!kept[static_cast<size_t>(e)]) continue;
            int w = g.edge_dst(e);
            if (!seen[static_cast<size_t>(w)]) {
                seen[static_cast<size_t>(w)] = 1;
                stack.push_back(w);
            }
        }
    }
    return seen[static_cast<size_t>(g.output_index())] != 0;
}

// Nodes joined by a depthwise edge must share one channel fraction.
inline std::vector<int> fraction_classes(const SupernetGraph& g) {
    std::vector<int> parent(static_cast<size_t>(g.node_count()));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[static_cast<size_t>(x)] != x) {
            parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
            x = parent[static_cast<size_t>(x)];
        }
        return x;
    };
    for (int e = 0; e < g.edge_count(); ++e) {
        if (g.edge(e).kind != EdgeKind::depthwise_conv) continue;
        int a = find(g.edge_src(e)), b = find(g.edge_dst(e));
        if (a != b) parent[static_cast<size_t>(std::max(a, b))] = std::min(a, b);
    }
    std::vector<int> root(static_cast<size_t>(g.node_count()));
    for (int v = 0; v < g.node_count(); ++v) root[static_cast<size_t>(v)] = find(v);
    return root;
}

}  // namespace detail

// Randomly decide whether each optional edge remains, retrying until the kept
// set still connects input to output, then draw one channel fraction per node
// (per depthwise-coupled node class) from the policy grid. Fractions are
// exact channel ratios k/C, so masks round-trip through integer width
// configurations losslessly.
inline SubnetworkMask sample_subnetwork(const SupernetGraph& g, const SamplingPolicy& policy,
                                        std::mt19937_64& rng) {
    if (policy.fraction_grid.empty()) throw GraphError("empty fraction grid");
    for (double f : policy.fraction_grid)
        if (!(f > 0.0 && f <= 1.0)) throw GraphError("fraction grid value outside (0,1]");
    // Validate all probabilities up front so errors do not depend on draws.
    std::vector<double> keep_p(static_cast<size_t>(g.edge_count()));
    for (int e = 0; e < g.edge_count(); ++e)
        keep_p[static_cast<size_t>(e)] = g.edge(e).always_keep ? 1.0 : policy.keep_prob_for(g.edge(e));

    SubnetworkMask mask;
    mask.kept.assign(static_cast<size_t>(g.edge_count()), 0);
    bool ok = false;
    for (int attempt = 0; attempt < policy.max_retries && !ok; ++attempt) {
        for (int e = 0; e < g.edge_count(); ++e)
            mask.kept[static_cast<size_t>(e)] = (keep_p[static_cast<size_t>(e)] >= 1.0 ||
                                                 bernoulli(rng, keep_p[static_cast<size_t>(e)]))
                                                    ? 1
                                                    : 0;
        ok = detail::mask_connects(g, mask.kept);
    }
    if (!ok) throw GraphError("could not sample a connected subnetwork within retry budget");

    std::vector<int> cls = detail::fraction_classes(g);
    std::vector<double> frac(static_cast<size_t>(g.node_count()), 0.0);
    for (int v = 0; v < g.node_count(); ++v) {
        if (cls[static_cast<size_t>(v)] != v) continue;  // draw once per class root
        double gpick = policy.fraction_grid[uniform_index(rng, policy.fraction_grid.size())];
        int c = g.node_channels(v);
        int k = std::clamp(static_cast<int>(std::lround(gpick * c)), 1, c);
        frac[static_cast<size_t>(v)] = static_cast<double>(k) / static_cast<double>(c);
    }
    for (int v = 0; v < g.node_count(); ++v)
        frac[static_cast<size_t>(v)] = frac[static_cast<size_t>(cls[static_cast<size_t>(v)])];

    mask.in_frac.assign(static_cast<size_t>(g.edge_count()), 0.0);
    mask.out_frac.assign(static_cast<size_t>(g.edge_count()), 0.0);
    for (int e = 0; e < g.edge_count(); ++e) {
        if (!mask.is_kept(e)) continue;
        mask.in_frac[static_cast<size_t>(e)] = frac[static_cast<size_t>(g.edge_src(e))];
        mask.out_frac[static_cast<size_t>(e)] = frac[static_cast<size_t>(g.edge_dst(e))];
    }
    return mask;
}

inline void validate_mask(const SupernetGraph& g, const SubnetworkMask& mask) {
    if (static_cast<int>(mask.kept.size()) != g.edge_count()) throw GraphError("mask size mismatch");
    for (int e = 0; e < g.edge_count(); ++e)
        if (g.edge(e).always_keep && !mask.is_kept(e))
            throw GraphError("mask drops always-keep edge: " + g.edge(e).id);
    if (!detail::mask_connects(g, mask.kept)) throw GraphError("mask disconnects input from output");
}

// Symmetric 0/1 adjacency with self-loops on the input and output nodes.
inline Eigen::MatrixXd adjacency_matrix(const SupernetGraph& g, const SubnetworkMask& mask) {
    validate_mask(g, mask);
    const int n = g.node_count();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int e = 0; e < g.edge_count(); ++e) {
        if (!mask.is_kept(e)) continue;
        a(g.edge_src(e), g.edge_dst(e)) = 1.0;
        a(g.edge_dst(e), g.edge_src(e)) = 1.0;
    }
    a(0, 0) = 1.0;
    a(n - 1, n - 1) = 1.0;
    return a;
}

// Cost scaled bilinearly by the kept channel fractions; depthwise layers
// scale by the (shared) input fraction only.
inline double flops(const SupernetGraph& g, const SubnetworkMask& mask) {
    validate_mask(g, mask);
    double total = 0.0;
    for (int e = 0; e < g.edge_count(); ++e) {
        if (!mask.is_kept(e)) continue;
        const EdgeSpec& es = g.edge(e);
        double in = mask.in_frac[static_cast<size_t>(e)];
        double out = mask.out_frac[static_cast<size_t>(e)];
        total += es.kind == EdgeKind::depthwise_conv ? es.cost * in : es.cost * in * out;
    }
    return total;
}

inline SubnetworkMask full_mask(const SupernetGraph& g) {
    SubnetworkMask m;
    m.kept.assign(static_cast<size_t>(g.edge_count()), 1);
    m.in_frac.assign(static_cast<size_t>(g.edge_count()), 1.0);
    m.out_frac.assign(static_cast<size_t>(g.edge_count()), 1.0);
    return m;
}

}  // namespace anynet
