#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "anynet/graph.hpp"
#include "anynet/rng.hpp"
#include "anynet/trainer.hpp"

namespace anynet {

struct ParetoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Candidate {
    SubnetworkMask mask;
    double flops = 0.0;
    double accuracy = 0.0;
    int order = 0;  // sampling order, used to keep the earlier twin on exact ties
};

// Standard bi-objective dominance: no worse on both, strictly better on one.
inline bool dominates(const Candidate& a, const Candidate& b) {
    return a.flops <= b.flops && a.accuracy >= b.accuracy &&
           (a.flops < b.flops || a.accuracy > b.accuracy);
}

enum class FrontMode {
    standard,       // keep the mutually non-dominated set
    literal_paper,  // printed Algorithm-1 conditions, including the
                    // cheaper-but-less-accurate eviction branch
};

class ParetoFront {
public:
    explicit ParetoFront(FrontMode mode = FrontMode::standard) : mode_(mode) {}

    FrontMode mode() const { return mode_; }
    const std::vector<Candidate>& members() const { return members_; }
    bool empty() const { return members_.empty(); }

    void insert(Candidate c) {
        if (mode_ == FrontMode::standard) {
            for (const auto& m : members_) {
                if (dominates(m, c)) return;
                if (m.flops == c.flops && m.accuracy == c.accuracy) return;  // keep earlier twin
            }
            std::vector<Candidate> kept;
            kept.reserve(members_.size() + 1);
            for (auto& m : members_)
                if (!dominates(c, m)) kept.push_back(std::move(m));
            kept.push_back(std::move(c));
            members_ = std::move(kept);
        } else {
            bool optimal = true;
            std::vector<char> evict(members_.size(), 0);
            for (size_t i = 0; i < members_.size(); ++i) {
                const auto& m = members_[i];
                if (m.flops <= c.flops && m.accuracy > c.accuracy)
                    optimal = false;
                else if (m.flops <= c.flops && m.accuracy < c.accuracy)
                    evict[i] = 1;
            }
            std::vector<Candidate> kept;
            for (size_t i = 0; i < members_.size(); ++i)
                if (!evict[i]) kept.push_back(std::move(members_[i]));
            if (optimal) kept.push_back(std::move(c));
            members_ = std::move(kept);
        }
    }

private:
    FrontMode mode_;
    std::vector<Candidate> members_;
};

using Evaluator = std::function<double(const SubnetworkMask&)>;

struct ParetoSearchResult {
    ParetoFront front{FrontMode::standard};
    std::vector<Candidate> evaluated;  // everything that was scored, in order
    int skipped = 0;                   // evaluator failures
};

// Algorithm-1 style search: sample m subnetworks, score each, maintain the
// front. Evaluator exceptions skip the candidate.
inline ParetoSearchResult pareto_search(const SupernetGraph& g, const SamplingPolicy& policy,
                                        const Evaluator& evaluate, int m, std::mt19937_64& rng,
                                        FrontMode mode = FrontMode::standard) {
    if (m < 0) throw ParetoError("negative search step count");
    ParetoSearchResult res;
    res.front = ParetoFront(mode);
    for (int i = 0; i < m; ++i) {
        Candidate c;
        c.mask = sample_subnetwork(g, policy, rng);
        c.flops = flops(g, c.mask);
        c.order = i;
        try {
            c.accuracy = evaluate(c.mask);
        } catch (const std::exception&) {
            ++res.skipped;
            continue;
        }
        res.evaluated.push_back(c);
        res.front.insert(std::move(c));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Width-configuration store (runtime subnetwork switching without weights).

struct WidthConfigLayer {
    std::string layer_id;
    int c_in = 0, c_out = 0;  // effective channel counts
};

struct WidthConfig {
    std::string id;
    double budget_flops = 0.0;
    std::vector<WidthConfigLayer> layers;  // kept operations only
};

struct WidthConfigStore {
    std::uint64_t supernet_hash = 0;
    std::vector<WidthConfig> configs;
};

inline WidthConfigStore export_configs(const ParetoFront& front, const SupernetGraph& g) {
    if (front.empty()) throw ParetoError("cannot export an empty front");
    WidthConfigStore store;
    store.supernet_hash = g.content_hash();
    int idx = 0;
    for (const auto& c : front.members()) {
        WidthConfig cfg;
        cfg.id = "subnet" + std::to_string(idx++);
        cfg.budget_flops = c.flops;
        for (int e = 0; e < g.edge_count(); ++e) {
            if (!c.mask.is_kept(e)) continue;
            const EdgeSpec& es = g.edge(e);
            WidthConfigLayer layer;
            layer.layer_id = es.id;
            layer.c_in = static_cast<int>(std::llround(c.mask.in_frac[static_cast<size_t>(e)] * es.c_in));
            layer.c_out = static_cast<int>(std::llround(c.mask.out_frac[static_cast<size_t>(e)] * es.c_out));
            cfg.layers.push_back(std::move(layer));
        }
        store.configs.push_back(std::move(cfg));
    }
    return store;
}

// Rebuilds the exact mask a config was exported from. Fractions are formed by
// the same k/C division used at sampling time, so the round-trip is lossless.
inline SubnetworkMask config_to_mask(const WidthConfig& cfg, const SupernetGraph& g) {
    SubnetworkMask mask;
    mask.kept.assign(static_cast<size_t>(g.edge_count()), 0);
    mask.in_frac.assign(static_cast<size_t>(g.edge_count()), 0.0);
    mask.out_frac.assign(static_cast<size_t>(g.edge_count()), 0.0);
    for (const auto& layer : cfg.layers) {
        int e = g.edge_index(layer.layer_id);  // throws on missing layer
        const EdgeSpec& es = g.edge(e);
        if (layer.c_in < 1 || layer.c_in > es.c_in || layer.c_out < 1 || layer.c_out > es.c_out)
            throw ParetoError("config channel count out of range on layer: " + layer.layer_id);
        mask.kept[static_cast<size_t>(e)] = 1;
        mask.in_frac[static_cast<size_t>(e)] = static_cast<double>(layer.c_in) / es.c_in;
        mask.out_frac[static_cast<size_t>(e)] = static_cast<double>(layer.c_out) / es.c_out;
    }
    validate_mask(g, mask);
    return mask;
}

// Reconfigures a runnable net in place: width registers and edge enables
// change, parameters do not.
inline void apply_config(GraphNet& net, const WidthConfig& cfg) {
    const SupernetGraph& g = net.graph();
    std::vector<int> widths(static_cast<size_t>(g.node_count()), 0);
    std::vector<char> enabled(static_cast<size_t>(g.edge_count()), 0);
    for (const auto& layer : cfg.layers) {
        int e = g.edge_index(layer.layer_id);
        enabled[static_cast<size_t>(e)] = 1;
        int s = g.edge_src(e), d = g.edge_dst(e);
        auto assign = [&](int node, int w) {
            if (widths[static_cast<size_t>(node)] == 0) widths[static_cast<size_t>(node)] = w;
            else if (widths[static_cast<size_t>(node)] != w)
                throw ParetoError("config width conflict at node: " + g.node_id(node));
        };
        assign(s, layer.c_in);
        assign(d, layer.c_out);
    }
    for (int v = 0; v < g.node_count(); ++v)
        if (widths[static_cast<size_t>(v)] == 0) widths[static_cast<size_t>(v)] = g.node_channels(v);
    widths[static_cast<size_t>(g.input_index())] = g.node_channels(g.input_index());
    net.set_node_widths(widths, enabled);
}

inline nlohmann::json store_to_json(const WidthConfigStore& store) {
    nlohmann::json j;
    j["supernet_hash"] = std::to_string(store.supernet_hash);
    j["configs"] = nlohmann::json::array();
    for (const auto& c : store.configs) {
        nlohmann::json jc;
        jc["id"] = c.id;
        jc["budget_flops"] = c.budget_flops;
        jc["layers"] = nlohmann::json::array();
        for (const auto& l : c.layers)
            jc["layers"].push_back({{"layer_id", l.layer_id}, {"c_in", l.c_in}, {"c_out", l.c_out}});
        j["configs"].push_back(std::move(jc));
    }
    return j;
}

inline WidthConfigStore store_from_json(const nlohmann::json& j) {
    WidthConfigStore store;
    store.supernet_hash = std::stoull(j.at("supernet_hash").get<std::string>());
    for (const auto& jc : j.at("configs")) {
        WidthConfig c;
        c.id = jc.at("id").get<std::string>();
        c.budget_flops = jc.at("budget_flops").get<double>();
        for (const auto& jl : jc.at("layers"))
            c.layers.push_back({jl.at("layer_id").get<std::string>(), jl.at("c_in").get<int>(),
                                jl.at("c_out").get<int>()});
        store.configs.push_back(std::move(c));
    }
    return store;
}

// ---------------------------------------------------------------------------
// Bundled evaluators.

inline std::string mask_key(const SupernetGraph& g, const SubnetworkMask& mask) {
    std::string key;
    for (int e = 0; e < g.edge_count(); ++e) {
        if (!mask.is_kept(e)) continue;
        const EdgeSpec& es = g.edge(e);
        key += es.id + ":" + std::to_string(std::llround(mask.in_frac[static_cast<size_t>(e)] * es.c_in)) +
               ":" + std::to_string(std::llround(mask.out_frac[static_cast<size_t>(e)] * es.c_out)) + ";";
    }
    return key;
}

// Accuracy from a fixed table keyed by the canonical mask encoding.
inline Evaluator lookup_evaluator(const SupernetGraph& g, std::map<std::string, double> table) {
    return [&g, table = std::move(table)](const SubnetworkMask& mask) {
        auto it = table.find(mask_key(g, mask));
        if (it == table.end()) throw ParetoError("mask not present in lookup table");
        return it->second;
    };
}

// Test accuracy of a trained toy net evaluated under the candidate mask.
inline Evaluator toy_net_evaluator(const GraphNet& net, const ToyDataset& test) {
    return [&net, &test](const SubnetworkMask& mask) {
        const SupernetGraph& g = net.graph();
        GraphNet view = net;
        std::vector<int> widths(static_cast<size_t>(g.node_count()), 0);
        for (int e = 0; e < g.edge_count(); ++e) {
            if (!mask.is_kept(e)) continue;
            int s = g.edge_src(e), d = g.edge_dst(e);
            widths[static_cast<size_t>(s)] = std::max(
                widths[static_cast<size_t>(s)],
                static_cast<int>(std::llround(mask.in_frac[static_cast<size_t>(e)] * g.node_channels(s))));
            widths[static_cast<size_t>(d)] = std::max(
                widths[static_cast<size_t>(d)],
                static_cast<int>(std::llround(mask.out_frac[static_cast<size_t>(e)] * g.node_channels(d))));
        }
        for (int v = 0; v < g.node_count(); ++v)
            if (widths[static_cast<size_t>(v)] == 0) widths[static_cast<size_t>(v)] = g.node_channels(v);
        widths[static_cast<size_t>(g.input_index())] = g.node_channels(g.input_index());
        std::vector<char> enabled(mask.kept.begin(), mask.kept.end());
        view.set_node_widths(widths, enabled);
        return view.accuracy(test);
    };
}

// Deterministic stand-in used by the command-line demo: a saturating curve
// in FLOPs with a small mask-dependent perturbation.
inline Evaluator synthetic_evaluator(const SupernetGraph& g, double flops_scale) {
    return [&g, flops_scale](const SubnetworkMask& mask) {
        double f = flops(g, mask);
        double jitter = static_cast<double>(hash_name(mask_key(g, mask)) % 1000) / 1000.0;
        return 1.0 - std::exp(-f / flops_scale) * (0.8 + 0.2 * jitter);
    };
}

}  // namespace anynet
