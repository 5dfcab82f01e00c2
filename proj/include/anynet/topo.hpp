#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "anynet/dtmc.hpp"
#include "anynet/graph.hpp"
#include "anynet/rng.hpp"
#include "anynet/stats.hpp"

namespace anynet {

struct TopoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-node accumulated score: stationary mass summed over the T copies of
// each node. Scores over all nodes sum to 1.
struct TasTable {
    std::vector<double> mu;  // indexed by node
    int T = 0;
};

inline TasTable tas(const StationaryDistribution& pi, int T, int N) {
    if (static_cast<int>(pi.pi.size()) != T * N) throw TopoError("stationary dimension mismatch");
    TasTable t;
    t.T = T;
    t.mu.assign(static_cast<size_t>(N), 0.0);
    for (int k = 0; k < T; ++k)
        for (int v = 0; v < N; ++v) t.mu[static_cast<size_t>(v)] += pi.pi[static_cast<size_t>(k * N + v)];
    return t;
}

struct PathRecord {
    std::vector<int> nodes;  // node indices, in walk order
    double tps = 0.0;

    int length() const { return static_cast<int>(nodes.size()); }
};

// Sum of the TAS values over the node sequence, accumulated in path order.
inline double tps(const std::vector<int>& path, const TasTable& t) {
    if (path.empty()) throw TopoError("empty path");
    double s = 0.0;
    for (int v : path) {
        if (v < 0 || v >= static_cast<int>(t.mu.size())) throw TopoError("path node outside TAS table");
        s += t.mu[static_cast<size_t>(v)];
    }
    return s;
}

struct ImportanceLabels {
    std::vector<char> important;  // per edge

    bool is_important(int e) const { return important[static_cast<size_t>(e)] != 0; }
};

namespace detail {

// Lexicographic order on node-id sequences.
inline bool id_seq_less(const SupernetGraph& g, const std::vector<int>& a, const std::vector<int>& b) {
    size_t n = std::min(a.size(), b.size());
    for (size_t i = 0; i < n; ++i) {
        const std::string& x = g.node_id(a[i]);
        const std::string& y = g.node_id(b[i]);
        if (x != y) return x < y;
    }
    return a.size() < b.size();
}

struct DpCell {
    bool reached = false;
    double score = 0.0;
    std::vector<int> path;
};

inline void consider(const SupernetGraph& g, DpCell& cell, double score, const std::vector<int>& prefix,
                     int next) {
    if (cell.reached && score < cell.score) return;
    std::vector<int> cand = prefix;
    cand.push_back(next);
    if (!cell.reached || score > cell.score || id_seq_less(g, cand, cell.path)) {
        cell.reached = true;
        cell.score = score;
        cell.path = std::move(cand);
    }
}

}  // namespace detail

// Maximum-TPS computation path from input to output. Without a length
// constraint the score-maximizing path is returned; with one, the best path
// with exactly `length` nodes. Ties break toward the lexicographically
// smallest node-id sequence. Scores accumulate in walk order so results are
// bit-comparable with straightforward enumeration.
inline PathRecord max_tps_path(const SupernetGraph& g, const TasTable& t,
                               std::optional<int> length = std::nullopt) {
    const int n = g.node_count();
    if (static_cast<int>(t.mu.size()) != n) throw TopoError("TAS table does not match graph");
    const int r = g.input_index(), d = g.output_index();

    if (!length) {
        std::vector<detail::DpCell> best(static_cast<size_t>(n));
        detail::consider(g, best[static_cast<size_t>(r)], t.mu[static_cast<size_t>(r)], {}, r);
        for (int v : g.topo_order()) {
            if (!best[static_cast<size_t>(v)].reached) continue;
            const detail::DpCell cell = best[static_cast<size_t>(v)];  // copy: successors mutate best
            for (int w : g.successors()[static_cast<size_t>(v)])
                detail::consider(g, best[static_cast<size_t>(w)], cell.score + t.mu[static_cast<size_t>(w)],
                                 cell.path, w);
        }
        if (!best[static_cast<size_t>(d)].reached) throw TopoError("no input->output path");
        return {best[static_cast<size_t>(d)].path, best[static_cast<size_t>(d)].score};
    }

    const int D = *length;
    if (D < 1) throw TopoError("path length must be positive");
    // best[l][v]: best path of exactly l nodes from input ending at v.
    std::vector<std::vector<detail::DpCell>> best(static_cast<size_t>(D) + 1,
                                                  std::vector<detail::DpCell>(static_cast<size_t>(n)));
    detail::consider(g, best[1][static_cast<size_t>(r)], t.mu[static_cast<size_t>(r)], {}, r);
    for (int l = 2; l <= D; ++l)
        for (int v : g.topo_order()) {
            if (!best[static_cast<size_t>(l) - 1][static_cast<size_t>(v)].reached) continue;
            const detail::DpCell& cell = best[static_cast<size_t>(l) - 1][static_cast<size_t>(v)];
            for (int w : g.successors()[static_cast<size_t>(v)])
                detail::consider(g, best[static_cast<size_t>(l)][static_cast<size_t>(w)],
                                 cell.score + t.mu[static_cast<size_t>(w)], cell.path, w);
        }
    if (!best[static_cast<size_t>(D)][static_cast<size_t>(d)].reached)
        throw TopoError("no input->output path with " + std::to_string(D) + " nodes");
    return {best[static_cast<size_t>(D)][static_cast<size_t>(d)].path,
            best[static_cast<size_t>(D)][static_cast<size_t>(d)].score};
}

// Edges whose endpoints appear consecutively on the path are important, all
// remaining edges are not. Parallel edges share the label.
inline ImportanceLabels label_important(const SupernetGraph& g, const PathRecord& path) {
    ImportanceLabels labels;
    labels.important.assign(static_cast<size_t>(g.edge_count()), 0);
    if (path.nodes.empty()) throw TopoError("empty path");
    for (size_t i = 0; i + 1 < path.nodes.size(); ++i) {
        auto es = g.edges_between(path.nodes[i], path.nodes[i + 1]);
        if (es.empty())
            throw TopoError("path step without a supernet edge: " + g.node_id(path.nodes[i]) + " -> " +
                            g.node_id(path.nodes[i + 1]));
        for (int e : es) labels.important[static_cast<size_t>(e)] = 1;
    }
    return labels;
}

enum class PathEndpoints {
    input_to_output,  // paths from the input node to the output node
    anywhere,         // sub-paths starting and ending at arbitrary nodes
};

// Up to `count` distinct paths with exactly `length` nodes, sampled uniformly
// over all such paths (path counts carried in doubles). Deterministic per rng
// state.
inline std::vector<PathRecord> sample_paths(const SupernetGraph& g, int length, int count,
                                            std::mt19937_64& rng,
                                            PathEndpoints endpoints = PathEndpoints::input_to_output) {
    if (length < 1) throw TopoError("path length must be positive");
    if (count < 1) throw TopoError("path count must be positive");
    const int n = g.node_count();
    // cnt[l][v]: number of paths of exactly l nodes starting at v (and ending
    // at the output node in input_to_output mode).
    std::vector<std::vector<double>> cnt(static_cast<size_t>(length) + 1,
                                         std::vector<double>(static_cast<size_t>(n), 0.0));
    if (endpoints == PathEndpoints::input_to_output)
        cnt[1][static_cast<size_t>(g.output_index())] = 1.0;
    else
        for (int v = 0; v < n; ++v) cnt[1][static_cast<size_t>(v)] = 1.0;
    const auto& topo = g.topo_order();
    for (int l = 2; l <= length; ++l)
        for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
            double acc = 0.0;
            for (int w : g.successors()[static_cast<size_t>(*it)])
                acc += cnt[static_cast<size_t>(l) - 1][static_cast<size_t>(w)];
            cnt[static_cast<size_t>(l)][static_cast<size_t>(*it)] = acc;
        }

    std::vector<double> start_weight(static_cast<size_t>(n), 0.0);
    if (endpoints == PathEndpoints::input_to_output)
        start_weight[static_cast<size_t>(g.input_index())] = cnt[static_cast<size_t>(length)][static_cast<size_t>(g.input_index())];
    else
        start_weight = cnt[static_cast<size_t>(length)];
    double total = 0.0;
    for (double w : start_weight) total += w;
    if (total <= 0.0) throw TopoError("no path with " + std::to_string(length) + " nodes");

    auto pick_weighted = [&rng](const std::vector<double>& w, double sum) {
        double u = uniform01(rng) * sum;
        double acc = 0.0;
        size_t last = 0;
        for (size_t i = 0; i < w.size(); ++i) {
            if (w[i] <= 0.0) continue;
            acc += w[i];
            last = i;
            if (u < acc) return i;
        }
        return last;
    };

    std::set<std::vector<int>> seen;
    std::vector<PathRecord> out;
    const long max_attempts = std::max(1000L, 50L * count);
    for (long attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < count; ++attempt) {
        std::vector<int> path;
        int v = static_cast<int>(pick_weighted(start_weight, total));
        path.push_back(v);
        for (int rem = length - 1; rem > 0; --rem) {
            const auto& succ = g.successors()[static_cast<size_t>(v)];
            std::vector<double> w(succ.size());
            double s = 0.0;
            for (size_t i = 0; i < succ.size(); ++i) {
                w[i] = cnt[static_cast<size_t>(rem)][static_cast<size_t>(succ[i])];
                s += w[i];
            }
            v = succ[pick_weighted(w, s)];
            path.push_back(v);
        }
        if (seen.insert(path).second) out.push_back({path, 0.0});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Analysis pipeline: sample T subnetworks, build the chain, accumulate TAS.

struct AnalysisParams {
    int T = 8;
    double lambda = 1.0;
    double kappa = 1e-5;
    double tol = 1e-10;
    int max_iter = 100000;
    SamplingPolicy policy;        // uniform keep probabilities by default
    int coverage_retries = 100;   // batch retries for the coverage guarantee
};

struct AnalysisResult {
    std::vector<SubnetworkMask> masks;
    StationaryDistribution pi;
    TasTable scores;
};

// Draws T masks such that (if attainable within the retry budget) every
// optional edge appears in at least one of them; otherwise the best-covering
// batch seen is used.
inline std::vector<SubnetworkMask> sample_analysis_masks(const SupernetGraph& g,
                                                         const AnalysisParams& p,
                                                         std::mt19937_64& rng) {
    std::vector<SubnetworkMask> best;
    int best_cov = -1;
    for (int attempt = 0; attempt < std::max(1, p.coverage_retries); ++attempt) {
        std::vector<SubnetworkMask> batch;
        batch.reserve(static_cast<size_t>(p.T));
        for (int k = 0; k < p.T; ++k) batch.push_back(sample_subnetwork(g, p.policy, rng));
        int covered = 0, optional_edges = 0;
        for (int e = 0; e < g.edge_count(); ++e) {
            if (g.edge(e).always_keep) continue;
            ++optional_edges;
            for (const auto& m : batch)
                if (m.is_kept(e)) {
                    ++covered;
                    break;
                }
        }
        if (covered > best_cov) {
            best_cov = covered;
            best = std::move(batch);
        }
        if (best_cov == optional_edges) break;
    }
    return best;
}

inline AnalysisResult analyze(const SupernetGraph& g, const AnalysisParams& p, std::mt19937_64& rng) {
    if (p.T < 1) throw TopoError("subnetwork count must be positive");
    AnalysisResult r;
    r.masks = sample_analysis_masks(g, p, rng);
    auto h = HyperAdjacency::build(r.masks, g, p.lambda);
    auto pm = TransitionMatrix::build(std::move(h), p.kappa);
    r.pi = stationary(pm, p.tol, p.max_iter);
    r.scores = tas(r.pi, p.T, g.node_count());
    return r;
}

// ---------------------------------------------------------------------------
// Ablation drivers.

struct StabilityRow {
    int T = 0;
    double mean_tps = 0.0;
    double std_tps = 0.0;
};

struct StabilityReport {
    PathRecord reference;  // fixed path scored under every resample
    std::vector<StabilityRow> rows;
};

// Resamples the subnetwork batch `runs` times per T and reports the spread of
// the reference path's TPS. The reference is the max-TPS path of a baseline
// analysis (length-constrained when ref_path_len > 0).
inline StabilityReport tps_stability(const SupernetGraph& g, const std::vector<int>& T_values, int runs,
                                     std::uint64_t seed, const AnalysisParams& base_params,
                                     int ref_path_len = 0) {
    if (runs < 2) throw TopoError("stability needs at least 2 runs");
    StabilityReport rep;
    {
        auto rng = substream(seed, "stability.reference");
        AnalysisResult base = analyze(g, base_params, rng);
        rep.reference = ref_path_len > 0 ? max_tps_path(g, base.scores, ref_path_len)
                                         : max_tps_path(g, base.scores);
    }
    for (int T : T_values) {
        AnalysisParams p = base_params;
        p.T = T;
        auto rng = substream(seed, "stability.runs.T" + std::to_string(T));
        std::vector<double> vals;
        vals.reserve(static_cast<size_t>(runs));
        for (int run = 0; run < runs; ++run) {
            AnalysisResult res = analyze(g, p, rng);
            vals.push_back(tps(rep.reference.nodes, res.scores));
        }
        rep.rows.push_back({T, mean(vals), sample_std(vals)});
    }
    return rep;
}

struct SweepCell {
    double tps = 0.0;
    int rank = 0;  // 1 = highest TPS at this lambda
};

struct LambdaSweepReport {
    std::vector<PathRecord> paths;
    std::vector<double> lambdas;
    std::vector<std::vector<SweepCell>> table;  // [path][lambda]
    bool rank_order_invariant = false;
};

// Fixed masks, fixed paths; TPS and rank per lambda. Ranks use average ranks
// for exact ties, so tie structure must also agree for invariance to hold.
inline LambdaSweepReport lambda_sweep(const SupernetGraph& g, const std::vector<double>& lambdas,
                                      int n_paths, int path_len, std::uint64_t seed,
                                      const AnalysisParams& base_params,
                                      PathEndpoints endpoints = PathEndpoints::input_to_output) {
    if (lambdas.empty()) throw TopoError("empty lambda grid");
    LambdaSweepReport rep;
    rep.lambdas = lambdas;
    std::vector<SubnetworkMask> masks;
    {
        auto rng = substream(seed, "sweep.masks");
        masks = sample_analysis_masks(g, base_params, rng);
    }
    {
        auto rng = substream(seed, "sweep.paths");
        rep.paths = sample_paths(g, path_len, n_paths, rng, endpoints);
    }
    if (rep.paths.empty()) throw TopoError("no paths sampled for sweep");

    rep.table.assign(rep.paths.size(), std::vector<SweepCell>(lambdas.size()));
    std::vector<std::vector<double>> rank_cols;
    for (size_t li = 0; li < lambdas.size(); ++li) {
        auto h = HyperAdjacency::build(masks, g, lambdas[li]);
        auto pm = TransitionMatrix::build(std::move(h), base_params.kappa);
        auto pi = stationary(pm, base_params.tol, base_params.max_iter);
        auto scores = tas(pi, base_params.T, g.node_count());
        std::vector<double> col(rep.paths.size());
        for (size_t pi_idx = 0; pi_idx < rep.paths.size(); ++pi_idx)
            col[pi_idx] = tps(rep.paths[pi_idx].nodes, scores);
        std::vector<double> neg(col.size());
        for (size_t i = 0; i < col.size(); ++i) neg[i] = -col[i];
        auto rk = ranks(neg);  // rank 1 = highest TPS
        for (size_t i = 0; i < col.size(); ++i) {
            rep.table[i][li].tps = col[i];
            rep.table[i][li].rank = static_cast<int>(std::lround(rk[i]));
        }
        rank_cols.push_back(rk);
        if (li == 0)
            for (size_t i = 0; i < rep.paths.size(); ++i) rep.paths[i].tps = col[i];
    }
    rep.rank_order_invariant = true;
    for (size_t li = 1; li < rank_cols.size(); ++li)
        if (rank_cols[li] != rank_cols[0]) rep.rank_order_invariant = false;
    return rep;
}

}  // namespace anynet
