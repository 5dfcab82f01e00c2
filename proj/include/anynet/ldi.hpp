#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "anynet/graph.hpp"
#include "anynet/rng.hpp"
#include "anynet/stats.hpp"
#include "anynet/templates.hpp"
#include "anynet/topo.hpp"

namespace anynet {

struct LdiError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Residual MLP supernet: `depth` dense layers of `width` neurons with a
// shortcut bridging every pair of consecutive layers. Weights are i.i.d.
// zero-mean Gaussian with variance q; the activation is the identity, so
// path Jacobians are exact matrix products.
struct MlpSupernet {
    int depth = 0, width = 0;
    double q = 0.0;
    std::vector<Eigen::MatrixXd> weights;  // weights[i] belongs to edge "lin<i+1>"
    SupernetGraph graph;

    const Eigen::MatrixXd& layer_weight(int edge_index) const {
        const EdgeSpec& e = graph.edge(edge_index);
        if (e.kind != EdgeKind::linear) throw LdiError("edge has no weight matrix: " + e.id);
        int layer = std::stoi(e.id.substr(3));  // "lin<k>"
        return weights[static_cast<size_t>(layer - 1)];
    }
};

inline MlpSupernet build_mlp_supernet(int depth, int width, double q, std::mt19937_64& rng) {
    if (depth < 2) throw LdiError("depth must be at least 2");
    if (width < 1) throw LdiError("width must be positive");
    if (!(q > 0.0)) throw LdiError("variance q must be positive");
    MlpSupernet s;
    s.depth = depth;
    s.width = width;
    s.q = q;
    s.graph = SupernetGraph::build(residual_mlp_spec(depth, width));
    double stddev = std::sqrt(q);
    s.weights.reserve(static_cast<size_t>(depth));
    for (int l = 0; l < depth; ++l) {
        Eigen::MatrixXd w(width, width);
        for (int i = 0; i < width; ++i)
            for (int j = 0; j < width; ++j) w(i, j) = normal(rng, 0.0, stddev);
        s.weights.push_back(std::move(w));
    }
    return s;
}

// Average node degree: links (weights plus skip connections) per neuron,
// input neurons excluded.
inline double effective_width(double links, double neurons_excl_input) {
    if (!(neurons_excl_input > 0.0)) throw LdiError("effective_width: zero denominator");
    if (links < 0.0) throw LdiError("effective_width: negative link count");
    return links / neurons_excl_input;
}

// Largest initialization variance for which the mean singular value of both
// compared paths stays below 1.
inline double epsilon_bound(double we_s, double we_l, double wr) {
    if (!(we_s > 0.0 && we_l > 0.0 && wr > 0.0)) throw LdiError("epsilon_bound: nonpositive input");
    double we = std::max(we_s, we_l);
    return 1.0 / (we + wr + 2.0 * std::sqrt(we * wr));
}

// Mean-field interval for the mean singular value.
inline std::pair<double, double> ldi_bounds(double q, double w_e, double w_r) {
    if (q < 0.0 || w_e < 0.0 || w_r < 0.0) throw LdiError("ldi_bounds: negative input");
    double a = std::sqrt(q * w_e), b = std::sqrt(q * w_r);
    return {a - b, a + b};
}

struct WidthStats {
    double w_e = 0.0;  // effective width of the path
    double w_r = 0.0;  // neurons per layer
    int D = 0;         // nodes on the path
};

// Fig-3 style counting along a path: a dense step contributes
// c_in*c_out weight links, a shortcut step contributes one link per neuron.
inline WidthStats path_width_stats(const MlpSupernet& s, const std::vector<int>& path) {
    if (path.size() < 2) throw LdiError("path too short for width stats");
    double links = 0.0;
    for (size_t i = 0; i + 1 < path.size(); ++i) {
        auto es = s.graph.edges_between(path[i], path[i + 1]);
        if (es.empty()) throw LdiError("path step without a supernet edge");
        for (int e : es) {
            const EdgeSpec& spec = s.graph.edge(e);
            links += spec.kind == EdgeKind::residual_add ? spec.c_out : static_cast<double>(spec.c_in) * spec.c_out;
        }
    }
    double neurons = static_cast<double>(path.size() - 1) * s.width;
    return {effective_width(links, neurons), static_cast<double>(s.width), static_cast<int>(path.size())};
}

// Product of per-step Jacobians along the path. Each step sums the Jacobians
// of all parallel supernet edges between its endpoints: a dense layer
// contributes its weight matrix, a residual merge an added identity.
// Residual edges not between consecutive path nodes are off-path branches and
// are ignored.
inline Eigen::MatrixXd path_jacobian(const MlpSupernet& s, const std::vector<int>& path) {
    if (path.empty()) throw LdiError("empty path");
    const int w = s.width;
    Eigen::MatrixXd j = Eigen::MatrixXd::Identity(w, w);
    for (size_t i = 0; i + 1 < path.size(); ++i) {
        auto es = s.graph.edges_between(path[i], path[i + 1]);
        if (es.empty())
            throw LdiError("path step without a supernet edge: " + s.graph.node_id(path[i]) + " -> " +
                           s.graph.node_id(path[i + 1]));
        Eigen::MatrixXd local = Eigen::MatrixXd::Zero(w, w);
        for (int e : es) {
            if (s.graph.edge(e).kind == EdgeKind::residual_add)
                local += Eigen::MatrixXd::Identity(w, w);
            else
                local += s.layer_weight(e);
        }
        j = local * j;
    }
    return j;
}

struct JacobianReport {
    std::vector<double> singular_values;  // nonincreasing
    double mean_sigma = 0.0;
    PathRecord path;
};

inline JacobianReport mean_singular_value(const Eigen::MatrixXd& m) {
    if (!m.allFinite()) throw LdiError("matrix has non-finite entries");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    JacobianReport r;
    r.singular_values.assign(svd.singularValues().data(),
                             svd.singularValues().data() + svd.singularValues().size());
    r.mean_sigma = mean(r.singular_values);
    return r;
}

// ---------------------------------------------------------------------------
// Empirical check that higher-TPS paths carry larger mean singular values.

struct Prop1DepthReport {
    int depth = 0;
    double spearman_rho = 0.0;
    double frac_sigma_le_1 = 0.0;     // E[sigma] <= 1 + slack, slack = 0.05
    bool hypothesis_ok = true;        // q <= epsilon over the sampled widths
    std::vector<PathRecord> paths;    // tps filled in
    std::vector<double> mean_sigmas;  // parallel to paths
};

struct Prop1Config {
    std::vector<int> depths = {80, 100, 120, 140};
    int width = 80;
    std::optional<double> q;  // default: 0.9 * epsilon for the configured width
    int path_len = 50;
    int n_paths = 30;
    AnalysisParams analysis;
    double sigma_slack = 0.05;
};

inline double default_prop1_q(int width) {
    double w = static_cast<double>(width);
    return 0.9 * epsilon_bound(w, w, w);
}

// Samples fixed-length computation paths from each supernet ("anywhere"
// endpoints: deep stacks admit no input-to-output path of 50 nodes) and
// correlates TPS against the mean singular value of the path Jacobian.
inline std::vector<Prop1DepthReport> verify_prop1(const Prop1Config& cfg, std::uint64_t seed) {
    std::vector<Prop1DepthReport> reports;
    double q = cfg.q ? *cfg.q : default_prop1_q(cfg.width);
    for (int depth : cfg.depths) {
        Prop1DepthReport rep;
        rep.depth = depth;
        auto wrng = substream(seed, "prop1.weights." + std::to_string(depth));
        MlpSupernet net = build_mlp_supernet(depth, cfg.width, q, wrng);

        auto arng = substream(seed, "prop1.analysis." + std::to_string(depth));
        AnalysisResult ana = analyze(net.graph, cfg.analysis, arng);

        auto prng = substream(seed, "prop1.paths." + std::to_string(depth));
        auto paths = sample_paths(net.graph, cfg.path_len, cfg.n_paths, prng, PathEndpoints::anywhere);

        std::vector<double> tps_v, sig_v;
        for (auto& p : paths) {
            p.tps = tps(p.nodes, ana.scores);
            auto ws = path_width_stats(net, p.nodes);
            if (q > epsilon_bound(ws.w_e, ws.w_e, ws.w_r)) rep.hypothesis_ok = false;
            auto jr = mean_singular_value(path_jacobian(net, p.nodes));
            tps_v.push_back(p.tps);
            sig_v.push_back(jr.mean_sigma);
        }
        rep.paths = std::move(paths);
        rep.mean_sigmas = sig_v;
        rep.spearman_rho = tps_v.size() >= 2 ? spearman(tps_v, sig_v)
                                             : std::numeric_limits<double>::quiet_NaN();
        int le = 0;
        for (double sgm : sig_v)
            if (sgm <= 1.0 + cfg.sigma_slack) ++le;
        rep.frac_sigma_le_1 = sig_v.empty() ? 0.0 : static_cast<double>(le) / sig_v.size();
        reports.push_back(std::move(rep));
    }
    return reports;
}

}  // namespace anynet
