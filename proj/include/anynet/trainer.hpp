#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "anynet/dataset.hpp"
#include "anynet/graph.hpp"
#include "anynet/rng.hpp"
#include "anynet/stats.hpp"
#include "anynet/topo.hpp"

namespace anynet {

struct TrainerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Effective per-channel sampling probability of an operation.
inline double tips_sampling_prob(double base, bool important, double boost) {
    if (!(base >= 0.0 && base <= 1.0)) throw TrainerError("base probability outside [0,1]");
    if (!(boost >= 1.0)) throw TrainerError("boost must be >= 1");
    return important ? std::min(1.0, base * boost) : base;
}

// Contiguous prefix of round(prob * width) channels, at least one.
inline int sample_channel_mask(int layer_width, double prob) {
    if (layer_width <= 0) throw TrainerError("zero layer width");
    if (!(prob > 0.0 && prob <= 1.0)) throw TrainerError("channel probability outside (0,1]");
    return std::clamp(static_cast<int>(std::lround(prob * layer_width)), 1, layer_width);
}

// Channel-level sampling policy for training: base fractions are drawn from
// a grid; operations labeled important get the boosted fraction.
struct TrainSamplingPolicy {
    std::vector<double> fraction_grid = {0.5, 0.75};
    double boost = 1.5;
    ImportanceLabels labels;             // per edge
    std::vector<char> important_nodes;   // nodes produced by important operations
};

inline TrainSamplingPolicy make_train_policy(const SupernetGraph& g, const ImportanceLabels& labels,
                                             double boost, std::vector<double> grid = {0.5, 0.75}) {
    TrainSamplingPolicy p;
    p.fraction_grid = std::move(grid);
    p.boost = boost;
    p.labels = labels;
    p.important_nodes.assign(static_cast<size_t>(g.node_count()), 0);
    for (int e = 0; e < g.edge_count(); ++e)
        if (labels.is_important(e)) p.important_nodes[static_cast<size_t>(g.edge_dst(e))] = 1;
    return p;
}

struct LossSpec {
    int subnets_per_step = 3;
    double kd_temperature = 1.0;
};

// Runnable supernet over a DAG of dense and residual operations with one
// shared body width. Subnetworks are channel prefixes of the shared weights;
// restricting widths never copies parameters.
class GraphNet {
public:
    GraphNet(const SupernetGraph& g, int width, int classes, std::mt19937_64& rng)
        : graph_(&g), width_(width), classes_(classes) {
        for (int v = 0; v < g.node_count(); ++v)
            if (g.node_channels(v) != width) throw TrainerError("GraphNet requires a uniform body width");
        double s = std::sqrt(2.0 / width);
        for (int e = 0; e < g.edge_count(); ++e) {
            if (g.edge(e).kind == EdgeKind::residual_add) continue;
            Eigen::MatrixXd w(width, width);
            for (int i = 0; i < width; ++i)
                for (int j = 0; j < width; ++j) w(i, j) = normal(rng, 0.0, s);
            weights_[e] = std::move(w);
        }
        head_.resize(classes, width);
        double sh = std::sqrt(1.0 / width);
        for (int i = 0; i < classes; ++i)
            for (int j = 0; j < width; ++j) head_(i, j) = normal(rng, 0.0, sh);
        node_width_.assign(static_cast<size_t>(g.node_count()), width);
        edge_enabled_.assign(static_cast<size_t>(g.edge_count()), 1);
    }

    const SupernetGraph& graph() const { return *graph_; }
    int width() const { return width_; }
    int classes() const { return classes_; }
    Eigen::MatrixXd& weight(int e) { return weights_.at(e); }
    const Eigen::MatrixXd& weight(int e) const { return weights_.at(e); }
    Eigen::MatrixXd& head() { return head_; }

    // Runtime width registers (Alg.-2 style reconfiguration): set once, used
    // by forward() when no explicit widths are passed. No weights move.
    void set_node_widths(const std::vector<int>& widths, const std::vector<char>& enabled) {
        if (static_cast<int>(widths.size()) != graph_->node_count() ||
            static_cast<int>(enabled.size()) != graph_->edge_count())
            throw TrainerError("width register size mismatch");
        node_width_ = widths;
        edge_enabled_ = enabled;
    }
    void reset_node_widths() {
        node_width_.assign(static_cast<size_t>(graph_->node_count()), width_);
        edge_enabled_.assign(static_cast<size_t>(graph_->edge_count()), 1);
    }
    const std::vector<int>& node_widths() const { return node_width_; }
    const std::vector<char>& enabled_edges() const { return edge_enabled_; }

    // Zero the output of the last ceil(ratio*width) channels of one
    // operation; returns the modified copy.
    GraphNet prune_channels(const std::string& edge_id, double ratio) const {
        if (!(ratio >= 0.0 && ratio <= 1.0)) throw TrainerError("prune ratio outside [0,1]");
        int e = graph_->edge_index(edge_id);  // throws on unknown operation
        GraphNet copy = *this;
        int n_zero = static_cast<int>(std::ceil(ratio * width_));
        if (n_zero > 0) copy.pruned_[e] = std::max(copy.pruned_.count(e) ? copy.pruned_[e] : 0, n_zero);
        return copy;
    }

    struct ForwardCache {
        Eigen::MatrixXd input;
        std::map<int, Eigen::MatrixXd> acts;          // node -> activation buffer
        std::map<int, Eigen::MatrixXd> pre_relu;      // dense edge -> pre-activation
        std::vector<int> widths;                      // per node
        Eigen::MatrixXd logits;
    };

    ForwardCache forward(const Eigen::MatrixXd& x, const std::vector<int>* widths_opt = nullptr) const {
        const SupernetGraph& g = *graph_;
        ForwardCache c;
        c.input = x;
        c.widths = widths_opt ? *widths_opt : node_width_;
        if (static_cast<int>(c.widths.size()) != g.node_count()) throw TrainerError("width vector size mismatch");
        const auto n_samples = x.cols();
        if (x.rows() != width_) throw TrainerError("input dimension mismatch");
        c.acts[g.input_index()] = x;
        for (int v : g.topo_order()) {
            if (v == g.input_index()) continue;
            int k = c.widths[static_cast<size_t>(v)];
            Eigen::MatrixXd buf = Eigen::MatrixXd::Zero(width_, n_samples);
            for (int e : g.in_edges()[static_cast<size_t>(v)]) {
                if (!edge_enabled_[static_cast<size_t>(e)]) continue;
                int s = g.edge_src(e);
                int ks = c.widths[static_cast<size_t>(s)];
                const Eigen::MatrixXd& src = c.acts.at(s);
                Eigen::MatrixXd contrib = Eigen::MatrixXd::Zero(width_, n_samples);
                if (g.edge(e).kind == EdgeKind::residual_add) {
                    int m = std::min(k, ks);
                    contrib.topRows(m) = src.topRows(m);
                } else {
                    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(width_, n_samples);
                    z.topRows(k) = weights_.at(e).topLeftCorner(k, ks) * src.topRows(ks);
                    c.pre_relu[e] = z;
                    contrib.topRows(k) = z.topRows(k).cwiseMax(0.0);
                }
                auto it = pruned_.find(e);
                if (it != pruned_.end() && it->second > 0) contrib.bottomRows(it->second).setZero();
                buf += contrib;
            }
            c.acts[v] = std::move(buf);
        }
        c.logits = head_ * c.acts.at(g.output_index());
        return c;
    }

    struct Gradients {
        std::map<int, Eigen::MatrixXd> weights;
        Eigen::MatrixXd head;
    };

    Gradients zero_gradients() const {
        Gradients grad;
        for (const auto& [e, w] : weights_) grad.weights[e] = Eigen::MatrixXd::Zero(w.rows(), w.cols());
        grad.head = Eigen::MatrixXd::Zero(head_.rows(), head_.cols());
        return grad;
    }

    void backward(const ForwardCache& c, const Eigen::MatrixXd& glogits, Gradients& grad) const {
        const SupernetGraph& g = *graph_;
        grad.head += glogits * c.acts.at(g.output_index()).transpose();
        std::map<int, Eigen::MatrixXd> gacts;
        gacts[g.output_index()] = head_.transpose() * glogits;
        const auto& topo = g.topo_order();
        for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
            int v = *it;
            if (v == g.input_index()) continue;
            auto git = gacts.find(v);
            if (git == gacts.end()) continue;
            Eigen::MatrixXd gv = std::move(git->second);
            int k = c.widths[static_cast<size_t>(v)];
            for (int e : g.in_edges()[static_cast<size_t>(v)]) {
                if (!edge_enabled_[static_cast<size_t>(e)]) continue;
                int s = g.edge_src(e);
                int ks = c.widths[static_cast<size_t>(s)];
                Eigen::MatrixXd ge = gv;
                auto pit = pruned_.find(e);
                if (pit != pruned_.end() && pit->second > 0) ge.bottomRows(pit->second).setZero();
                Eigen::MatrixXd gs = Eigen::MatrixXd::Zero(width_, gv.cols());
                if (g.edge(e).kind == EdgeKind::residual_add) {
                    int m = std::min(k, ks);
                    gs.topRows(m) = ge.topRows(m);
                } else {
                    const Eigen::MatrixXd& z = c.pre_relu.at(e);
                    Eigen::MatrixXd gz = ((z.array() > 0.0).cast<double>() * ge.array()).matrix();
                    if (k < width_) gz.bottomRows(width_ - k).setZero();
                    grad.weights.at(e).topLeftCorner(k, ks) +=
                        gz.topRows(k) * c.acts.at(s).topRows(ks).transpose();
                    gs.topRows(ks) = weights_.at(e).topLeftCorner(k, ks).transpose() * gz.topRows(k);
                }
                auto sit = gacts.find(s);
                if (sit == gacts.end())
                    gacts.emplace(s, std::move(gs));
                else
                    sit->second += gs;
            }
        }
    }

    void apply_gradients(const Gradients& grad, double lr) {
        for (auto& [e, w] : weights_) w -= lr * grad.weights.at(e);
        head_ -= lr * grad.head;
    }

    double accuracy(const ToyDataset& data) const {
        auto c = forward(data.x);
        int correct = 0;
        for (int i = 0; i < data.size(); ++i) {
            int arg = 0;
            c.logits.col(i).maxCoeff(&arg);
            if (arg == data.y[static_cast<size_t>(i)]) ++correct;
        }
        return static_cast<double>(correct) / data.size();
    }

private:
    const SupernetGraph* graph_;
    int width_, classes_;
    std::map<int, Eigen::MatrixXd> weights_;
    Eigen::MatrixXd head_;
    std::vector<int> node_width_;
    std::vector<char> edge_enabled_;
    std::map<int, int> pruned_;
};

inline Eigen::MatrixXd softmax_cols(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p = logits;
    for (int i = 0; i < p.cols(); ++i) {
        Eigen::VectorXd col = p.col(i);
        double m = col.maxCoeff();
        col = (col.array() - m).exp();
        p.col(i) = col / col.sum();
    }
    return p;
}

// Mean cross-entropy and its logit gradient.
inline std::pair<double, Eigen::MatrixXd> cross_entropy(const Eigen::MatrixXd& logits,
                                                        const std::vector<int>& y) {
    Eigen::MatrixXd p = softmax_cols(logits);
    const auto n = logits.cols();
    double loss = 0.0;
    Eigen::MatrixXd grad = p;
    for (int i = 0; i < n; ++i) {
        double q = std::max(p(y[static_cast<size_t>(i)], i), 1e-300);
        loss -= std::log(q);
        grad(y[static_cast<size_t>(i)], i) -= 1.0;
    }
    return {loss / n, grad / static_cast<double>(n)};
}

// KL(teacher || student) over temperature-softened outputs, scaled by T^2;
// the teacher is treated as a constant.
inline std::pair<double, Eigen::MatrixXd> distillation(const Eigen::MatrixXd& student_logits,
                                                       const Eigen::MatrixXd& teacher_logits,
                                                       double temperature) {
    if (!(temperature > 0.0)) throw TrainerError("temperature must be positive");
    Eigen::MatrixXd pt = softmax_cols(teacher_logits / temperature);
    Eigen::MatrixXd ps = softmax_cols(student_logits / temperature);
    const auto n = student_logits.cols();
    double loss = 0.0;
    for (int i = 0; i < n; ++i)
        for (int r = 0; r < pt.rows(); ++r) {
            double t = pt(r, i);
            if (t > 0.0) loss += t * (std::log(t) - std::log(std::max(ps(r, i), 1e-300)));
        }
    double t2 = temperature * temperature;
    Eigen::MatrixXd grad = (ps - pt) * (t2 / temperature) / static_cast<double>(n);
    return {loss * t2 / n, grad};
}

// One width draw per node; important nodes get the boosted fraction. The rng
// consumption is independent of the boost so policies with equal grids stay
// stream-compatible.
inline std::vector<int> sample_node_widths(const SupernetGraph& g, const TrainSamplingPolicy& policy,
                                           std::mt19937_64& rng) {
    std::vector<int> widths(static_cast<size_t>(g.node_count()));
    for (int v = 0; v < g.node_count(); ++v) {
        int c = g.node_channels(v);
        if (v == g.input_index() || v == g.output_index()) {
            widths[static_cast<size_t>(v)] = c;
            continue;
        }
        double f = policy.fraction_grid[uniform_index(rng, policy.fraction_grid.size())];
        double eff = tips_sampling_prob(f, policy.important_nodes[static_cast<size_t>(v)] != 0, policy.boost);
        widths[static_cast<size_t>(v)] = sample_channel_mask(c, eff);
    }
    return widths;
}

// One optimization step: full-supernet cross-entropy plus per-subnetwork
// cross-entropy and distillation from the supernet, then a plain SGD update
// on the shared weights.
inline double train_step(GraphNet& net, const Eigen::MatrixXd& xb, const std::vector<int>& yb,
                         const TrainSamplingPolicy& policy, const LossSpec& loss_spec, double lr,
                         std::mt19937_64& rng) {
    if (xb.cols() == 0) throw TrainerError("empty batch");
    auto grad = net.zero_gradients();
    auto full = net.forward(xb);
    auto [ce_full, g_full] = cross_entropy(full.logits, yb);
    net.backward(full, g_full, grad);
    double total = ce_full;
    for (int k = 0; k < loss_spec.subnets_per_step; ++k) {
        auto widths = sample_node_widths(net.graph(), policy, rng);
        auto sub = net.forward(xb, &widths);
        auto [ce_sub, g_ce] = cross_entropy(sub.logits, yb);
        auto [kd_sub, g_kd] = distillation(sub.logits, full.logits, loss_spec.kd_temperature);
        Eigen::MatrixXd g_sum = g_ce + g_kd;
        net.backward(sub, g_sum, grad);
        total += ce_sub + kd_sub;
    }
    if (!std::isfinite(total)) throw TrainerError("non-finite training loss");
    net.apply_gradients(grad, lr);
    return total;
}

// ---------------------------------------------------------------------------
// Experiment drivers.

struct ToyTrainConfig {
    int width = 16;
    int classes = 8;
    int train_size = 512;
    int test_size = 2048;
    std::uint64_t task_seed = 77;
    int epochs = 100;
    int batches_per_epoch = 8;
    double lr = 0.08;
    double boost = 1.5;
    std::vector<double> fraction_grid = {0.5, 0.75};
    LossSpec loss;
    int label_path_len = 9;  // node count for the importance-path search
    AnalysisParams analysis;
};

struct TrainRunResult {
    std::vector<double> epoch_loss;
    std::optional<int> epochs_to_threshold;  // empty = censored
    double test_accuracy = 0.0;
};

inline ImportanceLabels toy_importance_labels(const SupernetGraph& g, const ToyTrainConfig& cfg,
                                              std::uint64_t seed, PathRecord* path_out = nullptr) {
    auto rng = substream(seed, "toy.labels");
    AnalysisResult ana = analyze(g, cfg.analysis, rng);
    PathRecord path = max_tps_path(g, ana.scores, cfg.label_path_len);
    if (path_out) *path_out = path;
    return label_important(g, path);
}

inline TrainRunResult train_toy_run(const SupernetGraph& g, const ToyTrainConfig& cfg,
                                    const TrainSamplingPolicy& policy, std::uint64_t seed,
                                    double loss_threshold) {
    ToyDatasetSpec dspec{cfg.train_size, cfg.width, cfg.classes, cfg.task_seed};
    ToyDataset train = make_toy_dataset(dspec, seed * 2654435761u + 1);
    dspec.n = cfg.test_size;
    ToyDataset test = make_toy_dataset(dspec, seed * 2654435761u + 2);

    auto init_rng = substream(seed, "toy.init");
    GraphNet net(g, cfg.width, cfg.classes, init_rng);
    auto sample_rng = substream(seed, "toy.sample");

    TrainRunResult res;
    int batch = cfg.train_size / cfg.batches_per_epoch;
    for (int ep = 0; ep < cfg.epochs; ++ep) {
        double total = 0.0;
        for (int b = 0; b < cfg.batches_per_epoch; ++b) {
            Eigen::MatrixXd xb = train.x.middleCols(b * batch, batch);
            std::vector<int> yb(train.y.begin() + b * batch, train.y.begin() + (b + 1) * batch);
            total += train_step(net, xb, yb, policy, cfg.loss, cfg.lr, sample_rng);
        }
        res.epoch_loss.push_back(total / cfg.batches_per_epoch);
        if (!res.epochs_to_threshold && res.epoch_loss.back() <= loss_threshold)
            res.epochs_to_threshold = ep;
    }
    res.test_accuracy = net.accuracy(test);
    return res;
}

struct ConvergenceConfig {
    ToyTrainConfig train;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    double loss_threshold = 4.0;
};

struct ConvergenceRow {
    std::string policy;
    std::uint64_t seed = 0;
    TrainRunResult run;
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    double median_epochs_tips = 0.0;     // censored runs count as epochs+1
    double median_epochs_uniform = 0.0;
    PathRecord important_path;
};

// Matched TIPS vs uniform training: identical data, initialization and
// sampling stream; only the boost differs.
inline ConvergenceReport run_convergence_experiment(const SupernetGraph& g, const ConvergenceConfig& cfg) {
    ConvergenceReport rep;
    ImportanceLabels labels = toy_importance_labels(g, cfg.train, cfg.seeds.front(), &rep.important_path);
    std::vector<double> tips_epochs, uniform_epochs;
    for (auto seed : cfg.seeds) {
        for (bool tips : {true, false}) {
            auto policy = make_train_policy(g, labels, tips ? cfg.train.boost : 1.0, cfg.train.fraction_grid);
            auto run = train_toy_run(g, cfg.train, policy, seed, cfg.loss_threshold);
            double e = run.epochs_to_threshold ? static_cast<double>(*run.epochs_to_threshold)
                                               : static_cast<double>(cfg.train.epochs + 1);
            (tips ? tips_epochs : uniform_epochs).push_back(e);
            rep.rows.push_back({tips ? "tips" : "uniform", seed, std::move(run)});
        }
    }
    rep.median_epochs_tips = median(tips_epochs);
    rep.median_epochs_uniform = median(uniform_epochs);
    return rep;
}

struct ProbeConfig {
    ToyTrainConfig train;                      // probe training runs at full width
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::vector<double> ratios = {0.25, 0.5, 0.75};
};

struct ProbeCell {
    double median_drop_important = 0.0;
    double median_drop_unimportant = 0.0;
};

struct ProbeReport {
    std::vector<double> ratios;
    std::vector<ProbeCell> per_ratio;  // medians across seeds
    std::vector<std::tuple<std::uint64_t, double, std::string, bool, double>> rows;  // seed, ratio, op, important, drop
};

// Prunes each parameterized operation individually on a conventionally
// trained net (channel sampling disabled) and compares the accuracy drop of
// important vs unimportant operations.
inline ProbeReport run_importance_probe(const SupernetGraph& g, const ProbeConfig& cfg) {
    ProbeReport rep;
    rep.ratios = cfg.ratios;
    ImportanceLabels labels = toy_importance_labels(g, cfg.train, cfg.seeds.front());

    ToyTrainConfig conventional = cfg.train;
    conventional.fraction_grid = {1.0};

    std::vector<std::vector<double>> imp(cfg.ratios.size()), unimp(cfg.ratios.size());
    for (auto seed : cfg.seeds) {
        auto policy = make_train_policy(g, labels, 1.0, conventional.fraction_grid);
        ToyDatasetSpec dspec{conventional.train_size, conventional.width, conventional.classes,
                             conventional.task_seed};
        ToyDataset train = make_toy_dataset(dspec, seed * 2654435761u + 1);
        dspec.n = conventional.test_size;
        ToyDataset test = make_toy_dataset(dspec, seed * 2654435761u + 2);
        auto init_rng = substream(seed, "toy.init");
        GraphNet net(g, conventional.width, conventional.classes, init_rng);
        auto sample_rng = substream(seed, "toy.sample");
        int batch = conventional.train_size / conventional.batches_per_epoch;
        for (int ep = 0; ep < conventional.epochs; ++ep)
            for (int b = 0; b < conventional.batches_per_epoch; ++b) {
                Eigen::MatrixXd xb = train.x.middleCols(b * batch, batch);
                std::vector<int> yb(train.y.begin() + b * batch, train.y.begin() + (b + 1) * batch);
                train_step(net, xb, yb, policy, conventional.loss, conventional.lr, sample_rng);
            }
        double base_acc = net.accuracy(test);

        for (size_t ri = 0; ri < cfg.ratios.size(); ++ri) {
            std::vector<double> di, du;
            for (int e = 0; e < g.edge_count(); ++e) {
                if (g.edge(e).kind == EdgeKind::residual_add) continue;  // no parameters to prune
                GraphNet pruned = net.prune_channels(g.edge(e).id, cfg.ratios[ri]);
                double drop = base_acc - pruned.accuracy(test);
                (labels.is_important(e) ? di : du).push_back(drop);
                rep.rows.emplace_back(seed, cfg.ratios[ri], g.edge(e).id, labels.is_important(e), drop);
            }
            imp[ri].push_back(median(di));
            unimp[ri].push_back(median(du));
        }
    }
    for (size_t ri = 0; ri < cfg.ratios.size(); ++ri)
        rep.per_ratio.push_back({median(imp[ri]), median(unimp[ri])});
    return rep;
}

}  // namespace anynet
