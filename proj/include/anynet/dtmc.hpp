#pragma once

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "anynet/graph.hpp"
#include "anynet/rng.hpp"

namespace anynet {

struct DtmcError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Symmetric block matrix over T subnetwork copies of an N-node supernet:
// diagonal blocks are the subnetwork adjacency matrices, off-diagonal blocks
// couple same nodes across subnetworks with weight lambda. Stored in CSR;
// state (k, v) maps to index k*N + v.
class HyperAdjacency {
public:
    static HyperAdjacency build(const std::vector<SubnetworkMask>& masks, const SupernetGraph& g,
                                double lambda) {
        if (masks.empty()) throw DtmcError("empty mask list");
        std::vector<Eigen::MatrixXd> blocks;
        blocks.reserve(masks.size());
        for (const auto& m : masks) blocks.push_back(adjacency_matrix(g, m));
        return from_blocks(blocks, lambda);
    }

    static HyperAdjacency from_blocks(const std::vector<Eigen::MatrixXd>& blocks, double lambda) {
        if (blocks.empty()) throw DtmcError("empty block list");
        if (!(lambda > 0.0 && lambda <= 1.0)) throw DtmcError("lambda outside (0,1]");
        HyperAdjacency h;
        h.T_ = static_cast<int>(blocks.size());
        h.N_ = static_cast<int>(blocks.front().rows());
        h.lambda_ = lambda;
        for (const auto& b : blocks) {
            if (b.rows() != h.N_ || b.cols() != h.N_) throw DtmcError("block size mismatch");
            if (!b.isApprox(b.transpose())) throw DtmcError("block not symmetric");
        }
        const int nt = h.T_ * h.N_;
        h.row_ptr_.assign(static_cast<size_t>(nt) + 1, 0);
        // Two passes: count then fill, columns ascending within each row.
        for (int k = 0; k < h.T_; ++k)
            for (int v = 0; v < h.N_; ++v) {
                int row = k * h.N_ + v;
                int cnt = h.T_ - 1;  // couplings
                for (int w = 0; w < h.N_; ++w)
                    if (blocks[static_cast<size_t>(k)](v, w) != 0.0) ++cnt;
                h.row_ptr_[static_cast<size_t>(row) + 1] = cnt;
            }
        for (size_t i = 1; i < h.row_ptr_.size(); ++i) h.row_ptr_[i] += h.row_ptr_[i - 1];
        h.col_.resize(static_cast<size_t>(h.row_ptr_.back()));
        h.val_.resize(static_cast<size_t>(h.row_ptr_.back()));
        for (int k = 0; k < h.T_; ++k)
            for (int v = 0; v < h.N_; ++v) {
                int row = k * h.N_ + v;
                size_t at = static_cast<size_t>(h.row_ptr_[static_cast<size_t>(row)]);
                for (int j = 0; j < h.T_; ++j) {
                    if (j == k) {
                        for (int w = 0; w < h.N_; ++w) {
                            double a = blocks[static_cast<size_t>(k)](v, w);
                            if (a != 0.0) {
                                h.col_[at] = k * h.N_ + w;
                                h.val_[at] = a;
                                ++at;
                            }
                        }
                    } else {
                        h.col_[at] = j * h.N_ + v;
                        h.val_[at] = lambda;
                        ++at;
                    }
                }
            }
        // Columns within a row must be sorted for the walk sampler's prefix sums.
        for (int row = 0; row < nt; ++row) {
            size_t b = static_cast<size_t>(h.row_ptr_[static_cast<size_t>(row)]);
            size_t e = static_cast<size_t>(h.row_ptr_[static_cast<size_t>(row) + 1]);
            std::vector<std::pair<int, double>> tmp;
            tmp.reserve(e - b);
            for (size_t i = b; i < e; ++i) tmp.emplace_back(h.col_[i], h.val_[i]);
            std::sort(tmp.begin(), tmp.end());
            for (size_t i = b; i < e; ++i) {
                h.col_[i] = tmp[i - b].first;
                h.val_[i] = tmp[i - b].second;
            }
        }
        h.row_sum_.assign(static_cast<size_t>(nt), 0.0);
        for (int row = 0; row < nt; ++row)
            for (int i = h.row_ptr_[static_cast<size_t>(row)]; i < h.row_ptr_[static_cast<size_t>(row) + 1]; ++i)
                h.row_sum_[static_cast<size_t>(row)] += h.val_[static_cast<size_t>(i)];
        return h;
    }

    int subnet_count() const { return T_; }
    int nodes_per_subnet() const { return N_; }
    int size() const { return T_ * N_; }
    double lambda() const { return lambda_; }
    const std::vector<double>& row_sums() const { return row_sum_; }

    double entry(int r, int c) const {
        for (int i = row_ptr_[static_cast<size_t>(r)]; i < row_ptr_[static_cast<size_t>(r) + 1]; ++i)
            if (col_[static_cast<size_t>(i)] == c) return val_[static_cast<size_t>(i)];
        return 0.0;
    }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size(), size());
        for (int r = 0; r < size(); ++r)
            for (int i = row_ptr_[static_cast<size_t>(r)]; i < row_ptr_[static_cast<size_t>(r) + 1]; ++i)
                m(r, col_[static_cast<size_t>(i)]) = val_[static_cast<size_t>(i)];
        return m;
    }

    const std::vector<int>& row_ptr() const { return row_ptr_; }
    const std::vector<int>& cols() const { return col_; }
    const std::vector<double>& vals() const { return val_; }

private:
    int T_ = 0, N_ = 0;
    double lambda_ = 1.0;
    std::vector<int> row_ptr_, col_;
    std::vector<double> val_, row_sum_;
};

// Row-stochastic transition matrix P = rownorm[(1-kappa) H + kappa U] with U
// the all-ones matrix. The teleport term is kept implicit as a rank-one
// correction, so products stay O(nnz).
class TransitionMatrix {
public:
    static TransitionMatrix build(HyperAdjacency h, double kappa) {
        if (!(kappa >= 0.0 && kappa < 1.0)) throw DtmcError("kappa outside [0,1)");
        TransitionMatrix p;
        const int nt = h.size();
        p.denom_.resize(static_cast<size_t>(nt));
        for (int r = 0; r < nt; ++r) {
            double d = (1.0 - kappa) * h.row_sums()[static_cast<size_t>(r)] + kappa * nt;
            if (d <= 0.0)
                throw DtmcError("row " + std::to_string(r) + " has zero mass and kappa = 0: normalization undefined");
            p.denom_[static_cast<size_t>(r)] = d;
        }
        p.h_ = std::move(h);
        p.kappa_ = kappa;
        return p;
    }

    int size() const { return h_.size(); }
    double kappa() const { return kappa_; }
    const HyperAdjacency& hyper() const { return h_; }

    double entry(int r, int c) const {
        return ((1.0 - kappa_) * h_.entry(r, c) + kappa_) / denom_[static_cast<size_t>(r)];
    }

    double row_sum(int r) const {
        double s = 0.0;
        for (int c = 0; c < size(); ++c) s += entry(r, c);
        return s;
    }

    // out = x P  (left multiplication by a row vector).
    void multiply_left(const std::vector<double>& x, std::vector<double>& out) const {
        const int nt = size();
        scratch_.resize(static_cast<size_t>(nt));
        double tele = 0.0;
        for (int r = 0; r < nt; ++r) {
            scratch_[static_cast<size_t>(r)] = x[static_cast<size_t>(r)] / denom_[static_cast<size_t>(r)];
            tele += scratch_[static_cast<size_t>(r)];
        }
        tele *= kappa_;
        out.assign(static_cast<size_t>(nt), tele);
        const auto& rp = h_.row_ptr();
        const auto& cols = h_.cols();
        const auto& vals = h_.vals();
        // H is symmetric, so x P's sparse part gathers along rows.
        for (int r = 0; r < nt; ++r) {
            double acc = 0.0;
            for (int i = rp[static_cast<size_t>(r)]; i < rp[static_cast<size_t>(r) + 1]; ++i)
                acc += vals[static_cast<size_t>(i)] * scratch_[static_cast<size_t>(cols[static_cast<size_t>(i)])];
            out[static_cast<size_t>(r)] += (1.0 - kappa_) * acc;
        }
    }

private:
    HyperAdjacency h_;
    double kappa_ = 0.0;
    std::vector<double> denom_;
    mutable std::vector<double> scratch_;
};

struct StationaryDistribution {
    std::vector<double> pi;
    double residual = 0.0;  // final ||pi P - pi||_1
    int iterations = 0;
    bool converged = false;
};

// Damped power iteration from the uniform vector: x <- (x + xP)/2. The
// damping leaves the fixed point unchanged and also converges on periodic
// chains; the residual is always measured against P itself.
inline StationaryDistribution stationary(const TransitionMatrix& p, double tol = 1e-10,
                                         int max_iter = 100000) {
    const int nt = p.size();
    StationaryDistribution r;
    r.pi.assign(static_cast<size_t>(nt), 1.0 / nt);
    std::vector<double> next(static_cast<size_t>(nt));
    for (int it = 1; it <= max_iter; ++it) {
        p.multiply_left(r.pi, next);
        double res = 0.0;
        for (int i = 0; i < nt; ++i) res += std::abs(next[static_cast<size_t>(i)] - r.pi[static_cast<size_t>(i)]);
        double sum = 0.0;
        for (int i = 0; i < nt; ++i) {
            double v = 0.5 * (next[static_cast<size_t>(i)] + r.pi[static_cast<size_t>(i)]);
            r.pi[static_cast<size_t>(i)] = v;
            sum += v;
        }
        for (auto& v : r.pi) v /= sum;
        r.iterations = it;
        r.residual = res;
        if (res <= tol) {
            r.converged = true;
            break;
        }
    }
    return r;
}

// Monte Carlo check of the stationary distribution: frequency of state visits
// at times burn_in..steps, starting from `start`.
inline std::vector<double> simulate_walk(const TransitionMatrix& p, long steps, long burn_in,
                                         std::mt19937_64& rng, int start = 0) {
    if (steps < 0 || burn_in < 0 || burn_in > steps) throw DtmcError("bad walk step counts");
    const int nt = p.size();
    const auto& h = p.hyper();
    const auto& rp = h.row_ptr();
    const auto& vals = h.vals();
    const auto& cols = h.cols();
    // Per-row prefix sums over H values for neighbor sampling.
    std::vector<double> prefix(vals.size());
    for (int r = 0; r < nt; ++r) {
        double acc = 0.0;
        for (int i = rp[static_cast<size_t>(r)]; i < rp[static_cast<size_t>(r) + 1]; ++i) {
            acc += vals[static_cast<size_t>(i)];
            prefix[static_cast<size_t>(i)] = acc;
        }
    }
    std::vector<long> counts(static_cast<size_t>(nt), 0);
    int state = start;
    for (long t = 0; t <= steps; ++t) {
        if (t >= burn_in) ++counts[static_cast<size_t>(state)];
        if (t == steps) break;
        double rowmass = h.row_sums()[static_cast<size_t>(state)];
        double denom = (1.0 - p.kappa()) * rowmass + p.kappa() * nt;
        double teleport_p = p.kappa() * nt / denom;
        if (uniform01(rng) < teleport_p) {
            state = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(nt)));
        } else {
            double u = uniform01(rng) * rowmass;
            int b = rp[static_cast<size_t>(state)], e = rp[static_cast<size_t>(state) + 1];
            auto it = std::upper_bound(prefix.begin() + b, prefix.begin() + e, u);
            int idx = static_cast<int>(it - prefix.begin());
            if (idx >= e) idx = e - 1;
            state = cols[static_cast<size_t>(idx)];
        }
    }
    long total = steps - burn_in + 1;
    std::vector<double> freq(static_cast<size_t>(nt));
    for (int i = 0; i < nt; ++i) freq[static_cast<size_t>(i)] = static_cast<double>(counts[static_cast<size_t>(i)]) / total;
    return freq;
}

}  // namespace anynet
