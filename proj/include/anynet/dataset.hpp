#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "anynet/rng.hpp"

namespace anynet {

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Synthetic classification task: Gaussian inputs labeled by a fixed random
// two-layer ReLU teacher. Classes are balanced within one sample by
// rejection-filling per-class quotas.
struct ToyDataset {
    Eigen::MatrixXd x;  // dim x n, one column per sample
    std::vector<int> y;
    int classes = 0;

    int size() const { return static_cast<int>(y.size()); }
};

struct ToyDatasetSpec {
    int n = 512;
    int dim = 16;
    int classes = 8;
    std::uint64_t task_seed = 77;  // teacher weights; shared by train and test
};

inline ToyDataset make_toy_dataset(const ToyDatasetSpec& spec, std::uint64_t sample_seed) {
    if (spec.n < spec.classes) throw DatasetError("dataset smaller than class count");
    if (spec.dim < 1 || spec.classes < 2) throw DatasetError("bad dataset shape");
    auto trng = substream(spec.task_seed, "dataset.teacher");
    double s1 = std::sqrt(2.0 / spec.dim);
    Eigen::MatrixXd t1(spec.dim, spec.dim), t2(spec.classes, spec.dim);
    for (int i = 0; i < spec.dim; ++i)
        for (int j = 0; j < spec.dim; ++j) t1(i, j) = normal(trng, 0.0, s1);
    for (int i = 0; i < spec.classes; ++i)
        for (int j = 0; j < spec.dim; ++j) t2(i, j) = normal(trng, 0.0, s1);

    int base = spec.n / spec.classes, extra = spec.n % spec.classes;
    std::vector<int> quota(static_cast<size_t>(spec.classes), base);
    for (int c = 0; c < extra; ++c) ++quota[static_cast<size_t>(c)];

    ToyDataset d;
    d.classes = spec.classes;
    d.x.resize(spec.dim, spec.n);
    d.y.resize(static_cast<size_t>(spec.n));
    auto srng = substream(sample_seed, "dataset.samples");
    Eigen::VectorXd v(spec.dim);
    int placed = 0;
    long draws = 0;
    const long max_draws = 2000L * spec.n;
    while (placed < spec.n) {
        if (++draws > max_draws) throw DatasetError("teacher labels too imbalanced to fill class quotas");
        for (int i = 0; i < spec.dim; ++i) v(i) = normal(srng, 0.0, 1.0);
        Eigen::VectorXd logits = t2 * (t1 * v).cwiseMax(0.0);
        int label = 0;
        logits.maxCoeff(&label);
        if (quota[static_cast<size_t>(label)] == 0) continue;
        --quota[static_cast<size_t>(label)];
        d.x.col(placed) = v;
        d.y[static_cast<size_t>(placed)] = label;
        ++placed;
    }
    return d;
}

}  // namespace anynet
