#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "scenedbm/linalg.hpp"

namespace scenedbm {

// theta is k x (d+1); the last column is the intercept and is excluded
// from weight decay.
struct SoftmaxParams {
    Matrix theta;
    double lambda = 0.0;

    std::size_t classes() const { return theta.rows(); }
    std::size_t features() const { return theta.cols() - 1; }

    static SoftmaxParams zeros(std::size_t k, std::size_t d, double lambda) {
        require(k >= 2, "softmax: need k >= 2 classes");
        return {Matrix(k, d + 1), lambda};
    }
};

struct LabeledSet {
    std::vector<Vec> features;
    std::vector<int> labels;  // 1-based, in [1, k]

    void validate(std::size_t k, std::size_t d) const {
        require(features.size() == labels.size(), "labeled set: features/labels misaligned");
        require(!features.empty(), "labeled set: empty");
        for (const Vec& x : features)
            require(x.size() == d, "labeled set: feature length mismatch");
        for (int y : labels)
            require(y >= 1 && y <= static_cast<int>(k), "labeled set: label out of range");
    }
};

namespace detail {

inline Vec logits(const Vec& x, const SoftmaxParams& p) {
    const std::size_t k = p.classes(), d = p.features();
    require(x.size() == d, "softmax: feature length mismatch");
    for (double xi : x)
        require(std::isfinite(xi), "softmax: non-finite input");
    Vec z(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        double acc = p.theta(j, d);  // intercept
        for (std::size_t l = 0; l < d; ++l) acc += p.theta(j, l) * x[l];
        z[j] = acc;
    }
    return z;
}

inline void softmax_inplace(Vec& z) {
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& zi : z) {
        zi = std::exp(zi - zmax);
        sum += zi;
    }
    for (double& zi : z) zi /= sum;
}

}  // namespace detail

inline Vec hypothesis(const Vec& x, const SoftmaxParams& p) {
    Vec z = detail::logits(x, p);
    detail::softmax_inplace(z);
    return z;
}

inline double cost(const LabeledSet& data, const SoftmaxParams& p) {
    const std::size_t k = p.classes(), d = p.features();
    data.validate(k, d);
    double nll = 0.0;
    for (std::size_t i = 0; i < data.features.size(); ++i) {
        Vec z = detail::logits(data.features[i], p);
        const double zmax = *std::max_element(z.begin(), z.end());
        double lse = 0.0;
        for (double zi : z) lse += std::exp(zi - zmax);
        lse = zmax + std::log(lse);
        nll -= z[static_cast<std::size_t>(data.labels[i] - 1)] - lse;
    }
    double decay = 0.0;
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t l = 0; l < d; ++l) decay += p.theta(j, l) * p.theta(j, l);
    return nll / static_cast<double>(data.features.size()) + 0.5 * p.lambda * decay;
}

inline Matrix gradient(const LabeledSet& data, const SoftmaxParams& p) {
    const std::size_t k = p.classes(), d = p.features();
    data.validate(k, d);
    Matrix g(k, d + 1);
    for (std::size_t i = 0; i < data.features.size(); ++i) {
        const Vec& x = data.features[i];
        const Vec h = hypothesis(x, p);
        for (std::size_t j = 0; j < k; ++j) {
            const double coeff = (static_cast<int>(j) + 1 == data.labels[i] ? 1.0 : 0.0) - h[j];
            for (std::size_t l = 0; l < d; ++l) g(j, l) -= coeff * x[l];
            g(j, d) -= coeff;
        }
    }
    const double inv = 1.0 / static_cast<double>(data.features.size());
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t l = 0; l < d; ++l) g(j, l) = g(j, l) * inv + p.lambda * p.theta(j, l);
        g(j, d) *= inv;
    }
    return g;
}

struct SoftmaxTrainResult {
    SoftmaxParams params;
    Vec cost_trace;  // one entry per accepted iteration
};

// Gradient descent from theta = 0 with backtracking: a step that raises
// the cost is retried at half the rate.
inline SoftmaxTrainResult train_softmax(const LabeledSet& data, std::size_t k, double lambda,
                                        double step, int iters) {
    require(step > 0.0, "train_softmax: step must be > 0");
    require(iters >= 1, "train_softmax: iters must be >= 1");
    require(!data.features.empty(), "train_softmax: empty data");
    const std::size_t d = data.features.front().size();
    SoftmaxTrainResult result{SoftmaxParams::zeros(k, d, lambda), {}};
    SoftmaxParams& p = result.params;
    data.validate(k, d);

    double alpha = step;
    double current = cost(data, p);
    result.cost_trace.push_back(current);
    for (int it = 0; it < iters; ++it) {
        const Matrix g = gradient(data, p);
        while (true) {
            SoftmaxParams trial = p;
            for (std::size_t j = 0; j < k; ++j)
                for (std::size_t l = 0; l <= d; ++l) trial.theta(j, l) -= alpha * g(j, l);
            const double trial_cost = cost(data, trial);
            if (trial_cost <= current || alpha < 1e-12) {
                p = std::move(trial);
                current = trial_cost;
                break;
            }
            alpha *= 0.5;
        }
        result.cost_trace.push_back(current);
    }
    return result;
}

// Argmax class, 1-based; ties go to the lowest class index.
inline int predict(const Vec& x, const SoftmaxParams& p) {
    const Vec h = hypothesis(x, p);
    std::size_t best = 0;
    for (std::size_t j = 1; j < h.size(); ++j)
        if (h[j] > h[best]) best = j;
    return static_cast<int>(best) + 1;
}

}  // namespace scenedbm
