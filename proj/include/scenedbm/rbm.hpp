#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "scenedbm/linalg.hpp"

namespace scenedbm {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct RbmParams {
    Matrix w;  // visible x hidden
    Vec b;     // visible bias
    Vec c;     // hidden bias

    std::size_t visible() const { return w.rows(); }
    std::size_t hidden() const { return w.cols(); }

    static RbmParams zeros(std::size_t p_v, std::size_t p_h) {
        return {Matrix(p_v, p_h), Vec(p_v, 0.0), Vec(p_h, 0.0)};
    }
};

struct CdConfig {
    int n = 1;  // Gibbs steps per update
    double eta_w = 0.1;
    double eta_b = 0.1;
    double eta_c = 0.1;
    double weight_decay = 0.0;  // optional L2 on W
    std::size_t batch_size = 10;
    int epochs = 100;
    std::uint64_t seed = 0;

    void validate() const {
        require(n >= 1, "cd: n must be >= 1");
        require(eta_w > 0 && eta_b > 0 && eta_c > 0, "cd: learning rates must be > 0");
        require(batch_size >= 1, "cd: batch_size must be >= 1");
        require(epochs >= 1, "cd: epochs must be >= 1");
    }
};

struct GibbsState {
    Vec v;  // probabilities at the chain end
    Vec h;
    int step = 0;
};

// E(v,h) = -v'Wh - b'v - c'h
inline double energy(const Vec& v, const Vec& h, const RbmParams& p) {
    require(v.size() == p.visible() && h.size() == p.hidden(), "energy: dimension mismatch");
    double e = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        e -= p.b[i] * v[i];
        if (v[i] == 0.0) continue;
        double row = 0.0;
        for (std::size_t j = 0; j < h.size(); ++j) row += p.w(i, j) * h[j];
        e -= v[i] * row;
    }
    for (std::size_t j = 0; j < h.size(); ++j) e -= p.c[j] * h[j];
    return e;
}

namespace detail {

inline Vec bits(std::size_t code, std::size_t len) {
    Vec v(len);
    for (std::size_t i = 0; i < len; ++i) v[i] = (code >> i) & 1u ? 1.0 : 0.0;
    return v;
}

}  // namespace detail

// Z by exhaustive state enumeration; guarded to p_v + p_h <= 20.
inline double brute_force_partition(const RbmParams& p) {
    const std::size_t pv = p.visible(), ph = p.hidden();
    require(pv + ph <= 20, "enumeration limit");
    double z = 0.0;
    for (std::size_t vc = 0; vc < (1u << pv); ++vc) {
        const Vec v = detail::bits(vc, pv);
        for (std::size_t hc = 0; hc < (1u << ph); ++hc) {
            z += std::exp(-energy(v, detail::bits(hc, ph), p));
        }
    }
    return z;
}

// p(h_j = 1 | v) = sigma(W'v + c)_j
inline Vec prop_up(const Vec& v, const RbmParams& p) {
    require(v.size() == p.visible(), "prop_up: dimension mismatch");
    Vec act = p.w.transpose_times(v);
    for (std::size_t j = 0; j < act.size(); ++j) act[j] = sigmoid(act[j] + p.c[j]);
    return act;
}

// p(v_i = 1 | h) = sigma(Wh + b)_i
inline Vec prop_down(const Vec& h, const RbmParams& p) {
    require(h.size() == p.hidden(), "prop_down: dimension mismatch");
    Vec act = p.w.times(h);
    for (std::size_t i = 0; i < act.size(); ++i) act[i] = sigmoid(act[i] + p.b[i]);
    return act;
}

inline Vec sample_bernoulli(const Vec& probs, Rng& rng) {
    Vec out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) out[i] = rng.uniform() < probs[i] ? 1.0 : 0.0;
    return out;
}

// Scale factors let the DBM pretraining stages reuse the same chain with
// doubled bottom-up or top-down weights.
struct ChainScales {
    double up = 1.0;
    double down = 1.0;
};

namespace detail {

inline Vec scaled_up(const Vec& v, const RbmParams& p, double scale) {
    Vec act = p.w.transpose_times(v);
    for (std::size_t j = 0; j < act.size(); ++j) act[j] = sigmoid(scale * act[j] + p.c[j]);
    return act;
}

inline Vec scaled_down(const Vec& h, const RbmParams& p, double scale) {
    Vec act = p.w.times(h);
    for (std::size_t i = 0; i < act.size(); ++i) act[i] = sigmoid(scale * act[i] + p.b[i]);
    return act;
}

}  // namespace detail

// n rounds of alternating sampling; the returned v^n and h^n are mean
// activations, intermediates are binary samples.
inline GibbsState gibbs_chain(const Vec& v0, const RbmParams& p, int n, Rng& rng,
                              ChainScales scales = {}) {
    require(n >= 1, "gibbs_chain: n must be >= 1");
    require(v0.size() == p.visible(), "gibbs_chain: dimension mismatch");
    Vec v = v0;
    Vec pv;
    for (int step = 0; step < n; ++step) {
        const Vec ph = detail::scaled_up(v, p, scales.up);
        const Vec h = sample_bernoulli(ph, rng);
        pv = detail::scaled_down(h, p, scales.down);
        v = (step + 1 < n) ? sample_bernoulli(pv, rng) : pv;
    }
    return {v, detail::scaled_up(v, p, scales.up), n};
}

// One CD-n step over a batch, correlation differences averaged over examples.
inline void cd_update(const std::vector<Vec>& batch, RbmParams& p, const CdConfig& cfg, Rng& rng,
                      ChainScales scales = {}) {
    require(!batch.empty(), "cd_update: empty batch");
    cfg.validate();
    const std::size_t pv = p.visible(), ph = p.hidden();
    Matrix dw(pv, ph);
    Vec db(pv, 0.0), dc(ph, 0.0);
    for (const Vec& v0 : batch) {
        require(v0.size() == pv, "cd_update: dimension mismatch");
        const Vec h0 = detail::scaled_up(v0, p, scales.up);
        const GibbsState end = gibbs_chain(v0, p, cfg.n, rng, scales);
        for (std::size_t i = 0; i < pv; ++i) {
            for (std::size_t j = 0; j < ph; ++j)
                dw(i, j) += v0[i] * h0[j] - end.v[i] * end.h[j];
            db[i] += v0[i] - end.v[i];
        }
        for (std::size_t j = 0; j < ph; ++j) dc[j] += h0[j] - end.h[j];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < pv; ++i) {
        for (std::size_t j = 0; j < ph; ++j)
            p.w(i, j) += cfg.eta_w * (dw(i, j) * inv - cfg.weight_decay * p.w(i, j));
        p.b[i] += cfg.eta_b * db[i] * inv;
    }
    for (std::size_t j = 0; j < ph; ++j) p.c[j] += cfg.eta_c * dc[j] * inv;
}

struct TrainResult {
    RbmParams params;
    Vec epoch_recon_error;  // per-unit mean squared reconstruction error
};

inline RbmParams init_rbm(std::size_t p_v, std::size_t p_h, Rng& rng) {
    RbmParams p = RbmParams::zeros(p_v, p_h);
    for (double& w : p.w.data()) w = rng.uniform(-0.01, 0.01);
    return p;
}

inline TrainResult train_rbm(const std::vector<Vec>& data, std::size_t p_h, const CdConfig& cfg,
                             ChainScales scales = {}) {
    require(!data.empty(), "train_rbm: empty data");
    cfg.validate();
    const std::size_t p_v = data.front().size();
    for (const Vec& v : data)
        require(v.size() == p_v, "train_rbm: inconsistent vector lengths");

    Rng rng(cfg.seed);
    TrainResult result{init_rbm(p_v, p_h, rng), {}};
    RbmParams& p = result.params;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t start = 0; start < data.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(data.size(), start + cfg.batch_size);
            const std::vector<Vec> batch(data.begin() + static_cast<std::ptrdiff_t>(start),
                                         data.begin() + static_cast<std::ptrdiff_t>(stop));
            cd_update(batch, p, cfg, rng, scales);
        }
        double err = 0.0;
        for (const Vec& v0 : data) {
            const Vec v1 = detail::scaled_down(detail::scaled_up(v0, p, scales.up), p, scales.down);
            for (std::size_t i = 0; i < p_v; ++i) err += (v0[i] - v1[i]) * (v0[i] - v1[i]);
        }
        result.epoch_recon_error.push_back(err / (static_cast<double>(data.size()) * p_v));
    }
    return result;
}

// Enumerated log p(v) for tiny models; the CD progress oracle.
inline double log_likelihood(const Vec& v, const RbmParams& p) {
    const double z = brute_force_partition(p);
    double s = 0.0;
    for (std::size_t hc = 0; hc < (1u << p.hidden()); ++hc)
        s += std::exp(-energy(v, detail::bits(hc, p.hidden()), p));
    return std::log(s) - std::log(z);
}

}  // namespace scenedbm
