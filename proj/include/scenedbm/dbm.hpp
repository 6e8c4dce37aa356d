#pragma once

#include <cstddef>
#include <vector>

#include "scenedbm/rbm.hpp"

namespace scenedbm {

struct DbmParams {
    Matrix w1;  // visible x h1
    Matrix w2;  // h1 x h2
    Vec b;      // visible bias
    Vec c1;     // h1 bias
    Vec c2;     // h2 bias

    std::size_t visible() const { return w1.rows(); }
    std::size_t hidden1() const { return w1.cols(); }
    std::size_t hidden2() const { return w2.cols(); }

    static DbmParams zeros(std::size_t pv, std::size_t h1, std::size_t h2) {
        return {Matrix(pv, h1), Matrix(h1, h2), Vec(pv, 0.0), Vec(h1, 0.0), Vec(h2, 0.0)};
    }
};

struct DbmConfig {
    std::size_t p_v = 64, p_h1 = 32, p_h2 = 16;
    CdConfig layer1;
    CdConfig layer2;

    void validate() const {
        require(p_v >= 1 && p_h1 >= 1 && p_h2 >= 1, "dbm: layer sizes must be >= 1");
        layer1.validate();
        layer2.validate();
    }
};

// E(v,h1,h2) = -v'W1h1 - h1'W2h2 - b'v - c1'h1 - c2'h2
inline double dbm_energy(const Vec& v, const Vec& h1, const Vec& h2, const DbmParams& p) {
    require(v.size() == p.visible() && h1.size() == p.hidden1() && h2.size() == p.hidden2(),
            "dbm_energy: dimension mismatch");
    double e = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        e -= p.b[i] * v[i];
        if (v[i] == 0.0) continue;
        double row = 0.0;
        for (std::size_t j = 0; j < h1.size(); ++j) row += p.w1(i, j) * h1[j];
        e -= v[i] * row;
    }
    for (std::size_t j = 0; j < h1.size(); ++j) {
        e -= p.c1[j] * h1[j];
        if (h1[j] == 0.0) continue;
        double row = 0.0;
        for (std::size_t m = 0; m < h2.size(); ++m) row += p.w2(j, m) * h2[m];
        e -= h1[j] * row;
    }
    for (std::size_t m = 0; m < h2.size(); ++m) e -= p.c2[m] * h2[m];
    return e;
}

inline double dbm_partition(const DbmParams& p) {
    const std::size_t pv = p.visible(), ph1 = p.hidden1(), ph2 = p.hidden2();
    require(pv + ph1 + ph2 <= 20, "enumeration limit");
    double z = 0.0;
    for (std::size_t vc = 0; vc < (1u << pv); ++vc) {
        const Vec v = detail::bits(vc, pv);
        for (std::size_t h1c = 0; h1c < (1u << ph1); ++h1c) {
            const Vec h1 = detail::bits(h1c, ph1);
            for (std::size_t h2c = 0; h2c < (1u << ph2); ++h2c)
                z += std::exp(-dbm_energy(v, h1, detail::bits(h2c, ph2), p));
        }
    }
    return z;
}

// Layer-1 pretraining conditionals: doubled bottom-up, single top-down.
inline Vec doubled_prop_up_first(const Vec& v, const DbmParams& p) {
    require(v.size() == p.visible(), "doubled_prop_up_first: dimension mismatch");
    Vec act = p.w1.transpose_times(v);
    for (std::size_t j = 0; j < act.size(); ++j) act[j] = sigmoid(2.0 * act[j] + p.c1[j]);
    return act;
}

inline Vec prop_down_first(const Vec& h1, const DbmParams& p) {
    require(h1.size() == p.hidden1(), "prop_down_first: dimension mismatch");
    Vec act = p.w1.times(h1);
    for (std::size_t i = 0; i < act.size(); ++i) act[i] = sigmoid(act[i] + p.b[i]);
    return act;
}

// Layer-2 pretraining conditionals: single bottom-up, doubled top-down.
inline Vec doubled_prop_down_second(const Vec& h2, const DbmParams& p) {
    require(h2.size() == p.hidden2(), "doubled_prop_down_second: dimension mismatch");
    Vec act = p.w2.times(h2);
    for (std::size_t j = 0; j < act.size(); ++j) act[j] = sigmoid(2.0 * act[j] + p.c1[j]);
    return act;
}

inline Vec prop_up_second(const Vec& h1, const DbmParams& p) {
    require(h1.size() == p.hidden1(), "prop_up_second: dimension mismatch");
    Vec act = p.w2.transpose_times(h1);
    for (std::size_t m = 0; m < act.size(); ++m) act[m] = sigmoid(act[m] + p.c2[m]);
    return act;
}

// p(h1 | v, h2) with single weights: combined bottom-up and top-down input.
inline Vec mean_field_h1(const Vec& v, const Vec& h2, const DbmParams& p) {
    require(v.size() == p.visible() && h2.size() == p.hidden2(),
            "mean_field_h1: dimension mismatch");
    Vec up = p.w1.transpose_times(v);
    const Vec down = p.w2.times(h2);
    for (std::size_t j = 0; j < up.size(); ++j) up[j] = sigmoid(up[j] + down[j] + p.c1[j]);
    return up;
}

// Greedy layer-wise pretraining. Stage 1 trains (v, h1) with doubled
// bottom-up input, stage 2 trains (h1, h2) on h1 probabilities with
// doubled top-down input. Stage-1 weights are frozen during stage 2.
inline DbmParams pretrain_dbm(const std::vector<Vec>& data, const DbmConfig& cfg) {
    require(!data.empty(), "pretrain_dbm: empty data");
    cfg.validate();
    for (const Vec& v : data)
        require(v.size() == cfg.p_v, "pretrain_dbm: data length != p_v");

    const TrainResult stage1 = train_rbm(data, cfg.p_h1, cfg.layer1, {2.0, 1.0});

    DbmParams p = DbmParams::zeros(cfg.p_v, cfg.p_h1, cfg.p_h2);
    p.w1 = stage1.params.w;
    p.b = stage1.params.b;
    p.c1 = stage1.params.c;

    std::vector<Vec> h1_data;
    h1_data.reserve(data.size());
    for (const Vec& v : data) h1_data.push_back(doubled_prop_up_first(v, p));

    const TrainResult stage2 = train_rbm(h1_data, cfg.p_h2, cfg.layer2, {1.0, 2.0});
    p.w2 = stage2.params.w;
    p.c2 = stage2.params.c;
    // stage 2 also trains a bias for its visible layer (= h1); keep the
    // stage-1 value of c1 so layer-1 conditionals stay frozen
    return p;
}

constexpr int kMeanFieldIters = 5;

namespace detail {

// Doubled bottom-up init, then alternating mean-field h1 and h2 updates.
inline void settle_mean_field(const Vec& v, const DbmParams& p, Vec& h1, Vec& h2) {
    h1 = doubled_prop_up_first(v, p);
    h2 = prop_up_second(h1, p);
    for (int it = 0; it < kMeanFieldIters; ++it) {
        h1 = mean_field_h1(v, h2, p);
        h2 = prop_up_second(h1, p);
    }
}

}  // namespace detail

inline Vec extract_features(const Vec& v, const DbmParams& p) {
    Vec h1, h2;
    detail::settle_mean_field(v, p, h1, h2);
    return h2;
}

inline Vec reconstruct(const Vec& v, const DbmParams& p) {
    Vec h1, h2;
    detail::settle_mean_field(v, p, h1, h2);
    return prop_down_first(h1, p);
}

}  // namespace scenedbm
