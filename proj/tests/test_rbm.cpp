#include <cmath>

#include <doctest.h>

#include "scenedbm/rbm.hpp"

using namespace scenedbm;

namespace {

RbmParams random_rbm(std::size_t pv, std::size_t ph, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    RbmParams p = RbmParams::zeros(pv, ph);
    for (double& w : p.w.data()) w = rng.uniform(-scale, scale);
    for (double& b : p.b) b = rng.uniform(-scale, scale);
    for (double& c : p.c) c = rng.uniform(-scale, scale);
    return p;
}

Vec bits_of(std::size_t code, std::size_t len) {
    Vec v(len);
    for (std::size_t i = 0; i < len; ++i) v[i] = (code >> i) & 1u ? 1.0 : 0.0;
    return v;
}

// Exact conditional p(h_j = 1 | v) from the enumerated joint.
double enumerated_hidden_conditional(const Vec& v, std::size_t j, const RbmParams& p) {
    double num = 0.0, den = 0.0;
    for (std::size_t hc = 0; hc < (1u << p.hidden()); ++hc) {
        const Vec h = bits_of(hc, p.hidden());
        const double w = std::exp(-energy(v, h, p));
        den += w;
        if (h[j] == 1.0) num += w;
    }
    return num / den;
}

double enumerated_visible_conditional(const Vec& h, std::size_t i, const RbmParams& p) {
    double num = 0.0, den = 0.0;
    for (std::size_t vc = 0; vc < (1u << p.visible()); ++vc) {
        const Vec v = bits_of(vc, p.visible());
        const double w = std::exp(-energy(v, h, p));
        den += w;
        if (v[i] == 1.0) num += w;
    }
    return num / den;
}

const std::vector<Vec> kBars = {{1, 1, 0, 0}, {0, 0, 1, 1}};

}  // namespace

TEST_CASE("energy") {
    SUBCASE("all-zero state has zero energy") {
        const RbmParams p = random_rbm(3, 2, 1);
        CHECK(energy(Vec(3, 0.0), Vec(2, 0.0), p) == doctest::Approx(0.0));
    }
    SUBCASE("hand-computed value") {
        RbmParams p = RbmParams::zeros(2, 1);
        p.w(0, 0) = 1.0;
        p.w(1, 0) = 2.0;
        p.b = {0.5, -0.5};
        p.c = {0.25};
        CHECK(energy({1, 1}, {1}, p) == doctest::Approx(-3.25));
    }
    SUBCASE("doubling W doubles only the interaction term") {
        RbmParams p = random_rbm(3, 2, 2);
        RbmParams p2 = p;
        for (double& w : p2.w.data()) w *= 2.0;
        const Vec v = {1, 0, 1}, h = {1, 1};
        double interaction = 0.0;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 2; ++j) interaction += v[i] * p.w(i, j) * h[j];
        CHECK(energy(v, h, p2) - energy(v, h, p) == doctest::Approx(-interaction));
    }
    SUBCASE("dimension mismatch") {
        const RbmParams p = random_rbm(3, 2, 3);
        CHECK_THROWS_AS(energy(Vec(2, 0.0), Vec(2, 0.0), p), std::invalid_argument);
    }
}

TEST_CASE("brute_force_partition") {
    SUBCASE("zero params count the states") {
        CHECK(brute_force_partition(RbmParams::zeros(2, 2)) == doctest::Approx(16.0));
    }
    SUBCASE("1x1 model") {
        for (double w : {-1.5, 0.3, 2.0}) {
            RbmParams p = RbmParams::zeros(1, 1);
            p.w(0, 0) = w;
            CHECK(brute_force_partition(p) == doctest::Approx(3.0 + std::exp(w)));
        }
    }
    SUBCASE("probabilities normalize") {
        const RbmParams p = random_rbm(3, 3, 4);
        const double z = brute_force_partition(p);
        double total = 0.0;
        for (std::size_t vc = 0; vc < 8; ++vc)
            for (std::size_t hc = 0; hc < 8; ++hc)
                total += std::exp(-energy(bits_of(vc, 3), bits_of(hc, 3), p)) / z;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("enumeration limit") {
        CHECK_THROWS_WITH_AS(brute_force_partition(RbmParams::zeros(15, 6)), "enumeration limit",
                             std::invalid_argument);
    }
}

TEST_CASE("prop_up and prop_down") {
    SUBCASE("zero params give 0.5 everywhere") {
        const RbmParams p = RbmParams::zeros(3, 2);
        for (double x : prop_up({1, 0, 1}, p)) CHECK(x == doctest::Approx(0.5));
        for (double x : prop_down({1, 0}, p)) CHECK(x == doctest::Approx(0.5));
    }
    SUBCASE("match exact conditionals from the enumerated joint") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const RbmParams p = random_rbm(3, 2, 100 + seed);
            for (std::size_t vc = 0; vc < 8; ++vc) {
                const Vec v = bits_of(vc, 3);
                const Vec up = prop_up(v, p);
                for (std::size_t j = 0; j < 2; ++j)
                    CHECK(std::abs(up[j] - enumerated_hidden_conditional(v, j, p)) < 1e-10);
            }
            for (std::size_t hc = 0; hc < 4; ++hc) {
                const Vec h = bits_of(hc, 2);
                const Vec down = prop_down(h, p);
                for (std::size_t i = 0; i < 3; ++i)
                    CHECK(std::abs(down[i] - enumerated_visible_conditional(h, i, p)) < 1e-10);
            }
        }
    }
    SUBCASE("large hidden bias saturates the unit") {
        RbmParams p = RbmParams::zeros(2, 1);
        p.c = {10.0};
        CHECK(prop_up({0, 0}, p)[0] > 0.9999);
    }
    SUBCASE("symmetric model makes up and down agree") {
        RbmParams p = RbmParams::zeros(2, 2);
        p.w(0, 0) = 0.7;
        p.w(1, 1) = -0.4;
        p.w(0, 1) = p.w(1, 0) = 0.2;
        p.b = p.c = {0.1, -0.3};
        const Vec x = {1, 0};
        const Vec up = prop_up(x, p), down = prop_down(x, p);
        for (std::size_t i = 0; i < 2; ++i) CHECK(up[i] == doctest::Approx(down[i]));
    }
    SUBCASE("enumerated p(h|v) factorizes over units") {
        const RbmParams p = random_rbm(3, 2, 9);
        for (std::size_t vc = 0; vc < 8; ++vc) {
            const Vec v = bits_of(vc, 3);
            for (std::size_t hc = 0; hc < 4; ++hc) {
                const Vec h = bits_of(hc, 2);
                double joint = std::exp(-energy(v, h, p));
                double den = 0.0;
                for (std::size_t hc2 = 0; hc2 < 4; ++hc2)
                    den += std::exp(-energy(v, bits_of(hc2, 2), p));
                double product = 1.0;
                const Vec up = prop_up(v, p);
                for (std::size_t j = 0; j < 2; ++j)
                    product *= h[j] == 1.0 ? up[j] : 1.0 - up[j];
                CHECK(std::abs(joint / den - product) < 1e-10);
            }
        }
    }
}

TEST_CASE("sample_bernoulli") {
    Rng rng(5);
    SUBCASE("degenerate probabilities") {
        for (double v : sample_bernoulli(Vec(8, 0.0), rng)) CHECK(v == 0.0);
        for (double v : sample_bernoulli(Vec(8, 1.0), rng)) CHECK(v == 1.0);
    }
    SUBCASE("fair coins concentrate") {
        double total = 0.0;
        for (int i = 0; i < 100; ++i) {
            for (double v : sample_bernoulli(Vec(100, 0.5), rng)) total += v;
        }
        const double mean = total / 10000.0;
        CHECK(mean > 0.48);
        CHECK(mean < 0.52);
    }
}

TEST_CASE("gibbs_chain") {
    SUBCASE("zero params mix to 0.5 instantly") {
        const RbmParams p = RbmParams::zeros(3, 2);
        Rng rng(1);
        const GibbsState s = gibbs_chain({1, 1, 0}, p, 3, rng);
        for (double v : s.v) CHECK(v == doctest::Approx(0.5));
        for (double h : s.h) CHECK(h == doctest::Approx(0.5));
        CHECK(s.step == 3);
    }
    SUBCASE("n=1 equals one hand-traced pass") {
        RbmParams p = RbmParams::zeros(2, 1);
        p.w(0, 0) = 1.0;
        p.w(1, 0) = -0.5;
        p.b = {0.2, 0.1};
        p.c = {-0.3};
        const Vec v0 = {1, 0};
        // replay the same draws with an identical generator
        Rng trace(77);
        const Vec ph0 = prop_up(v0, p);
        const Vec h0 = sample_bernoulli(ph0, trace);
        const Vec pv1 = prop_down(h0, p);
        const Vec h1 = prop_up(pv1, p);

        Rng rng(77);
        const GibbsState s = gibbs_chain(v0, p, 1, rng);
        CHECK(s.v == pv1);
        CHECK(s.h == h1);
    }
    SUBCASE("long chain marginals match enumeration") {
        const RbmParams p = random_rbm(2, 2, 12, 0.8);
        const double z = brute_force_partition(p);
        Vec marginal(2, 0.0);
        for (std::size_t vc = 0; vc < 4; ++vc) {
            const Vec v = bits_of(vc, 2);
            double pv = 0.0;
            for (std::size_t hc = 0; hc < 4; ++hc)
                pv += std::exp(-energy(v, bits_of(hc, 2), p)) / z;
            for (std::size_t i = 0; i < 2; ++i) marginal[i] += v[i] * pv;
        }
        // single long alternating chain, averaging visible probabilities
        Rng rng(3);
        Vec v = {1, 0};
        Vec mean(2, 0.0);
        const int burn = 500, steps = 5000;
        for (int t = 0; t < burn + steps; ++t) {
            const Vec h = sample_bernoulli(prop_up(v, p), rng);
            const Vec pv = prop_down(h, p);
            if (t >= burn)
                for (std::size_t i = 0; i < 2; ++i) mean[i] += pv[i];
            v = sample_bernoulli(pv, rng);
        }
        for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(mean[i] / steps - marginal[i]) < 0.02);
    }
}

TEST_CASE("cd_update") {
    CdConfig cfg;
    cfg.n = 1;
    SUBCASE("chain fixed point leaves params unchanged") {
        // zero params and v0 = 0.5: h0 = v^n = h^n = 0.5, the update cancels
        RbmParams p = RbmParams::zeros(2, 2);
        Rng rng(1);
        cd_update({Vec(2, 0.5)}, p, cfg, rng);
        for (double w : p.w.data()) CHECK(w == doctest::Approx(0.0));
        for (double b : p.b) CHECK(b == doctest::Approx(0.0));
        for (double c : p.c) CHECK(c == doctest::Approx(0.0));
    }
    SUBCASE("single example matches the hand-computed update") {
        RbmParams p = RbmParams::zeros(2, 1);
        p.w(0, 0) = 0.4;
        p.w(1, 0) = -0.2;
        const Vec v0 = {1, 0};
        // log the chain with a twin generator
        Rng twin(9);
        const Vec h0 = prop_up(v0, p);
        const GibbsState end = gibbs_chain(v0, p, 1, twin);

        RbmParams updated = p;
        Rng rng(9);
        cd_update({v0}, updated, cfg, rng);
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(updated.w(i, 0) ==
                  doctest::Approx(p.w(i, 0) + cfg.eta_w * (v0[i] * h0[0] - end.v[i] * end.h[0])));
            CHECK(updated.b[i] == doctest::Approx(cfg.eta_b * (v0[i] - end.v[i])));
        }
        CHECK(updated.c[0] == doctest::Approx(cfg.eta_c * (h0[0] - end.h[0])));
    }
    SUBCASE("batch update is the mean of per-example updates") {
        const std::vector<Vec> batch = {{1, 0, 1}, {0, 1, 0}, {1, 1, 1}};
        RbmParams base = random_rbm(3, 2, 21, 0.3);

        RbmParams together = base;
        Rng rng1(42);
        cd_update(batch, together, cfg, rng1);

        // same draws, one example at a time, deltas averaged by hand
        Rng rng2(42);
        Matrix dw(3, 2);
        Vec db(3, 0.0), dc(2, 0.0);
        for (const Vec& v0 : batch) {
            const Vec h0 = prop_up(v0, base);
            const GibbsState end = gibbs_chain(v0, base, 1, rng2);
            for (std::size_t i = 0; i < 3; ++i) {
                for (std::size_t j = 0; j < 2; ++j)
                    dw(i, j) += v0[i] * h0[j] - end.v[i] * end.h[j];
                db[i] += v0[i] - end.v[i];
            }
            for (std::size_t j = 0; j < 2; ++j) dc[j] += h0[j] - end.h[j];
        }
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 2; ++j)
                CHECK(together.w(i, j) == doctest::Approx(base.w(i, j) + 0.1 * dw(i, j) / 3.0));
            CHECK(together.b[i] == doctest::Approx(base.b[i] + 0.1 * db[i] / 3.0));
        }
    }
}

TEST_CASE("train_rbm") {
    SUBCASE("bars dataset reconstructs") {
        CdConfig cfg;
        cfg.epochs = 200;
        cfg.seed = 5;
        cfg.eta_w = cfg.eta_b = cfg.eta_c = 0.5;
        const TrainResult r = train_rbm(kBars, 2, cfg);
        CHECK(r.epoch_recon_error.back() < 0.1);
    }
    SUBCASE("single repeated vector is memorized") {
        CdConfig cfg;
        cfg.epochs = 300;
        cfg.seed = 6;
        const std::vector<Vec> data(8, Vec{1, 0, 1, 0});
        const TrainResult r = train_rbm(data, 3, cfg);
        const Vec v1 = prop_down(prop_up({1, 0, 1, 0}, r.params), r.params);
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(v1[i] - data[0][i]) < 0.05 * 4);
        CHECK(r.epoch_recon_error.back() < 0.05);
    }
    SUBCASE("config validation") {
        CdConfig cfg;
        cfg.epochs = 0;
        CHECK_THROWS_AS(train_rbm(kBars, 2, cfg), std::invalid_argument);
        CHECK_THROWS_AS(train_rbm({}, 2, CdConfig{}), std::invalid_argument);
    }
    SUBCASE("identical seed gives bit-identical params") {
        CdConfig cfg;
        cfg.epochs = 20;
        cfg.seed = 99;
        const TrainResult a = train_rbm(kBars, 2, cfg);
        const TrainResult b = train_rbm(kBars, 2, cfg);
        CHECK(a.params.w == b.params.w);
        CHECK(a.params.b == b.params.b);
        CHECK(a.params.c == b.params.c);
    }
    SUBCASE("enumerated log-likelihood improves over initialization") {
        CdConfig cfg;
        cfg.epochs = 200;
        cfg.seed = 7;
        Rng init_rng(cfg.seed);
        const RbmParams init = init_rbm(4, 2, init_rng);
        const TrainResult trained = train_rbm(kBars, 2, cfg);
        double before = 0.0, after = 0.0;
        for (const Vec& v : kBars) {
            before += log_likelihood(v, init);
            after += log_likelihood(v, trained.params);
        }
        CHECK(after > before);
    }
}
