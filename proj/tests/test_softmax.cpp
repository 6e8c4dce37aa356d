#include <cmath>

#include <doctest.h>

#include "scenedbm/softmax.hpp"

using namespace scenedbm;

namespace {

LabeledSet random_set(std::size_t k, std::size_t d, std::size_t m, std::uint64_t seed) {
    Rng rng(seed);
    LabeledSet set;
    for (std::size_t i = 0; i < m; ++i) {
        Vec x(d);
        for (double& v : x) v = rng.uniform(-2, 2);
        set.features.push_back(std::move(x));
        set.labels.push_back(static_cast<int>(rng.index(k)) + 1);
    }
    return set;
}

SoftmaxParams random_params(std::size_t k, std::size_t d, double lambda, std::uint64_t seed) {
    Rng rng(seed);
    SoftmaxParams p = SoftmaxParams::zeros(k, d, lambda);
    for (double& t : p.theta.data()) t = rng.uniform(-1, 1);
    return p;
}

// Central finite differences of cost, the gradient oracle.
Matrix fd_gradient(const LabeledSet& data, const SoftmaxParams& p, double step = 1e-5) {
    Matrix g(p.theta.rows(), p.theta.cols());
    for (std::size_t j = 0; j < p.theta.rows(); ++j) {
        for (std::size_t l = 0; l < p.theta.cols(); ++l) {
            SoftmaxParams plus = p, minus = p;
            plus.theta(j, l) += step;
            minus.theta(j, l) -= step;
            g(j, l) = (cost(data, plus) - cost(data, minus)) / (2 * step);
        }
    }
    return g;
}

}  // namespace

TEST_CASE("hypothesis") {
    SUBCASE("zero params give the uniform distribution") {
        const SoftmaxParams p = SoftmaxParams::zeros(4, 3, 0.0);
        for (double h : hypothesis({1, -1, 2}, p)) CHECK(h == doctest::Approx(0.25));
    }
    SUBCASE("logit gap of ln 3 gives 3:1 odds") {
        SoftmaxParams p = SoftmaxParams::zeros(2, 1, 0.0);
        p.theta(0, 0) = std::log(3.0);
        const Vec h = hypothesis({1.0}, p);
        CHECK(h[0] == doctest::Approx(0.75));
        CHECK(h[1] == doctest::Approx(0.25));
    }
    SUBCASE("invariant under per-class constant shifts") {
        SoftmaxParams p = random_params(3, 4, 0.0, 1);
        // shift every class's row by the same vector
        SoftmaxParams shifted = p;
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t l = 0; l < 5; ++l) shifted.theta(j, l) += 0.3 * (l + 1);
        const Vec x = {0.5, -1.2, 2.0, 0.1};
        const Vec a = hypothesis(x, p), b = hypothesis(x, shifted);
        for (std::size_t j = 0; j < 3; ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12));
        CHECK(predict(x, p) == predict(x, shifted));
    }
    SUBCASE("outputs sum to one and stay positive") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const SoftmaxParams p = random_params(5, 3, 0.0, seed);
            Rng rng(seed + 100);
            const Vec x = {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50)};
            const Vec h = hypothesis(x, p);
            double sum = 0.0;
            for (double v : h) {
                CHECK(v > 0.0);
                sum += v;
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
    SUBCASE("non-finite input is rejected") {
        const SoftmaxParams p = SoftmaxParams::zeros(2, 2, 0.0);
        CHECK_THROWS_AS(hypothesis({1.0, std::nan("")}, p), std::invalid_argument);
    }
}

TEST_CASE("cost") {
    SUBCASE("zero params cost ln k") {
        const LabeledSet data = random_set(3, 4, 12, 2);
        CHECK(cost(data, SoftmaxParams::zeros(3, 4, 0.0)) == doctest::Approx(std::log(3.0)));
    }
    SUBCASE("confident correct predictions drive cost to zero") {
        LabeledSet data;
        data.features = {{1.0, 0.0}, {0.0, 1.0}};
        data.labels = {1, 2};
        SoftmaxParams p = SoftmaxParams::zeros(2, 2, 0.0);
        p.theta(0, 0) = 50.0;
        p.theta(1, 1) = 50.0;
        CHECK(cost(data, p) < 0.01);
    }
    SUBCASE("decay adds exactly the penalty, intercept excluded") {
        const LabeledSet data = random_set(3, 4, 15, 3);
        SoftmaxParams p = random_params(3, 4, 0.0, 4);
        SoftmaxParams decayed = p;
        decayed.lambda = 0.7;
        double penalty = 0.0;
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t l = 0; l < 4; ++l) penalty += p.theta(j, l) * p.theta(j, l);
        CHECK(cost(data, decayed) - cost(data, p) == doctest::Approx(0.35 * penalty));
    }
    SUBCASE("label out of range is rejected") {
        LabeledSet data;
        data.features = {{1.0, 2.0}};
        data.labels = {3};
        CHECK_THROWS_AS(cost(data, SoftmaxParams::zeros(2, 2, 0.0)), std::invalid_argument);
    }
}

TEST_CASE("gradient matches central finite differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const LabeledSet data = random_set(3, 4, 20, 500 + seed);
        const SoftmaxParams p = random_params(3, 4, seed % 2 ? 0.05 : 0.0, 600 + seed);
        const Matrix g = gradient(data, p);
        const Matrix fd = fd_gradient(data, p);
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t l = 0; l < 5; ++l) {
                const double denom = std::max(1.0, std::abs(fd(j, l)));
                CHECK(std::abs(g(j, l) - fd(j, l)) / denom < 1e-6);
            }
    }
}

TEST_CASE("gradient vanishes at the regularized optimum") {
    const LabeledSet data = random_set(3, 3, 30, 77);
    const SoftmaxTrainResult r = train_softmax(data, 3, 0.01, 1.0, 4000);
    const Matrix g = gradient(data, r.params);
    double inf_norm = 0.0;
    for (double v : g.data()) inf_norm = std::max(inf_norm, std::abs(v));
    CHECK(inf_norm < 1e-5);
}

TEST_CASE("train_softmax") {
    SUBCASE("separable set reaches 100% training accuracy") {
        LabeledSet data;
        Rng rng(5);
        for (int i = 0; i < 40; ++i) {
            const int cls = i % 2;
            data.features.push_back({(cls ? 2.0 : -2.0) + rng.uniform(-0.5, 0.5),
                                     rng.uniform(-1, 1)});
            data.labels.push_back(cls + 1);
        }
        const SoftmaxTrainResult r = train_softmax(data, 2, 0.0, 0.5, 500);
        for (std::size_t i = 0; i < data.features.size(); ++i)
            CHECK(predict(data.features[i], r.params) == data.labels[i]);
    }
    SUBCASE("huge decay flattens the weights") {
        const LabeledSet data = random_set(3, 4, 30, 9);
        const SoftmaxTrainResult r = train_softmax(data, 3, 1e3, 0.5, 200);
        double norm = 0.0;
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t l = 0; l < 4; ++l) norm += r.params.theta(j, l) * r.params.theta(j, l);
        CHECK(std::sqrt(norm) < 1e-2);
    }
    SUBCASE("cost trace never increases") {
        const LabeledSet data = random_set(4, 3, 25, 10);
        const SoftmaxTrainResult r = train_softmax(data, 4, 1e-4, 0.5, 200);
        CHECK(r.cost_trace.front() == doctest::Approx(std::log(4.0)));
        for (std::size_t i = 1; i < r.cost_trace.size(); ++i)
            CHECK(r.cost_trace[i] <= r.cost_trace[i - 1] + 1e-12);
    }
    SUBCASE("decayed descent from two starts converges to the same cost") {
        const LabeledSet data = random_set(3, 3, 25, 11);
        const SoftmaxTrainResult from_zero = train_softmax(data, 3, 0.05, 0.5, 3000);
        // manual descent from a random start using the same gradient
        SoftmaxParams p = random_params(3, 3, 0.05, 123);
        for (int it = 0; it < 6000; ++it) {
            const Matrix g = gradient(data, p);
            for (std::size_t j = 0; j < 3; ++j)
                for (std::size_t l = 0; l < 4; ++l) p.theta(j, l) -= 0.25 * g(j, l);
        }
        CHECK(std::abs(cost(data, p) - from_zero.cost_trace.back()) < 1e-6);
    }
    SUBCASE("invalid arguments") {
        const LabeledSet data = random_set(2, 2, 4, 12);
        CHECK_THROWS_AS(train_softmax(data, 2, 0.0, -1.0, 10), std::invalid_argument);
        CHECK_THROWS_AS(train_softmax(data, 2, 0.0, 0.5, 0), std::invalid_argument);
        CHECK_THROWS_AS(train_softmax(LabeledSet{}, 2, 0.0, 0.5, 10), std::invalid_argument);
    }
}

TEST_CASE("predict") {
    SUBCASE("uniform probabilities break ties to class 1") {
        CHECK(predict({1.0, 1.0}, SoftmaxParams::zeros(3, 2, 0.0)) == 1);
    }
    SUBCASE("favored class wins") {
        SoftmaxParams p = SoftmaxParams::zeros(2, 2, 0.0);
        p.theta(1, 0) = 3.0;
        CHECK(predict({1.0, 0.0}, p) == 2);
    }
}
