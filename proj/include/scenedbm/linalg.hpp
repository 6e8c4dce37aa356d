#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace scenedbm {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Small on purpose: the models here
// need matvecs, outer products and elementwise updates, nothing more.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    Vec& data() { return data_; }
    const Vec& data() const { return data_; }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

    // y = A^T x  (x length rows, result length cols)
    Vec transpose_times(const Vec& x) const {
        if (x.size() != rows_)
            throw std::invalid_argument("transpose_times: dimension mismatch");
        Vec y(cols_, 0.0);
        for (std::size_t r = 0; r < rows_; ++r) {
            const double xr = x[r];
            if (xr == 0.0) continue;
            const double* row = &data_[r * cols_];
            for (std::size_t c = 0; c < cols_; ++c) y[c] += row[c] * xr;
        }
        return y;
    }

    // y = A x  (x length cols, result length rows)
    Vec times(const Vec& x) const {
        if (x.size() != cols_)
            throw std::invalid_argument("times: dimension mismatch");
        Vec y(rows_, 0.0);
        for (std::size_t r = 0; r < rows_; ++r) {
            const double* row = &data_[r * cols_];
            double acc = 0.0;
            for (std::size_t c = 0; c < cols_; ++c) acc += row[c] * x[c];
            y[r] = acc;
        }
        return y;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vec data_;
};

// Deterministic PRNG. xoshiro-style output from a splitmix-seeded mt19937
// would do, but mt19937 alone is already portable and reproducible; we
// only add a fixed-point uniform so draws do not depend on libstdc++'s
// distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

private:
    std::uint64_t state_;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace scenedbm
