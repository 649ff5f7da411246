#include "dynamask/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dynamask {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double RngStream::uniform01() {
    // Top 53 bits -> [0, 1) on the 2^-53 grid.
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    // u1 in (0, 1] keeps the log finite; cosine branch only so every call
    // consumes exactly two uniforms and carries no hidden state.
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::uniform_below(std::uint64_t n) {
    if (n == 0) {
        throw std::invalid_argument("uniform_below: n must be positive");
    }
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

std::vector<std::size_t> RngStream::sample_without_replacement(std::size_t n,
                                                               std::size_t k) {
    if (k > n) {
        throw std::invalid_argument(
            "sample_without_replacement: k must not exceed n");
    }
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    // Partial Fisher-Yates: the first k slots end up as the sample.
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(uniform_below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

RngStream RngStream::substream(std::uint64_t key) const {
    return RngStream(splitmix64(splitmix64(seed_) ^ splitmix64(key)));
}

std::vector<double> sample_standard_normal(RngStream& rng, std::size_t n) {
    if (n == 0) {
        throw std::invalid_argument("sample_standard_normal: n must be positive");
    }
    std::vector<double> out(n);
    for (double& v : out) v = rng.normal();
    return out;
}

Matrix cholesky_lower(const Matrix& cov) {
    if (cov.rows() != cov.cols()) {
        throw std::invalid_argument("cholesky_lower: matrix must be square");
    }
    const std::size_t n = cov.rows();
    Matrix L(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = cov(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            if (i == j) {
                if (!(s > 0.0)) {
                    throw std::runtime_error(
                        "cholesky_lower: matrix is not positive definite");
                }
                L(i, j) = std::sqrt(s);
            } else {
                L(i, j) = s / L(j, j);
            }
        }
    }
    return L;
}

std::vector<double> sample_multivariate_normal(RngStream& rng,
                                               const std::vector<double>& mean,
                                               const Matrix& cov) {
    if (cov.rows() != mean.size()) {
        throw std::invalid_argument(
            "sample_multivariate_normal: mean/cov dimension mismatch");
    }
    return sample_multivariate_normal_chol(rng, mean, cholesky_lower(cov));
}

std::vector<double> sample_multivariate_normal_chol(
    RngStream& rng, const std::vector<double>& mean,
    const Matrix& chol_lower) {
    const std::size_t n = mean.size();
    if (chol_lower.rows() != n || chol_lower.cols() != n) {
        throw std::invalid_argument(
            "sample_multivariate_normal_chol: factor/mean dimension mismatch");
    }
    std::vector<double> z(n);
    for (double& v : z) v = rng.normal();
    std::vector<double> x(mean);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) x[i] += chol_lower(i, j) * z[j];
    }
    return x;
}

}  // namespace dynamask
