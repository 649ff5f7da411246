#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dynamask/matrix.hpp"

namespace dynamask {

/// Deterministic random stream built on std::mt19937_64, whose output
/// sequence is pinned bit-exactly by the standard. All derived draws
/// (uniforms, normals, bounded integers, shuffles) use explicit algorithms
/// rather than std::*_distribution, so the same seed reproduces the same
/// values on every platform.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();

    /// Standard normal via Box-Muller; consumes exactly two uniforms.
    double normal();

    /// Uniform integer in [0, n); n must be positive. Rejection sampling,
    /// bias-free.
    std::uint64_t uniform_below(std::uint64_t n);

    /// In-place Fisher-Yates shuffle of 0..n-1 index vectors or similar.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct values from {0, ..., n-1}, returned sorted ascending.
    /// Requires k <= n.
    std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                        std::size_t k);

    /// Independent stream derived from (seed, key). Depends only on the seed
    /// this stream was created with, never on how many draws were consumed,
    /// so sub-streams are reproducible in any order.
    RngStream substream(std::uint64_t key) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// n independent standard normals; n must be positive.
std::vector<double> sample_standard_normal(RngStream& rng, std::size_t n);

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Throws std::runtime_error when the factorization fails (zero or negative
/// pivot), e.g. for singular covariances.
Matrix cholesky_lower(const Matrix& cov);

/// One draw from N(mean, cov) via the Cholesky factor of cov.
std::vector<double> sample_multivariate_normal(RngStream& rng,
                                               const std::vector<double>& mean,
                                               const Matrix& cov);

/// Same, with a precomputed lower Cholesky factor (hot-path variant).
std::vector<double> sample_multivariate_normal_chol(
    RngStream& rng, const std::vector<double>& mean, const Matrix& chol_lower);

}  // namespace dynamask
