#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dynamask/matrix.hpp"

namespace dynamask {

enum class PerturbationKind {
    gaussian_blur,
    fade_moving_average,
    fade_past_average,
    static_hadamard,
};

/// Mask-controlled perturbation of a time series. Entry (t,i) of the output
/// depends on the mask only through m_{t,i} and blends x_{t,i} with a
/// substitute built from the same feature at neighbouring times:
///
///   gaussian-blur        weighted time average with sigma = sigma_max (1 - m)
///   fade-moving-average  m x + (1 - m) mu,   mu = window average, t-W..t+W
///   fade-past-average    m x + (1 - m) mu^p, mu^p = past average, t-W..t
///   static-hadamard      m x                 (no temporal context)
///
/// All operators are the identity at m = 1. Window averages truncate at the
/// sequence boundary and divide by the number of included terms.
class PerturbationOperator {
public:
    static PerturbationOperator gaussian_blur(double sigma_max);
    static PerturbationOperator fade_moving_average(std::size_t window);
    static PerturbationOperator fade_past_average(std::size_t window);
    static PerturbationOperator static_hadamard();

    PerturbationKind kind() const { return kind_; }
    double sigma_max() const { return sigma_max_; }
    std::size_t window() const { return window_; }

    /// Stable identifier used in configs and reports.
    std::string name() const;

    /// Declared dependence window (W1, W2): the perturbed entry at time t may
    /// read the feature at times t - W1 .. t + W2.
    std::pair<std::size_t, std::size_t> dynamic_window(std::size_t T) const;

    Matrix apply(const Matrix& x, const Matrix& m) const;

    /// Entrywise d apply / d m_{t,i}, analytic, valid on (0,1) with one-sided
    /// values at the endpoints.
    Matrix mask_derivative(const Matrix& x, const Matrix& m) const;

    /// One pass producing both the perturbed series and the derivative
    /// (the mask-fit hot path).
    void apply_with_derivative(const Matrix& x, const Matrix& m, Matrix& out,
                               Matrix& deriv) const;

private:
    PerturbationOperator(PerturbationKind kind, double sigma_max,
                         std::size_t window)
        : kind_(kind), sigma_max_(sigma_max), window_(window) {}

    PerturbationKind kind_;
    double sigma_max_ = 0.0;
    std::size_t window_ = 0;
};

/// Finite-difference probe of Definition 'dynamic perturbation': reports the
/// time offsets t' - t inside the declared window where the perturbed entry
/// (t,i) actually responds to x_{t',i}, with the mask fixed at 0.5.
std::vector<long long> check_dynamicity(const PerturbationOperator& op,
                                        const Matrix& x, std::size_t t,
                                        std::size_t i);

}  // namespace dynamask
