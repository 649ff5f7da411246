#include "dynamask/perturbations.hpp"

#include <cmath>
#include <stdexcept>

namespace dynamask {

PerturbationOperator PerturbationOperator::gaussian_blur(double sigma_max) {
    if (!(sigma_max > 0.0)) {
        throw std::invalid_argument("gaussian_blur: sigma_max must be > 0");
    }
    return {PerturbationKind::gaussian_blur, sigma_max, 0};
}

PerturbationOperator PerturbationOperator::fade_moving_average(
    std::size_t window) {
    if (window == 0) {
        // A zero window makes mu = x, so the operator never perturbs anything
        // and mask optimization silently stalls.
        throw std::invalid_argument(
            "fade_moving_average: window must be >= 1");
    }
    return {PerturbationKind::fade_moving_average, 0.0, window};
}

PerturbationOperator PerturbationOperator::fade_past_average(
    std::size_t window) {
    if (window == 0) {
        throw std::invalid_argument("fade_past_average: window must be >= 1");
    }
    return {PerturbationKind::fade_past_average, 0.0, window};
}

PerturbationOperator PerturbationOperator::static_hadamard() {
    return {PerturbationKind::static_hadamard, 0.0, 0};
}

std::string PerturbationOperator::name() const {
    switch (kind_) {
        case PerturbationKind::gaussian_blur: return "gaussian-blur";
        case PerturbationKind::fade_moving_average:
            return "fade-moving-average";
        case PerturbationKind::fade_past_average: return "fade-past-average";
        case PerturbationKind::static_hadamard: return "static-hadamard";
    }
    return "unknown";
}

std::pair<std::size_t, std::size_t> PerturbationOperator::dynamic_window(
    std::size_t T) const {
    switch (kind_) {
        case PerturbationKind::gaussian_blur: return {T - 1, T - 1};
        case PerturbationKind::fade_moving_average: return {window_, window_};
        case PerturbationKind::fade_past_average: return {window_, 0};
        case PerturbationKind::static_hadamard: return {0, 0};
    }
    return {0, 0};
}

namespace {

void validate_inputs(const Matrix& x, const Matrix& m) {
    if (!x.same_shape(m)) {
        throw std::invalid_argument(
            "perturbation: input and mask shapes differ");
    }
    for (std::size_t k = 0; k < m.size(); ++k) {
        if (!(m[k] >= 0.0 && m[k] <= 1.0)) {
            throw std::invalid_argument(
                "perturbation: mask entries must lie in [0, 1]");
        }
    }
}

// Below this sigma every off-center Gaussian weight underflows; snap to the
// identity (and zero derivative) instead of evaluating 0/0-prone sums.
constexpr double kSigmaFloor = 1e-6;

}  // namespace

void PerturbationOperator::apply_with_derivative(const Matrix& x,
                                                 const Matrix& m, Matrix& out,
                                                 Matrix& deriv) const {
    validate_inputs(x, m);
    const std::size_t T = x.rows(), d = x.cols();
    out = Matrix(T, d, 0.0);
    deriv = Matrix(T, d, 0.0);

    switch (kind_) {
        case PerturbationKind::static_hadamard: {
            for (std::size_t k = 0; k < x.size(); ++k) {
                out[k] = m[k] * x[k];
                deriv[k] = x[k];
            }
            return;
        }
        case PerturbationKind::fade_moving_average:
        case PerturbationKind::fade_past_average: {
            const bool past_only =
                kind_ == PerturbationKind::fade_past_average;
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t t = 0; t < T; ++t) {
                    const std::size_t lo = t >= window_ ? t - window_ : 0;
                    const std::size_t hi =
                        past_only ? t : std::min(T - 1, t + window_);
                    double sum = 0.0;
                    for (std::size_t s = lo; s <= hi; ++s) sum += x(s, i);
                    const double mu =
                        sum / static_cast<double>(hi - lo + 1);
                    const double mv = m(t, i);
                    out(t, i) = mv * x(t, i) + (1.0 - mv) * mu;
                    deriv(t, i) = x(t, i) - mu;
                }
            }
            return;
        }
        case PerturbationKind::gaussian_blur: {
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t t = 0; t < T; ++t) {
                    const double mv = m(t, i);
                    const double sigma = sigma_max_ * (1.0 - mv);
                    if (sigma < kSigmaFloor) {
                        out(t, i) = x(t, i);
                        deriv(t, i) = 0.0;
                        continue;
                    }
                    const double u = 1.0 / (2.0 * sigma * sigma);
                    // Weights w_k = exp(-k^2 u) via the exact recurrence
                    // w_{k+1} = w_k e^{-(2k+1)u}; terms vanish identically
                    // once w underflows, so the loop may stop there.
                    const double e1 = std::exp(-u);
                    const double e2 = e1 * e1;
                    double s0 = 1.0, s1 = x(t, i), s2 = 0.0, s3 = 0.0;
                    double w = 1.0, step = e1;
                    const std::size_t reach = std::max(t, T - 1 - t);
                    for (std::size_t k = 1; k <= reach; ++k) {
                        w *= step;
                        step *= e2;
                        if (w == 0.0) break;
                        const double k2 = static_cast<double>(k) *
                                          static_cast<double>(k);
                        if (t >= k) {
                            const double xv = x(t - k, i);
                            s0 += w;
                            s1 += w * xv;
                            s2 += w * k2;
                            s3 += w * k2 * xv;
                        }
                        if (t + k < T) {
                            const double xv = x(t + k, i);
                            s0 += w;
                            s1 += w * xv;
                            s2 += w * k2;
                            s3 += w * k2 * xv;
                        }
                    }
                    out(t, i) = s1 / s0;
                    // d(s1/s0)/dsigma via quotient rule, times
                    // dsigma/dm = -sigma_max.
                    deriv(t, i) = -sigma_max_ * (s3 * s0 - s1 * s2) /
                                  (sigma * sigma * sigma * s0 * s0);
                }
            }
            return;
        }
    }
}

Matrix PerturbationOperator::apply(const Matrix& x, const Matrix& m) const {
    Matrix out, deriv;
    apply_with_derivative(x, m, out, deriv);
    return out;
}

Matrix PerturbationOperator::mask_derivative(const Matrix& x,
                                             const Matrix& m) const {
    Matrix out, deriv;
    apply_with_derivative(x, m, out, deriv);
    return deriv;
}

std::vector<long long> check_dynamicity(const PerturbationOperator& op,
                                        const Matrix& x, std::size_t t,
                                        std::size_t i) {
    if (t >= x.rows() || i >= x.cols()) {
        throw std::invalid_argument("check_dynamicity: index out of range");
    }
    const Matrix m(x.rows(), x.cols(), 0.5);
    const auto [w1, w2] = op.dynamic_window(x.rows());
    const long long lo =
        -static_cast<long long>(std::min<std::size_t>(w1, t));
    const long long hi = static_cast<long long>(
        std::min<std::size_t>(w2, x.rows() - 1 - t));

    std::vector<long long> offsets;
    Matrix probe = x;
    const double h = 1e-5;
    for (long long o = lo; o <= hi; ++o) {
        const std::size_t ts = static_cast<std::size_t>(
            static_cast<long long>(t) + o);
        const double saved = probe(ts, i);
        probe(ts, i) = saved + h;
        const double up = op.apply(probe, m)(t, i);
        probe(ts, i) = saved - h;
        const double down = op.apply(probe, m)(t, i);
        probe(ts, i) = saved;
        if (std::abs(up - down) / (2.0 * h) > 1e-9) {
            offsets.push_back(o);
        }
    }
    return offsets;
}

}  // namespace dynamask
