#include "dynamask/masks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

using nlohmann::json;

namespace dynamask {

namespace {

constexpr double kProbFloor = 1e-8;

void check_loss_kind(const DifferentiableModel& model, LossKind kind) {
    const OutputKind expected = kind == LossKind::regression
                                    ? OutputKind::regression
                                    : OutputKind::probability;
    if (model.output_kind() != expected) {
        throw std::invalid_argument(
            "mask loss: model output kind does not match the configured loss");
    }
}

void check_fit_config(const MaskFitConfig& cfg) {
    if (cfg.area < 0.0 || cfg.area > 1.0) {
        throw std::invalid_argument("mask fit: area must lie in [0,1]");
    }
    if (!(cfg.learning_rate > 0.0)) {
        throw std::invalid_argument("mask fit: learning_rate must be positive");
    }
    if (cfg.momentum < 0.0) {
        throw std::invalid_argument("mask fit: momentum must be nonnegative");
    }
    if (!(cfg.lambda_0 > 0.0)) {
        throw std::invalid_argument("mask fit: lambda_0 must be positive");
    }
    if (cfg.dilation < 1.0) {
        throw std::invalid_argument("mask fit: dilation must be at least 1");
    }
    if (cfg.lambda_c < 0.0) {
        throw std::invalid_argument("mask fit: lambda_c must be nonnegative");
    }
}

double error_from_outputs(const Matrix& y, const Matrix& y0, LossKind kind) {
    double loss = 0.0;
    if (kind == LossKind::regression) {
        for (std::size_t k = 0; k < y.size(); ++k) {
            const double diff = y[k] - y0[k];
            loss += diff * diff;
        }
        return loss;
    }
    // Cross-entropy with the untouched prediction as target distribution;
    // the scalar binary head contributes both class terms.
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double target = y0[k];
        const double est = y[k];
        loss -= target * std::log(std::max(est, kProbFloor));
        loss -= (1.0 - target) * std::log(std::max(1.0 - est, kProbFloor));
    }
    return loss;
}

Matrix error_upstream(const Matrix& y, const Matrix& y0, LossKind kind) {
    Matrix up(y.rows(), y.cols(), 0.0);
    if (kind == LossKind::regression) {
        for (std::size_t k = 0; k < y.size(); ++k) {
            up[k] = 2.0 * (y[k] - y0[k]);
        }
        return up;
    }
    // Where a probability sits below the floor the loss is flat, so that
    // term's derivative drops out.
    for (std::size_t k = 0; k < y.size(); ++k) {
        double u = 0.0;
        if (y[k] >= kProbFloor) u -= y0[k] / y[k];
        if (1.0 - y[k] >= kProbFloor) u += (1.0 - y0[k]) / (1.0 - y[k]);
        up[k] = u;
    }
    return up;
}

struct ErrorEval {
    double loss = 0.0;
    Matrix grad;  // with respect to the mask argument handed in
};

ErrorEval error_term(const DifferentiableModel& model,
                     const PerturbationOperator& op, const Matrix& x,
                     const Matrix& m_arg, LossKind kind, const Matrix& y0,
                     bool want_grad) {
    ErrorEval out;
    if (!want_grad) {
        const Matrix y = model.forward(op.apply(x, m_arg));
        out.loss = error_from_outputs(y, y0, kind);
        return out;
    }
    Matrix perturbed;
    Matrix deriv;
    op.apply_with_derivative(x, m_arg, perturbed, deriv);
    const Matrix y = model.forward(perturbed);
    out.loss = error_from_outputs(y, y0, kind);
    const Matrix vjp = model.input_vjp(perturbed, error_upstream(y, y0, kind));
    out.grad = Matrix(m_arg.rows(), m_arg.cols(), 0.0);
    for (std::size_t k = 0; k < out.grad.size(); ++k) {
        out.grad[k] = vjp[k] * deriv[k];
    }
    return out;
}

std::size_t ones_count(std::size_t n, double a) {
    return static_cast<std::size_t>(std::llround(a * static_cast<double>(n)));
}

Matrix area_gradient(const Matrix& m, double a) {
    const std::size_t n = m.size();
    const std::size_t k = ones_count(n, a);
    const std::vector<std::size_t> order = argsort_ascending(m.values());
    Matrix grad(m.rows(), m.cols(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        const double target = r >= n - k ? 1.0 : 0.0;
        grad[order[r]] = 2.0 * (m[order[r]] - target);
    }
    return grad;
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Matrix connectedness_gradient(const Matrix& m) {
    Matrix grad(m.rows(), m.cols(), 0.0);
    const std::size_t T = m.rows();
    for (std::size_t i = 0; i < m.cols(); ++i) {
        for (std::size_t t = 0; t < T; ++t) {
            double g = 0.0;
            if (t > 0) g += sign_of(m(t, i) - m(t - 1, i));
            if (t + 1 < T) g -= sign_of(m(t + 1, i) - m(t, i));
            grad(t, i) = g;
        }
    }
    return grad;
}

Matrix complement(const Matrix& m) {
    Matrix out(m.rows(), m.cols(), 0.0);
    for (std::size_t k = 0; k < m.size(); ++k) out[k] = 1.0 - m[k];
    return out;
}

/// One engine serves both modes. The deletion objective is
/// -error(1-M) + lambda_a * area(M) + lambda_c * connectedness(M); its error
/// gradient with respect to M is the plain error gradient evaluated at 1-M
/// (the two sign flips cancel), so both modes add the term with weight +1 and
/// differ only in the mask the error sees.
FitResult run_fit(const DifferentiableModel& model,
                  const PerturbationOperator& op, const Matrix& x,
                  const MaskFitConfig& cfg) {
    check_fit_config(cfg);
    check_loss_kind(model, cfg.loss_kind);
    const std::size_t T = x.rows();
    const std::size_t d = x.cols();
    const std::size_t n = T * d;
    if (n == 0) throw std::invalid_argument("mask fit: empty input");
    const bool deleting = cfg.mode == MaskMode::deletion;

    const Matrix y0 = model.forward(x);
    // Internally each term is averaged over its own entry count so the
    // default step sizes behave the same at every problem size; the recorded
    // history keeps the raw sums.
    const double ce = static_cast<double>(y0.size());
    const double ca = static_cast<double>(n);
    const double cc = T >= 2 ? static_cast<double>((T - 1) * d) : 1.0;

    Matrix m(T, d, 0.5);
    Matrix step(T, d, 0.0);
    FitResult result;
    result.config = cfg;
    result.area = cfg.area;
    result.loss_history.reserve(cfg.epochs);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lambda_a =
            lambda_schedule(cfg.lambda_0, cfg.dilation, cfg.epochs, epoch);
        const Matrix m_err = deleting ? complement(m) : m;
        const ErrorEval err =
            error_term(model, op, x, m_err, cfg.loss_kind, y0, true);
        const double l_area = area_loss(m, cfg.area);
        const double l_conn = connectedness_loss(m);
        const double objective = (deleting ? -err.loss : err.loss) / ce +
                                 lambda_a * l_area / ca +
                                 cfg.lambda_c * l_conn / cc;
        if (!std::isfinite(objective)) {
            throw std::runtime_error("mask fit: non-finite loss at epoch " +
                                     std::to_string(epoch));
        }
        result.loss_history.push_back({err.loss, l_area, l_conn});

        const Matrix g_area = area_gradient(m, cfg.area);
        const Matrix g_conn = connectedness_gradient(m);
        for (std::size_t k = 0; k < n; ++k) {
            const double g = err.grad[k] / ce + lambda_a * g_area[k] / ca +
                             cfg.lambda_c * g_conn[k] / cc;
            step[k] = cfg.learning_rate * g + cfg.momentum * step[k];
            m[k] = std::clamp(m[k] - step[k], 0.0, 1.0);
        }
    }

    const Matrix m_err = deleting ? complement(m) : m;
    result.final_error =
        error_term(model, op, x, m_err, cfg.loss_kind, y0, false).loss;
    result.mask = std::move(m);
    return result;
}

void check_area_grid(const std::vector<double>& grid) {
    if (grid.empty()) {
        throw std::invalid_argument("area grid must be nonempty");
    }
    double prev = 0.0;
    for (double a : grid) {
        if (!(a > 0.0) || a > 1.0) {
            throw std::invalid_argument("area grid values must lie in (0,1]");
        }
        if (a <= prev) {
            throw std::invalid_argument("area grid must be strictly ascending");
        }
        prev = a;
    }
}

const char* mode_name(MaskMode mode) {
    return mode == MaskMode::preserve ? "preserve" : "delete";
}

const char* loss_name(LossKind kind) {
    return kind == LossKind::regression ? "regression" : "classification";
}

}  // namespace

double error_loss_regression(const DifferentiableModel& model,
                             const PerturbationOperator& op, const Matrix& x,
                             const Matrix& m) {
    check_loss_kind(model, LossKind::regression);
    const Matrix y0 = model.forward(x);
    return error_term(model, op, x, m, LossKind::regression, y0, false).loss;
}

double error_loss_classification(const DifferentiableModel& model,
                                 const PerturbationOperator& op,
                                 const Matrix& x, const Matrix& m) {
    check_loss_kind(model, LossKind::classification);
    const Matrix y0 = model.forward(x);
    return error_term(model, op, x, m, LossKind::classification, y0, false)
        .loss;
}

double area_loss(const Matrix& m, double a) {
    if (a < 0.0 || a > 1.0) {
        throw std::invalid_argument("area_loss: a must lie in [0,1]");
    }
    std::vector<double> sorted = m.values();
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const std::size_t k = ones_count(n, a);
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double target = r >= n - k ? 1.0 : 0.0;
        const double diff = sorted[r] - target;
        loss += diff * diff;
    }
    return loss;
}

double connectedness_loss(const Matrix& m) {
    double loss = 0.0;
    for (std::size_t i = 0; i < m.cols(); ++i) {
        for (std::size_t t = 0; t + 1 < m.rows(); ++t) {
            loss += std::abs(m(t + 1, i) - m(t, i));
        }
    }
    return loss;
}

Matrix total_gradient(const DifferentiableModel& model,
                      const PerturbationOperator& op, const Matrix& x,
                      const Matrix& m, const MaskFitConfig& cfg) {
    check_fit_config(cfg);
    check_loss_kind(model, cfg.loss_kind);
    const Matrix y0 = model.forward(x);
    const bool deleting = cfg.mode == MaskMode::deletion;
    const Matrix m_err = deleting ? complement(m) : m;
    const ErrorEval err =
        error_term(model, op, x, m_err, cfg.loss_kind, y0, true);
    const Matrix g_area = area_gradient(m, cfg.area);
    const Matrix g_conn = connectedness_gradient(m);
    Matrix grad(m.rows(), m.cols(), 0.0);
    for (std::size_t k = 0; k < grad.size(); ++k) {
        grad[k] = err.grad[k] + cfg.lambda_0 * g_area[k] +
                  cfg.lambda_c * g_conn[k];
    }
    return grad;
}

double lambda_schedule(double lambda_0, double dilation,
                       std::size_t total_epochs, std::size_t epoch) {
    if (!(lambda_0 > 0.0)) {
        throw std::invalid_argument("lambda_schedule: lambda_0 must be positive");
    }
    if (dilation < 1.0) {
        throw std::invalid_argument("lambda_schedule: dilation must be >= 1");
    }
    if (total_epochs == 0) return lambda_0;
    return lambda_0 * std::exp(static_cast<double>(epoch) *
                               std::log(dilation) /
                               static_cast<double>(total_epochs));
}

FitResult fit_mask(const DifferentiableModel& model,
                   const PerturbationOperator& op, const Matrix& x,
                   const MaskFitConfig& cfg) {
    return run_fit(model, op, x, cfg);
}

FitResult fit_extremal_mask(const DifferentiableModel& model,
                            const PerturbationOperator& op, const Matrix& x,
                            const MaskFitConfig& base,
                            const ExtremalConfig& ext) {
    check_area_grid(ext.area_grid);
    if (!(ext.epsilon > 0.0)) {
        throw std::invalid_argument("extremal search: epsilon must be positive");
    }
    FitResult last;
    for (double a : ext.area_grid) {
        MaskFitConfig cfg = base;
        cfg.area = a;
        last = run_fit(model, op, x, cfg);
        if (last.final_error < ext.epsilon) {
            last.converged = true;
            return last;
        }
    }
    last.converged = false;
    return last;
}

FitResult fit_lowest_error_mask(const DifferentiableModel& model,
                                const PerturbationOperator& op,
                                const Matrix& x, const MaskFitConfig& base,
                                const std::vector<double>& area_grid) {
    check_area_grid(area_grid);
    FitResult best;
    bool have_best = false;
    for (double a : area_grid) {
        MaskFitConfig cfg = base;
        cfg.area = a;
        FitResult candidate = run_fit(model, op, x, cfg);
        if (!have_best || candidate.final_error < best.final_error) {
            best = std::move(candidate);
            have_best = true;
        }
    }
    return best;
}

FitResult fit_mask_deletion(const DifferentiableModel& model,
                            const PerturbationOperator& op, const Matrix& x,
                            const MaskFitConfig& cfg) {
    if (cfg.mode != MaskMode::deletion) {
        throw std::invalid_argument(
            "fit_mask_deletion: config mode must be deletion");
    }
    return run_fit(model, op, x, cfg);
}

std::string fit_result_to_json(const FitResult& result) {
    json j;
    j["format_version"] = 1;
    j["area"] = result.area;
    j["final_error"] = result.final_error;
    j["converged"] = result.converged;
    j["config"] = {{"area", result.config.area},
                   {"learning_rate", result.config.learning_rate},
                   {"momentum", result.config.momentum},
                   {"lambda_0", result.config.lambda_0},
                   {"dilation", result.config.dilation},
                   {"lambda_c", result.config.lambda_c},
                   {"epochs", result.config.epochs},
                   {"mode", mode_name(result.config.mode)},
                   {"loss_kind", loss_name(result.config.loss_kind)}};
    json mask = json::array();
    for (std::size_t t = 0; t < result.mask.rows(); ++t) {
        json row = json::array();
        for (std::size_t i = 0; i < result.mask.cols(); ++i) {
            row.push_back(result.mask(t, i));
        }
        mask.push_back(std::move(row));
    }
    j["mask"] = std::move(mask);
    json history = json::array();
    for (const EpochLosses& e : result.loss_history) {
        history.push_back({e.error, e.area, e.connectedness});
    }
    j["loss_history"] = std::move(history);
    return j.dump(2);
}

void save_fit_result(const std::string& path, const FitResult& result) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    out << fit_result_to_json(result) << '\n';
}

}  // namespace dynamask
