#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dynamask/matrix.hpp"
#include "dynamask/models.hpp"
#include "dynamask/perturbations.hpp"

namespace dynamask {

/// Whether the fitted mask should preserve the prediction (error measures the
/// drift caused by masking everything else) or delete it (error measures the
/// shift achieved by masking the selected cells themselves).
enum class MaskMode { preserve, deletion };

/// Which error term couples the model to the mask.
enum class LossKind { regression, classification };

struct MaskFitConfig {
    double area = 0.1;           // fraction of cells the mask should keep
    double learning_rate = 1.0;  // eta
    double momentum = 1.0;       // alpha
    double lambda_0 = 1.0;       // initial size-regulator weight
    double dilation = 1000.0;    // factor the regulator grows by overall
    double lambda_c = 0.0;       // time-variation penalty weight
    std::size_t epochs = 1000;
    MaskMode mode = MaskMode::preserve;
    LossKind loss_kind = LossKind::regression;
};

/// Search settings for the smallest-area mask that still keeps the error
/// below epsilon.
struct ExtremalConfig {
    std::vector<double> area_grid;  // strictly ascending, entries in (0, 1]
    double epsilon = 0.0;           // error threshold, must be positive
};

struct EpochLosses {
    double error = 0.0;
    double area = 0.0;
    double connectedness = 0.0;
};

struct FitResult {
    Matrix mask;
    double final_error = 0.0;  // error term of the final mask
    std::vector<EpochLosses> loss_history;  // one raw-sum triple per epoch
    double area = 0.0;                      // area the mask was fitted for
    bool converged = true;  // extremal search: error threshold reached
    MaskFitConfig config;   // echo of the settings that produced the mask
};

/// Sum over outputs of the squared difference between the model's prediction
/// on the perturbed input and on the untouched input.
double error_loss_regression(const DifferentiableModel& model,
                             const PerturbationOperator& op, const Matrix& x,
                             const Matrix& m);

/// Cross-entropy between the model's prediction on the untouched input
/// (target) and on the perturbed input (estimate), summed over predicted
/// times. The binary head's scalar p expands to the class pair (p, 1-p);
/// probabilities are floored at 1e-8 inside each log.
double error_loss_classification(const DifferentiableModel& model,
                                 const PerturbationOperator& op,
                                 const Matrix& x, const Matrix& m);

/// Squared distance between the ascending-sorted mask entries and the step
/// vector r_a holding round(a*n) ones after n - round(a*n) zeros.
double area_loss(const Matrix& m, double a);

/// Total variation in time: sum over features of |m(t+1,i) - m(t,i)|.
/// Zero for a single-row mask.
double connectedness_loss(const Matrix& m);

/// Gradient of error + lambda_0 * area + lambda_c * connectedness with
/// respect to the mask, with cfg.lambda_0 acting as the current area weight.
/// In deletion mode the error term is -error(1-M), per the deletion
/// objective.
Matrix total_gradient(const DifferentiableModel& model,
                      const PerturbationOperator& op, const Matrix& x,
                      const Matrix& m, const MaskFitConfig& cfg);

/// Area-regulator weight at a given epoch: lambda_0 * exp(epoch * log(dilation)
/// / total_epochs). Grows from lambda_0 to dilation * lambda_0.
double lambda_schedule(double lambda_0, double dilation,
                       std::size_t total_epochs, std::size_t epoch);

/// Momentum gradient descent on the masked-prediction objective. The mask
/// starts at 0.5 everywhere and is clamped to [0,1] after every step; the
/// area weight follows lambda_schedule. Deterministic. Throws std::runtime_error
/// naming the epoch if the loss turns non-finite.
FitResult fit_mask(const DifferentiableModel& model,
                   const PerturbationOperator& op, const Matrix& x,
                   const MaskFitConfig& cfg);

/// Fits one mask per grid area, ascending, and returns the first whose final
/// error drops below ext.epsilon. If none does, returns the largest-area
/// mask with converged = false.
FitResult fit_extremal_mask(const DifferentiableModel& model,
                            const PerturbationOperator& op, const Matrix& x,
                            const MaskFitConfig& base, const ExtremalConfig& ext);

/// Fits one mask per grid area and keeps the one with the lowest final
/// error; ties go to the smaller area.
FitResult fit_lowest_error_mask(const DifferentiableModel& model,
                                const PerturbationOperator& op, const Matrix& x,
                                const MaskFitConfig& base,
                                const std::vector<double>& area_grid);

/// fit_mask specialized to the deletion objective; cfg.mode must be
/// deletion. final_error reports the error term evaluated at 1 - M.
FitResult fit_mask_deletion(const DifferentiableModel& model,
                            const PerturbationOperator& op, const Matrix& x,
                            const MaskFitConfig& cfg);

/// JSON form of a fit result: mask as nested arrays, config echo, raw loss
/// history, convergence flag.
std::string fit_result_to_json(const FitResult& result);

/// Writes fit_result_to_json to a file.
void save_fit_result(const std::string& path, const FitResult& result);

}  // namespace dynamask
