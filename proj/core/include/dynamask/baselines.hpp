#pragma once

#include <cstddef>
#include <vector>

#include "dynamask/matrix.hpp"
#include "dynamask/models.hpp"
#include "dynamask/rng.hpp"

namespace dynamask {

/// Reference value an attribution method substitutes for a hidden input.
enum class BaselineKind { zero, feature_mean };

struct AttributionConfig {
    std::size_t ig_steps = 50;
    BaselineKind ig_baseline = BaselineKind::zero;
    std::size_t svs_samples = 25;
    BaselineKind svs_baseline = BaselineKind::feature_mean;
    BaselineKind occlusion_baseline = BaselineKind::zero;
    std::size_t afo_draws = 10;
    /// Stream for the stochastic methods (AFO, permutation, SVS); the
    /// deterministic ones ignore it.
    RngStream* rng = nullptr;
};

/// The baseline matrix the config picks for x: all zeros, or each feature's
/// time average held constant.
Matrix baseline_matrix(const Matrix& x, BaselineKind kind);

/// score(t,i) = L1 distance between the model outputs before and after
/// setting x(t,i) to its baseline value. One forward pass per cell.
Matrix feature_occlusion(const DifferentiableModel& model, const Matrix& x,
                         const AttributionConfig& cfg);

/// Occlusion with replacement values drawn from the feature's empirical
/// distribution over the reference set, averaged over cfg.afo_draws draws.
Matrix augmented_feature_occlusion(const DifferentiableModel& model,
                                   const Matrix& x,
                                   const std::vector<Matrix>& reference_set,
                                   const AttributionConfig& cfg);

/// For every cell, one shared random permutation redistributes that cell's
/// values across the batch; each member scores the L1 shift it experienced.
std::vector<Matrix> feature_permutation(const DifferentiableModel& model,
                                        const std::vector<Matrix>& batch,
                                        const AttributionConfig& cfg);

/// Path attribution of g = sum of outputs along the straight line from the
/// baseline to x, right-endpoint rule with cfg.ig_steps points:
/// (x - b) * mean_k dg/dx at b + (k/S)(x - b). Signed.
Matrix integrated_gradients_signed(const DifferentiableModel& model,
                                   const Matrix& x,
                                   const AttributionConfig& cfg);

/// Absolute value of integrated_gradients_signed, for ranking.
Matrix integrated_gradients(const DifferentiableModel& model, const Matrix& x,
                            const AttributionConfig& cfg);

/// Mean marginal contribution of revealing each cell (baseline -> true
/// value) to g = sum of outputs, over cfg.svs_samples random orders of all
/// T*d cells; absolute value for ranking.
Matrix shapley_value_sampling(const DifferentiableModel& model,
                              const Matrix& x, const AttributionConfig& cfg);

}  // namespace dynamask
