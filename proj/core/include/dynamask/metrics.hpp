#pragma once

#include <cstddef>
#include <vector>

#include "dynamask/matrix.hpp"
#include "dynamask/models.hpp"
#include "dynamask/target.hpp"

namespace dynamask {

/// Detection thresholds for the precision/recall areas: strictly ascending,
/// strictly inside (0,1).
struct ThresholdGrid {
    std::vector<double> thresholds;

    /// The standard grid {0.01, 0.02, ..., 0.99}.
    static ThresholdGrid default_grid();
};

/// Information the mask holds about the cells in a: -sum ln(1 - m) over a,
/// with entries capped at 1 - 1e-6 so the log stays finite.
double mask_information(const Matrix& m, const SaliencyTarget& a);

/// Shannon-style uncertainty of the mask restricted to a:
/// -sum [m ln m + (1-m) ln(1-m)], with 0 ln 0 = 0.
double mask_entropy(const Matrix& m, const SaliencyTarget& a);

/// mask_information(m, a) divided by the information of the full index set.
/// Throws std::domain_error when the mask carries no information at all.
double normalized_information(const Matrix& m, const SaliencyTarget& a);

/// mask_entropy(m, a) divided by the entropy of the full index set.
/// Throws std::domain_error for binary masks (zero total entropy).
double normalized_entropy(const Matrix& m, const SaliencyTarget& a);

/// Min-max normalization of an arbitrary score matrix into a mask:
/// (r - min) / (max - min). A constant matrix maps to all 0.5 since it
/// carries no ordering information.
Matrix scores_to_mask(const Matrix& scores);

struct AupAur {
    double aup = 0.0;
    double aur = 0.0;
};

/// Areas under the precision and recall curves over the threshold grid,
/// where threshold tau selects the cells with m >= tau. Trapezoidal
/// integration, normalized by the integration range; thresholds selecting
/// nothing are excluded from the precision integral and its range.
AupAur aup_aur(const Matrix& m, const SaliencyTarget& target,
               const ThresholdGrid& grid);

struct RankingAreas {
    double auroc = 0.0;
    double auprc = 0.0;
};

/// Treats mask entries as saliency-ranking scores of the target cells.
/// AUROC uses midranks for ties; AUPRC is average precision over descending
/// tie groups. The target must be neither empty nor the full grid.
RankingAreas auroc_auprc(const Matrix& m, const SaliencyTarget& target);

/// Replaces the round(fraction * T * d) highest-mask cells (ties broken by
/// index order) with their feature's full-series time average.
Matrix replace_top_fraction_by_time_average(const Matrix& x, const Matrix& m,
                                            double fraction);

struct PredictionShift {
    double cross_entropy = 0.0;
    bool flipped = false;
};

/// Log-loss of the perturbed prediction against the class called on the
/// original input (class boundary 0.5), and whether that call flipped. The
/// model must emit a single probability.
PredictionShift prediction_shift(const DifferentiableModel& model,
                                 const Matrix& x, const Matrix& x_tilde);

/// Fraction of cells where the two masks agree after binarizing at 0.5.
double pairwise_mask_accuracy(const Matrix& m1, const Matrix& m2);

/// Fraction of cells the mask marks salient (entries above 0.5).
double salient_fraction(const Matrix& m);

}  // namespace dynamask
