#include "dynamask/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dynamask {

namespace {

constexpr double kLogClamp = 1e-6;

void check_target_shape(const Matrix& m, const SaliencyTarget& a,
                        const char* who) {
    if (a.rows() != m.rows() || a.cols() != m.cols()) {
        throw std::out_of_range(std::string(who) +
                                ": target grid does not match the mask shape");
    }
}

double information_term(double m) {
    return -std::log(1.0 - std::min(m, 1.0 - kLogClamp));
}

double entropy_term(double m) {
    double s = 0.0;
    if (m > 0.0) s -= m * std::log(m);
    if (m < 1.0) s -= (1.0 - m) * std::log(1.0 - m);
    return s;
}

void check_threshold_grid(const ThresholdGrid& grid) {
    if (grid.thresholds.empty()) {
        throw std::invalid_argument("threshold grid must be nonempty");
    }
    double prev = 0.0;
    for (double tau : grid.thresholds) {
        if (!(tau > 0.0) || !(tau < 1.0)) {
            throw std::invalid_argument(
                "threshold grid values must lie strictly inside (0,1)");
        }
        if (tau <= prev) {
            throw std::invalid_argument("threshold grid must be ascending");
        }
        prev = tau;
    }
}

/// Trapezoid integral of f over taus, divided by the covered range. A single
/// point degenerates to its own value.
double range_average(const std::vector<double>& taus,
                     const std::vector<double>& f) {
    if (taus.size() == 1) return f[0];
    double integral = 0.0;
    for (std::size_t k = 1; k < taus.size(); ++k) {
        integral += (taus[k] - taus[k - 1]) * (f[k] + f[k - 1]) * 0.5;
    }
    return integral / (taus.back() - taus.front());
}

}  // namespace

ThresholdGrid ThresholdGrid::default_grid() {
    ThresholdGrid grid;
    grid.thresholds.reserve(99);
    for (int k = 1; k <= 99; ++k) {
        grid.thresholds.push_back(static_cast<double>(k) / 100.0);
    }
    return grid;
}

double mask_information(const Matrix& m, const SaliencyTarget& a) {
    check_target_shape(m, a, "mask_information");
    double total = 0.0;
    for (std::size_t t = 0; t < m.rows(); ++t) {
        for (std::size_t i = 0; i < m.cols(); ++i) {
            if (a.contains(t, i)) total += information_term(m(t, i));
        }
    }
    return total;
}

double mask_entropy(const Matrix& m, const SaliencyTarget& a) {
    check_target_shape(m, a, "mask_entropy");
    double total = 0.0;
    for (std::size_t t = 0; t < m.rows(); ++t) {
        for (std::size_t i = 0; i < m.cols(); ++i) {
            if (a.contains(t, i)) total += entropy_term(m(t, i));
        }
    }
    return total;
}

double normalized_information(const Matrix& m, const SaliencyTarget& a) {
    check_target_shape(m, a, "normalized_information");
    double numer = 0.0;
    double denom = 0.0;
    for (std::size_t t = 0; t < m.rows(); ++t) {
        for (std::size_t i = 0; i < m.cols(); ++i) {
            const double term = information_term(m(t, i));
            denom += term;
            if (a.contains(t, i)) numer += term;
        }
    }
    if (denom <= 0.0) {
        throw std::domain_error(
            "normalized_information: mask carries no information");
    }
    return numer / denom;
}

double normalized_entropy(const Matrix& m, const SaliencyTarget& a) {
    check_target_shape(m, a, "normalized_entropy");
    double numer = 0.0;
    double denom = 0.0;
    for (std::size_t t = 0; t < m.rows(); ++t) {
        for (std::size_t i = 0; i < m.cols(); ++i) {
            const double term = entropy_term(m(t, i));
            denom += term;
            if (a.contains(t, i)) numer += term;
        }
    }
    if (denom <= 0.0) {
        throw std::domain_error("normalized_entropy: binary mask has no entropy");
    }
    return numer / denom;
}

Matrix scores_to_mask(const Matrix& scores) {
    if (!scores.all_finite()) {
        throw std::invalid_argument("scores_to_mask: scores must be finite");
    }
    double lo = scores[0];
    double hi = scores[0];
    for (std::size_t k = 0; k < scores.size(); ++k) {
        lo = std::min(lo, scores[k]);
        hi = std::max(hi, scores[k]);
    }
    Matrix mask(scores.rows(), scores.cols(), 0.5);
    if (hi == lo) return mask;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        mask[k] = (scores[k] - lo) / (hi - lo);
    }
    return mask;
}

AupAur aup_aur(const Matrix& m, const SaliencyTarget& target,
               const ThresholdGrid& grid) {
    check_target_shape(m, target, "aup_aur");
    check_threshold_grid(grid);
    if (target.empty()) {
        throw std::invalid_argument("aup_aur: target must be nonempty");
    }
    const double salient = static_cast<double>(target.size());
    std::vector<double> precision_taus;
    std::vector<double> precisions;
    std::vector<double> recalls;
    recalls.reserve(grid.thresholds.size());
    for (double tau : grid.thresholds) {
        std::size_t selected = 0;
        std::size_t hits = 0;
        for (std::size_t t = 0; t < m.rows(); ++t) {
            for (std::size_t i = 0; i < m.cols(); ++i) {
                if (m(t, i) >= tau) {
                    ++selected;
                    if (target.contains(t, i)) ++hits;
                }
            }
        }
        recalls.push_back(static_cast<double>(hits) / salient);
        if (selected > 0) {
            precision_taus.push_back(tau);
            precisions.push_back(static_cast<double>(hits) /
                                 static_cast<double>(selected));
        }
    }
    if (precisions.empty()) {
        throw std::domain_error(
            "aup_aur: mask selects nothing at every threshold");
    }
    AupAur out;
    out.aup = range_average(precision_taus, precisions);
    out.aur = range_average(grid.thresholds, recalls);
    return out;
}

RankingAreas auroc_auprc(const Matrix& m, const SaliencyTarget& target) {
    check_target_shape(m, target, "auroc_auprc");
    const std::size_t n = m.size();
    const std::size_t pos = target.size();
    if (pos == 0 || pos == n) {
        throw std::invalid_argument(
            "auroc_auprc: target must be neither empty nor the full grid");
    }
    const std::size_t neg = n - pos;

    const std::vector<std::size_t> asc = argsort_ascending(m.values());
    // AUROC via midranks of the salient cells.
    double rank_sum = 0.0;
    std::size_t start = 0;
    while (start < n) {
        std::size_t stop = start;
        while (stop < n && m[asc[stop]] == m[asc[start]]) ++stop;
        const double midrank =
            0.5 * (static_cast<double>(start + 1) + static_cast<double>(stop));
        for (std::size_t r = start; r < stop; ++r) {
            const std::size_t flat = asc[r];
            if (target.contains(flat / m.cols(), flat % m.cols())) {
                rank_sum += midrank;
            }
        }
        start = stop;
    }
    const double p = static_cast<double>(pos);
    RankingAreas out;
    out.auroc = (rank_sum - p * (p + 1.0) / 2.0) /
                (p * static_cast<double>(neg));

    // Average precision over descending tie groups.
    const std::vector<std::size_t> desc = argsort_descending(m.values());
    double ap = 0.0;
    std::size_t tp = 0;
    std::size_t seen = 0;
    start = 0;
    while (start < n) {
        std::size_t stop = start;
        std::size_t group_tp = 0;
        while (stop < n && m[desc[stop]] == m[desc[start]]) {
            const std::size_t flat = desc[stop];
            if (target.contains(flat / m.cols(), flat % m.cols())) ++group_tp;
            ++stop;
        }
        const std::size_t prev_tp = tp;
        tp += group_tp;
        seen += stop - start;
        const double prec =
            static_cast<double>(tp) / static_cast<double>(seen);
        ap += prec * static_cast<double>(tp - prev_tp) / p;
        start = stop;
    }
    out.auprc = ap;
    return out;
}

Matrix replace_top_fraction_by_time_average(const Matrix& x, const Matrix& m,
                                            double fraction) {
    if (!x.same_shape(m)) {
        throw std::invalid_argument(
            "replace_top_fraction: input and mask shapes differ");
    }
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw std::invalid_argument(
            "replace_top_fraction: fraction must lie in (0,1]");
    }
    const std::size_t n = x.size();
    const std::size_t k = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(n)));
    std::vector<double> column_mean(x.cols(), 0.0);
    for (std::size_t t = 0; t < x.rows(); ++t) {
        for (std::size_t i = 0; i < x.cols(); ++i) {
            column_mean[i] += x(t, i);
        }
    }
    for (double& v : column_mean) v /= static_cast<double>(x.rows());

    Matrix out = x;
    const std::vector<std::size_t> order = argsort_descending(m.values());
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t flat = order[r];
        out[flat] = column_mean[flat % x.cols()];
    }
    return out;
}

PredictionShift prediction_shift(const DifferentiableModel& model,
                                 const Matrix& x, const Matrix& x_tilde) {
    if (model.output_kind() != OutputKind::probability) {
        throw std::invalid_argument(
            "prediction_shift: model must emit probabilities");
    }
    const Matrix y = model.forward(x);
    const Matrix y_tilde = model.forward(x_tilde);
    if (y.size() != 1 || y_tilde.size() != 1) {
        throw std::invalid_argument(
            "prediction_shift: model must emit a single probability");
    }
    const bool label = y[0] >= 0.5;
    const double p = y_tilde[0];
    PredictionShift out;
    out.cross_entropy = label ? -std::log(std::max(p, kLogClamp))
                              : -std::log(std::max(1.0 - p, kLogClamp));
    out.flipped = label != (p >= 0.5);
    return out;
}

double pairwise_mask_accuracy(const Matrix& m1, const Matrix& m2) {
    if (!m1.same_shape(m2)) {
        throw std::invalid_argument(
            "pairwise_mask_accuracy: mask shapes differ");
    }
    std::size_t agree = 0;
    for (std::size_t k = 0; k < m1.size(); ++k) {
        if ((m1[k] > 0.5) == (m2[k] > 0.5)) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(m1.size());
}

double salient_fraction(const Matrix& m) {
    std::size_t high = 0;
    for (std::size_t k = 0; k < m.size(); ++k) {
        if (m[k] > 0.5) ++high;
    }
    return static_cast<double>(high) / static_cast<double>(m.size());
}

}  // namespace dynamask
