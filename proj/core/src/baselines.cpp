#include "dynamask/baselines.hpp"

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dynamask {

namespace {

RngStream& require_rng(const AttributionConfig& cfg, const char* who) {
    if (cfg.rng == nullptr) {
        throw std::invalid_argument(std::string(who) +
                                    ": config must carry an rng stream");
    }
    return *cfg.rng;
}

void require_count(std::size_t value, const char* what) {
    if (value == 0) {
        throw std::invalid_argument(std::string(what) + " must be at least 1");
    }
}

double l1_difference(const Matrix& a, const Matrix& b) {
    double total = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        total += std::abs(a[k] - b[k]);
    }
    return total;
}

double output_sum(const Matrix& y) {
    return std::accumulate(y.values().begin(), y.values().end(), 0.0);
}

}  // namespace

Matrix baseline_matrix(const Matrix& x, BaselineKind kind) {
    Matrix b(x.rows(), x.cols(), 0.0);
    if (kind == BaselineKind::zero) return b;
    for (std::size_t i = 0; i < x.cols(); ++i) {
        double mean = 0.0;
        for (std::size_t t = 0; t < x.rows(); ++t) mean += x(t, i);
        mean /= static_cast<double>(x.rows());
        for (std::size_t t = 0; t < x.rows(); ++t) b(t, i) = mean;
    }
    return b;
}

Matrix feature_occlusion(const DifferentiableModel& model, const Matrix& x,
                         const AttributionConfig& cfg) {
    const Matrix y0 = model.forward(x);
    const Matrix base = baseline_matrix(x, cfg.occlusion_baseline);
    Matrix scores(x.rows(), x.cols(), 0.0);
    Matrix work = x;
    for (std::size_t t = 0; t < x.rows(); ++t) {
        for (std::size_t i = 0; i < x.cols(); ++i) {
            const double saved = work(t, i);
            work(t, i) = base(t, i);
            scores(t, i) = l1_difference(model.forward(work), y0);
            work(t, i) = saved;
        }
    }
    return scores;
}

Matrix augmented_feature_occlusion(const DifferentiableModel& model,
                                   const Matrix& x,
                                   const std::vector<Matrix>& reference_set,
                                   const AttributionConfig& cfg) {
    if (reference_set.empty()) {
        throw std::invalid_argument(
            "augmented_feature_occlusion: reference set must be nonempty");
    }
    for (const Matrix& ref : reference_set) {
        if (ref.cols() != x.cols()) {
            throw std::invalid_argument(
                "augmented_feature_occlusion: reference feature count differs");
        }
    }
    require_count(cfg.afo_draws, "afo_draws");
    RngStream& rng = require_rng(cfg, "augmented_feature_occlusion");

    // Pool each feature's observed values across the whole reference set.
    std::vector<std::vector<double>> pools(x.cols());
    for (const Matrix& ref : reference_set) {
        for (std::size_t t = 0; t < ref.rows(); ++t) {
            for (std::size_t i = 0; i < ref.cols(); ++i) {
                pools[i].push_back(ref(t, i));
            }
        }
    }

    const Matrix y0 = model.forward(x);
    Matrix scores(x.rows(), x.cols(), 0.0);
    Matrix work = x;
    for (std::size_t t = 0; t < x.rows(); ++t) {
        for (std::size_t i = 0; i < x.cols(); ++i) {
            const double saved = work(t, i);
            double total = 0.0;
            for (std::size_t k = 0; k < cfg.afo_draws; ++k) {
                work(t, i) = pools[i][rng.uniform_below(pools[i].size())];
                total += l1_difference(model.forward(work), y0);
            }
            work(t, i) = saved;
            scores(t, i) = total / static_cast<double>(cfg.afo_draws);
        }
    }
    return scores;
}

std::vector<Matrix> feature_permutation(const DifferentiableModel& model,
                                        const std::vector<Matrix>& batch,
                                        const AttributionConfig& cfg) {
    if (batch.size() < 2) {
        throw std::invalid_argument(
            "feature_permutation: batch must hold at least two series");
    }
    for (const Matrix& member : batch) {
        if (!member.same_shape(batch.front())) {
            throw std::invalid_argument(
                "feature_permutation: batch shapes differ");
        }
    }
    RngStream& rng = require_rng(cfg, "feature_permutation");

    const std::size_t B = batch.size();
    std::vector<Matrix> outputs;
    outputs.reserve(B);
    for (const Matrix& member : batch) outputs.push_back(model.forward(member));
    std::vector<Matrix> scores(B,
                               Matrix(batch[0].rows(), batch[0].cols(), 0.0));

    std::vector<std::size_t> perm(B);
    for (std::size_t t = 0; t < batch[0].rows(); ++t) {
        for (std::size_t i = 0; i < batch[0].cols(); ++i) {
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            rng.shuffle(perm);
            for (std::size_t b = 0; b < B; ++b) {
                Matrix work = batch[b];
                work(t, i) = batch[perm[b]](t, i);
                scores[b](t, i) = l1_difference(model.forward(work), outputs[b]);
            }
        }
    }
    return scores;
}

Matrix integrated_gradients_signed(const DifferentiableModel& model,
                                   const Matrix& x,
                                   const AttributionConfig& cfg) {
    require_count(cfg.ig_steps, "ig_steps");
    const Matrix base = baseline_matrix(x, cfg.ig_baseline);
    const Matrix ones_upstream = [&] {
        const Matrix probe = model.forward(x);
        return Matrix(probe.rows(), probe.cols(), 1.0);
    }();

    Matrix accumulated(x.rows(), x.cols(), 0.0);
    Matrix point(x.rows(), x.cols(), 0.0);
    const double steps = static_cast<double>(cfg.ig_steps);
    for (std::size_t k = 1; k <= cfg.ig_steps; ++k) {
        const double alpha = static_cast<double>(k) / steps;
        for (std::size_t j = 0; j < point.size(); ++j) {
            point[j] = base[j] + alpha * (x[j] - base[j]);
        }
        const Matrix grad = model.input_vjp(point, ones_upstream);
        for (std::size_t j = 0; j < accumulated.size(); ++j) {
            accumulated[j] += grad[j];
        }
    }
    for (std::size_t j = 0; j < accumulated.size(); ++j) {
        accumulated[j] *= (x[j] - base[j]) / steps;
    }
    return accumulated;
}

Matrix integrated_gradients(const DifferentiableModel& model, const Matrix& x,
                            const AttributionConfig& cfg) {
    Matrix scores = integrated_gradients_signed(model, x, cfg);
    for (std::size_t j = 0; j < scores.size(); ++j) {
        scores[j] = std::abs(scores[j]);
    }
    return scores;
}

Matrix shapley_value_sampling(const DifferentiableModel& model,
                              const Matrix& x, const AttributionConfig& cfg) {
    require_count(cfg.svs_samples, "svs_samples");
    RngStream& rng = require_rng(cfg, "shapley_value_sampling");
    const Matrix base = baseline_matrix(x, cfg.svs_baseline);
    const std::size_t n = x.size();

    Matrix totals(x.rows(), x.cols(), 0.0);
    std::vector<std::size_t> order(n);
    const double g_base = output_sum(model.forward(base));
    for (std::size_t s = 0; s < cfg.svs_samples; ++s) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        Matrix work = base;
        double g_prev = g_base;
        for (std::size_t flat : order) {
            work[flat] = x[flat];
            const double g_now = output_sum(model.forward(work));
            totals[flat] += g_now - g_prev;
            g_prev = g_now;
        }
    }
    for (std::size_t j = 0; j < totals.size(); ++j) {
        totals[j] =
            std::abs(totals[j] / static_cast<double>(cfg.svs_samples));
    }
    return totals;
}

}  // namespace dynamask
