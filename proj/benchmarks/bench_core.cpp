#include <benchmark/benchmark.h>

#include "dynamask/datagen.hpp"
#include "dynamask/masks.hpp"
#include "dynamask/matrix.hpp"
#include "dynamask/models.hpp"
#include "dynamask/perturbations.hpp"
#include "dynamask/rng.hpp"

using namespace dynamask;

namespace {

Matrix random_matrix(RngStream& rng, std::size_t T, std::size_t d) {
    Matrix m(T, d);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = rng.normal();
    return m;
}

Matrix random_mask(RngStream& rng, std::size_t T, std::size_t d) {
    Matrix m(T, d);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = rng.uniform01();
    return m;
}

// The rare-experiment hot path: a full-axis blur on a 50x50 series.
void BM_GaussianBlurApply(benchmark::State& state) {
    RngStream rng(1);
    const Matrix x = random_matrix(rng, 50, 50);
    const Matrix m = random_mask(rng, 50, 50);
    const auto op = PerturbationOperator::gaussian_blur(1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(op.apply(x, m));
    }
}
BENCHMARK(BM_GaussianBlurApply);

void BM_GaussianBlurWithDerivative(benchmark::State& state) {
    RngStream rng(2);
    const Matrix x = random_matrix(rng, 50, 50);
    const Matrix m = random_mask(rng, 50, 50);
    const auto op = PerturbationOperator::gaussian_blur(1.0);
    Matrix out, deriv;
    for (auto _ : state) {
        op.apply_with_derivative(x, m, out, deriv);
        benchmark::DoNotOptimize(out);
        benchmark::DoNotOptimize(deriv);
    }
}
BENCHMARK(BM_GaussianBlurWithDerivative);

// The state-experiment operator at its protocol shape.
void BM_FadeMovingAverageApply(benchmark::State& state) {
    RngStream rng(3);
    const Matrix x = random_matrix(rng, 100, 3);
    const Matrix m = random_mask(rng, 100, 3);
    const auto op = PerturbationOperator::fade_moving_average(3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(op.apply(x, m));
    }
}
BENCHMARK(BM_FadeMovingAverageApply);

void BM_GruForward(benchmark::State& state) {
    RngStream init(4);
    const GruClassifier gru(3, 50, init);
    RngStream rng(5);
    const Matrix x = random_matrix(rng, 100, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gru.forward(x));
    }
}
BENCHMARK(BM_GruForward);

void BM_GruInputVjp(benchmark::State& state) {
    RngStream init(6);
    const GruClassifier gru(3, 50, init);
    RngStream rng(7);
    const Matrix x = random_matrix(rng, 100, 3);
    Matrix upstream(100, 1);
    for (std::size_t t = 0; t < 100; ++t) upstream(t, 0) = rng.normal();
    for (auto _ : state) {
        benchmark::DoNotOptimize(gru.input_vjp(x, upstream));
    }
}
BENCHMARK(BM_GruInputVjp);

// One epoch of the mask objective gradient on the white-box protocol shape;
// a full rare-experiment fit is 1000 of these per grid area.
void BM_WhiteBoxTotalGradient(benchmark::State& state) {
    RngStream rng(8);
    RngStream target_rng(9);
    const SaliencyTarget target = make_rare_feature_target(target_rng, 50, 50, 5);
    const WhiteBoxRegressor model(target);
    const Matrix x = random_matrix(rng, 50, 50);
    const Matrix m = random_mask(rng, 50, 50);
    MaskFitConfig cfg;
    cfg.area = 0.05;
    const auto op = PerturbationOperator::gaussian_blur(1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(total_gradient(model, op, x, m, cfg));
    }
}
BENCHMARK(BM_WhiteBoxTotalGradient);

void BM_FitMaskShort(benchmark::State& state) {
    RngStream rng(10);
    RngStream target_rng(11);
    const SaliencyTarget target = make_rare_feature_target(target_rng, 50, 50, 5);
    const WhiteBoxRegressor model(target);
    const Matrix x = random_matrix(rng, 50, 50);
    MaskFitConfig cfg;
    cfg.area = 0.05;
    cfg.epochs = 100;
    const auto op = PerturbationOperator::gaussian_blur(1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_mask(model, op, x, cfg));
    }
}
BENCHMARK(BM_FitMaskShort);

}  // namespace

BENCHMARK_MAIN();
