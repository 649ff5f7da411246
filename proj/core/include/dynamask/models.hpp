#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dynamask/datagen.hpp"
#include "dynamask/matrix.hpp"
#include "dynamask/rng.hpp"
#include "dynamask/target.hpp"

namespace dynamask {

enum class OutputKind { regression, probability };

/// Contract for a differentiable sequence model f mapping a T x d_X input
/// series to a (T - t0) x d_Y prediction, where t0 = first_predicted_time(T).
/// Models are immutable once constructed (or trained), so const calls on
/// distinct inputs may run concurrently.
class DifferentiableModel {
public:
    virtual ~DifferentiableModel() = default;

    /// Deterministic inference pass.
    virtual Matrix forward(const Matrix& x) const = 0;

    /// Gradient of <upstream, forward(x)> with respect to x. upstream must
    /// have the shape of forward(x); the result has the shape of x.
    virtual Matrix input_vjp(const Matrix& x, const Matrix& upstream) const = 0;

    virtual OutputKind output_kind() const = 0;

    /// 0-based time index of the first output row, given the input length.
    /// Row r of forward(x) is the prediction for time first_predicted_time + r.
    virtual std::size_t first_predicted_time(std::size_t T) const { (void)T; return 0; }
};

/// Analytic regressor whose output depends on a known salient set A:
///   f(X)_t = sum over i in A_X of x_{t,i}^2   when t is in A_T, else 0.
/// Output shape T x 1.
class WhiteBoxRegressor : public DifferentiableModel {
public:
    explicit WhiteBoxRegressor(SaliencyTarget target);

    Matrix forward(const Matrix& x) const override;
    Matrix input_vjp(const Matrix& x, const Matrix& upstream) const override;
    OutputKind output_kind() const override { return OutputKind::regression; }

    const SaliencyTarget& target() const { return target_; }

private:
    SaliencyTarget target_;
};

/// Single-layer GRU with a per-time logistic head producing one probability
/// per step. Standard cell:
///   z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)
///   r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)
///   n_t = tanh(Wn x_t + r_t * (Un h_{t-1}) + bn)
///   h_t = (1 - z_t) * n_t + z_t * h_{t-1},   h_0 = 0
///   p_t = sigmoid(w . h_t + b)
/// Parameter count: 3 (h d + h^2 + h) + h + 1.
class GruClassifier : public DifferentiableModel {
public:
    /// Fresh model with every parameter drawn uniformly from
    /// [-1/sqrt(h), 1/sqrt(h)], in the fixed order
    /// Wz, Uz, bz, Wr, Ur, br, Wn, Un, bn, w, b.
    GruClassifier(std::size_t input_size, std::size_t hidden_size,
                  RngStream& rng);

    Matrix forward(const Matrix& x) const override;  // T x 1, entries in (0,1)
    Matrix input_vjp(const Matrix& x, const Matrix& upstream) const override;
    OutputKind output_kind() const override { return OutputKind::probability; }

    std::size_t input_size() const { return d_; }
    std::size_t hidden_size() const { return h_; }
    std::size_t parameter_count() const { return params_.size(); }
    const std::vector<double>& parameters() const { return params_; }
    std::vector<double>& parameters() { return params_; }

    /// Gradient of the mean per-time binary cross-entropy between forward(x)
    /// and the 0/1 labels, with respect to every parameter (same layout as
    /// parameters()). When loss_out is non-null it receives the loss value.
    std::vector<double> label_gradient(const Matrix& x,
                                       const std::vector<int>& labels,
                                       double* loss_out = nullptr) const;

    /// JSON document with base64-encoded little-endian doubles; bit-exact
    /// round trip.
    void save_weights(const std::string& path) const;
    static GruClassifier load_weights(const std::string& path);

private:
    GruClassifier() = default;
    void init_layout();

    struct StepCache;
    Matrix forward_impl(const Matrix& x, std::vector<StepCache>* caches) const;
    Matrix backward(const Matrix& x, const std::vector<StepCache>& caches,
                    const std::vector<double>& d_logit,
                    std::vector<double>* param_grad) const;

    std::size_t d_ = 0;
    std::size_t h_ = 0;
    std::vector<double> params_;
    // Offsets of the named blocks inside params_.
    std::size_t wz_ = 0, uz_ = 0, bz_ = 0, wr_ = 0, ur_ = 0, br_ = 0,
                wn_ = 0, un_ = 0, bn_ = 0, w_ = 0, b_ = 0;
};

/// Adapter exposing only the final prediction row of a per-time model, for
/// settings where a single end-of-series output is required. Holds a
/// reference; the wrapped model must outlive the view.
class FinalStepView : public DifferentiableModel {
public:
    explicit FinalStepView(const DifferentiableModel& inner) : inner_(inner) {}

    Matrix forward(const Matrix& x) const override;
    Matrix input_vjp(const Matrix& x, const Matrix& upstream) const override;
    OutputKind output_kind() const override { return inner_.output_kind(); }
    std::size_t first_predicted_time(std::size_t T) const override {
        return T - 1;
    }

private:
    const DifferentiableModel& inner_;
};

struct TrainConfig {
    double learning_rate = 0.001;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double weight_decay = 0.0;
    std::size_t epochs = 80;
    std::size_t batch_size = 100;
    std::size_t hidden_size = 50;
};

/// Standard Adam with bias correction; weight decay enters as an L2 term
/// added to the gradient.
class AdamOptimizer {
public:
    AdamOptimizer(std::size_t n, double learning_rate, double beta1,
                  double beta2, double epsilon, double weight_decay = 0.0);

    void step(std::vector<double>& params, const std::vector<double>& grad);
    std::size_t steps_taken() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_, wd_;
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
};

struct TrainResult {
    GruClassifier model;
    std::vector<double> epoch_loss;  // mean train cross-entropy per epoch
    double final_loss = 0.0;         // train cross-entropy after training
    double final_accuracy = 0.0;     // train per-time label accuracy
};

/// Trains a fresh GRU on every series of the dataset: mean per-time binary
/// cross-entropy, shuffled mini-batches, Adam. The rng seeds both the
/// initialization and the epoch shuffles, so equal seeds give equal models.
TrainResult train_gru(const HmmDataset& train, const TrainConfig& cfg,
                      RngStream& rng);

struct EvalResult {
    double cross_entropy = 0.0;  // mean over all series and time steps
    double accuracy = 0.0;       // fraction of correct thresholded labels
};

EvalResult evaluate_gru(const GruClassifier& model, const HmmDataset& data);

}  // namespace dynamask
