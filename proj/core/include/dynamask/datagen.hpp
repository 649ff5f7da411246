#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dynamask/matrix.hpp"
#include "dynamask/rng.hpp"
#include "dynamask/target.hpp"

namespace dynamask {

/// Numerically stable standard logistic function.
double logistic(double x);

/// T x d matrix whose columns are independent order-3 autoregressions
///   x_t = 0.25 x_{t-1} + 0.1 x_{t-2} + 0.05 x_{t-3} + e_t,  e_t ~ N(0, 1),
/// with zero initial history. Columns are generated one after the other,
/// each consuming T fresh normals.
Matrix generate_arma(RngStream& rng, std::size_t T, std::size_t d);

/// Salient set for the rare-feature task: n_feat features drawn uniformly
/// without replacement, crossed with the fixed 25-step time block
/// {13, ..., 37} (1-based). Requires n_feat <= d and T >= 37.
SaliencyTarget make_rare_feature_target(RngStream& rng, std::size_t T,
                                        std::size_t d, std::size_t n_feat);

/// Salient set for the rare-time task: a block of n_time consecutive steps
/// starting at t* ~ U{1, ..., T - n_time + 1}, crossed with the fixed
/// 25-feature block {13, ..., 37} (1-based). Requires n_time <= T - 4 and
/// d >= 37.
SaliencyTarget make_rare_time_target(RngStream& rng, std::size_t T,
                                     std::size_t d, std::size_t n_time);

/// One sequence from the 2-state hidden Markov generator: 3 correlated
/// features per step, a per-step Bernoulli label whose parameter is the
/// logistic of feature 2 (state 0) or feature 3 (state 1), and the salient
/// set {(t, 2 + s_t)} (1-based feature indices).
struct HmmSeries {
    Matrix inputs;                  // T x 3
    std::vector<int> states;        // 0 or 1
    std::vector<int> labels;        // 0 or 1
    std::vector<double> bernoulli;  // label law parameter p_t
    SaliencyTarget target;
    std::uint64_t stream_seed = 0;
};

struct HmmDataset {
    std::vector<HmmSeries> series;
    std::size_t T = 0;

    std::size_t size() const { return series.size(); }
};

/// n_series independent sequences; series k is drawn from rng.substream(k).
HmmDataset generate_hmm_dataset(RngStream& rng, std::size_t n_series,
                                std::size_t T);

/// One white-box instance: an input matrix plus the salient set its
/// ground-truth regressor is built from.
struct WhiteboxInstance {
    Matrix inputs;
    SaliencyTarget target;
    std::uint64_t stream_seed = 0;
};

struct WhiteboxDataset {
    std::vector<WhiteboxInstance> instances;
};

/// Descriptive block stored as meta.json next to every serialized dataset.
struct DatasetMeta {
    std::string experiment;
    std::uint64_t seed = 0;
    std::string scale = "desk";
    std::size_t n_train = 0;  // 0 when the dataset has no train/test split
};

/// Directory layout: inputs/series_<k>.csv, targets.json,
/// targets/target_<k>.json, meta.json. k is 1-based.
void save_whitebox_dataset(const std::string& dir, const WhiteboxDataset& ds,
                           const DatasetMeta& meta);
WhiteboxDataset load_whitebox_dataset(const std::string& dir);

/// Directory layout: inputs/series_<k>.csv, labels.csv, states.csv,
/// targets.json, meta.json. labels/states use long-form rows series,t,value.
void save_hmm_dataset(const std::string& dir, const HmmDataset& ds,
                      const DatasetMeta& meta);
HmmDataset load_hmm_dataset(const std::string& dir);

DatasetMeta load_dataset_meta(const std::string& dir);

}  // namespace dynamask
