#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynamask/baselines.hpp"
#include "dynamask/masks.hpp"
#include "dynamask/matrix.hpp"
#include "dynamask/models.hpp"
#include "dynamask/perturbations.hpp"

namespace dynamask::harness {

enum class ExperimentKind { rare_feature, rare_time, state, operator_agreement };

std::string experiment_name(ExperimentKind kind);
ExperimentKind experiment_from_name(const std::string& name);

/// Operator settings as they appear in experiment configs.
struct OperatorSpec {
    std::string kind = "gaussian-blur";
    double sigma_max = 1.0;
    std::size_t window = 2;

    PerturbationOperator build() const;
};

/// Attribution settings minus the rng handle (streams are derived per
/// instance from the dataset seed).
struct AttributionSpec {
    std::size_t ig_steps = 50;
    std::size_t svs_samples = 25;
    std::size_t afo_draws = 10;
    std::string ig_baseline = "zero";
    std::string svs_baseline = "feature-mean";
    std::string occlusion_baseline = "zero";

    AttributionConfig build(RngStream* rng) const;
};

/// Full description of one experiment run. Defaults depend on the experiment
/// and the scale; a config file and dotted-path overrides are merged on top.
struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::rare_feature;
    std::uint64_t seed = 42;
    std::string scale = "desk";
    std::string output_dir;  // empty: timestamped directory under cwd
    std::size_t jobs = 1;

    // Input geometry. Rare experiments use T x d white-box instances; the
    // state experiments use T x 3 generated sequences.
    std::size_t T = 50;
    std::size_t d = 50;
    std::size_t repetitions = 10;  // rare: instance count
    std::size_t n_feat = 5;        // rare-feature: |salient features|
    std::size_t n_time = 5;        // rare-time: |salient times|

    // State-experiment sizes.
    std::size_t n_train = 200;
    std::size_t n_test = 50;
    std::size_t n_explain = 20;
    std::size_t n_seeds = 5;

    OperatorSpec op;
    MaskFitConfig fit;
    std::vector<double> area_grid;
    double epsilon_factor = 0.9;   // extremal threshold as a fraction of
                                   // the all-ones mask's error
    bool use_extremal = false;     // false: keep the lowest-error grid mask
    AttributionSpec attribution;
    TrainConfig train;
    double shift_fraction = 0.1;  // top fraction replaced for the CE/ACC probe
    bool heatmaps = false;
};

/// Built-in defaults for an experiment at a given scale.
ExperimentConfig default_config(ExperimentKind kind, const std::string& scale);

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& doc);

/// Applies one "dotted.path=value" override onto a config document. Values
/// parse as JSON when possible and fall back to strings.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Runs fn(0..n-1) on up to `jobs` worker threads. jobs <= 1 degenerates to a
/// plain loop; exceptions propagate to the caller.
void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn);

/// One row of the per-repetition metric table. NaN marks metrics that are
/// undefined for the experiment (CE/ACC without a classifier).
struct MetricRecord {
    std::string method;
    std::uint64_t seed = 0;
    double aup = 0.0;
    double aur = 0.0;
    double auroc = 0.0;
    double auprc = 0.0;
    double information = 0.0;
    double entropy = 0.0;
    double ce = 0.0;
    double acc = 0.0;
};

struct MethodAggregate {
    std::string method;
    std::size_t count = 0;
    // Index order matches MetricRecord's metric fields.
    std::vector<double> mean;
    std::vector<double> stddev;
};

/// Metric field names in record/aggregate order.
extern const std::vector<std::string> kMetricNames;

std::vector<MethodAggregate> aggregate_records(
    const std::vector<MetricRecord>& records);

struct ExperimentReport {
    int format_version = 1;
    std::string experiment;
    std::string scale;
    std::uint64_t seed = 0;
    nlohmann::json config_echo;
    std::vector<MetricRecord> records;
    std::vector<MethodAggregate> aggregates;
    // Experiment-specific extras (NaN / empty when not applicable).
    double salient_fraction =
        std::numeric_limits<double>::quiet_NaN();  // state: mask cells > 0.5
    std::vector<std::string> agreement_ops;   // operator-agreement matrix axes
    std::vector<std::vector<double>> agreement_matrix;
};

nlohmann::json report_to_json(const ExperimentReport& report);

/// Writes report.json and report.csv (aggregate table) into dir.
void save_report(const std::string& dir, const ExperimentReport& report);

/// Mask rendered as an ASCII portable graymap, 0 -> black, 1 -> white.
void write_pgm(const std::string& path, const Matrix& m);

/// Per-criterion verdict for `reproduce`.
struct CriterionResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

std::vector<CriterionResult> check_acceptance(const ExperimentReport& report);

// ---------------------------------------------------------------------------
// Pipeline stages. Each stage reads/writes directory artifacts so the
// subcommands compose; run_experiment chains them and returns the report.
// ---------------------------------------------------------------------------

/// Dataset for the configured experiment. Rare experiments write one
/// white-box dataset holding `repetitions` instances; state experiments write
/// one labeled dataset per world seed (seed + j) with an n_train split.
void cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir);

/// Trains the sequence classifier on a state dataset directory. Writes
/// weights.json and training_curve.csv into out_dir.
void cmd_train(const ExperimentConfig& cfg, const std::string& dataset_dir,
               const std::string& out_dir);

/// Fits masks and scores baselines for every explained instance. model_path
/// may be empty for white-box experiments. Writes masks/, scores/ and
/// timings.json into out_dir.
void cmd_explain(const ExperimentConfig& cfg, const std::string& dataset_dir,
                 const std::string& model_path, const std::string& out_dir);

/// Computes the metric records for one dataset + explain directory pair and
/// writes report.json/report.csv (and optional heatmaps) into out_dir.
ExperimentReport cmd_evaluate(const ExperimentConfig& cfg,
                              const std::string& dataset_dir,
                              const std::string& explain_dir,
                              const std::string& model_path,
                              const std::string& out_dir);

/// generate -> (train) -> explain -> evaluate, all under out_dir. For the
/// state experiment this loops the world seeds and merges their records.
ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const std::string& out_dir);

/// Output directory resolution: cfg.output_dir when set, otherwise a fresh
/// timestamped subdirectory of the working directory.
std::string resolve_output_dir(const ExperimentConfig& cfg);

}  // namespace dynamask::harness
