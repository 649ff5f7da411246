#include "harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dynamask/datagen.hpp"
#include "dynamask/metrics.hpp"
#include "dynamask/rng.hpp"
#include "dynamask/target.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dynamask::harness {
namespace {

// Purpose keys for the per-run rng streams. Every stream is derived from
// (world seed, key) alone, so results do not depend on --jobs or on the
// order workers pick up instances.
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kPermutationStream = 3;  // shared by the whole batch
constexpr std::uint64_t kMethodBase = 0xA000;    // + instance * 8 + method
constexpr std::uint64_t kAfoKey = 0;
constexpr std::uint64_t kSvsKey = 2;

const double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_state_kind(ExperimentKind kind) {
    return kind == ExperimentKind::state ||
           kind == ExperimentKind::operator_agreement;
}

RngStream method_stream(std::uint64_t world_seed, std::size_t instance,
                        std::uint64_t method_key) {
    return RngStream(world_seed)
        .substream(kMethodBase + instance * 8 + method_key);
}

std::string world_dir(const std::string& base, std::size_t j) {
    return (fs::path(base) / ("world_" + std::to_string(j + 1))).string();
}

bool has_meta(const std::string& dir) {
    return fs::exists(fs::path(dir) / "meta.json");
}

std::string join(const std::string& dir, const std::string& leaf) {
    return (fs::path(dir) / leaf).string();
}

std::string weights_file(const std::string& model_path) {
    if (model_path.size() > 5 &&
        model_path.substr(model_path.size() - 5) == ".json") {
        return model_path;
    }
    return join(model_path, "weights.json");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

void write_timings(const std::string& dir,
                   const std::vector<double>& fit_seconds,
                   double total_seconds) {
    json doc;
    doc["fit_seconds"] = fit_seconds;
    doc["total_seconds"] = total_seconds;
    write_text(join(dir, "timings.json"), doc.dump(2) + "\n");
}

// --------------------------------------------------------------------------
// generate
// --------------------------------------------------------------------------

WhiteboxDataset make_rare_dataset(const ExperimentConfig& cfg) {
    WhiteboxDataset ds;
    RngStream data = RngStream(cfg.seed).substream(kDataStream);
    for (std::size_t k = 0; k < cfg.repetitions; ++k) {
        RngStream inst = data.substream(k);
        WhiteboxInstance w;
        w.stream_seed = inst.seed();
        w.inputs = generate_arma(inst, cfg.T, cfg.d);
        w.target = cfg.experiment == ExperimentKind::rare_feature
                       ? make_rare_feature_target(inst, cfg.T, cfg.d,
                                                  cfg.n_feat)
                       : make_rare_time_target(inst, cfg.T, cfg.d, cfg.n_time);
        ds.instances.push_back(std::move(w));
    }
    return ds;
}

DatasetMeta make_meta(const ExperimentConfig& cfg, std::uint64_t seed,
                      std::size_t n_train) {
    DatasetMeta meta;
    meta.experiment = experiment_name(cfg.experiment);
    meta.seed = seed;
    meta.scale = cfg.scale;
    meta.n_train = n_train;
    return meta;
}

// --------------------------------------------------------------------------
// train
// --------------------------------------------------------------------------

struct SplitDataset {
    HmmDataset train;
    HmmDataset test;
};

SplitDataset split_hmm(const HmmDataset& ds, std::size_t n_train) {
    if (n_train == 0 || n_train >= ds.size()) {
        throw std::invalid_argument(
            "dataset has no usable train/test split (n_train = " +
            std::to_string(n_train) + " of " + std::to_string(ds.size()) +
            " series)");
    }
    SplitDataset split;
    split.train.T = ds.T;
    split.test.T = ds.T;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        (i < n_train ? split.train : split.test).series.push_back(ds.series[i]);
    }
    return split;
}

void train_world(const ExperimentConfig& cfg, const std::string& dataset_dir,
                 const std::string& out_dir) {
    const HmmDataset ds = load_hmm_dataset(dataset_dir);
    const DatasetMeta meta = load_dataset_meta(dataset_dir);
    const SplitDataset split = split_hmm(ds, meta.n_train);
    RngStream rng = RngStream(meta.seed).substream(kTrainStream);
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult result = train_gru(split.train, cfg.train, rng);
    const double train_seconds = seconds_since(t0);
    const EvalResult eval = evaluate_gru(result.model, split.test);

    fs::create_directories(out_dir);
    result.model.save_weights(join(out_dir, "weights.json"));
    {
        std::ofstream curve(join(out_dir, "training_curve.csv"));
        if (!curve) {
            throw std::runtime_error("cannot write training_curve.csv under " +
                                     out_dir);
        }
        curve << "epoch,loss\n";
        char buf[40];
        for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
            std::snprintf(buf, sizeof buf, "%.17g", result.epoch_loss[e]);
            curve << (e + 1) << ',' << buf << '\n';
        }
    }
    json summary;
    summary["train_loss"] = result.final_loss;
    summary["train_accuracy"] = result.final_accuracy;
    summary["test_cross_entropy"] = eval.cross_entropy;
    summary["test_accuracy"] = eval.accuracy;
    summary["train_seconds"] = train_seconds;
    write_text(join(out_dir, "train_summary.json"), summary.dump(2) + "\n");
    std::printf("  trained on %zu series in %.1f s (test acc %.3f)\n",
                split.train.size(), train_seconds, eval.accuracy);
    std::fflush(stdout);
}

// --------------------------------------------------------------------------
// explain
// --------------------------------------------------------------------------

std::string mask_csv(const std::string& explain_dir, std::size_t k) {
    return join(join(explain_dir, "masks"),
                "mask_" + std::to_string(k + 1) + ".csv");
}

std::string score_csv(const std::string& explain_dir, const std::string& method,
                      std::size_t k) {
    return join(join(explain_dir, "scores"),
                method + "_" + std::to_string(k + 1) + ".csv");
}

void save_mask(const std::string& explain_dir, const std::string& stem,
               const FitResult& fit) {
    const std::string base = join(join(explain_dir, "masks"), stem);
    save_fit_result(base + ".json", fit);
    write_csv_matrix(base + ".csv", fit.mask);
}

void explain_rare(const ExperimentConfig& cfg, const std::string& dataset_dir,
                  const std::string& out_dir) {
    const WhiteboxDataset ds = load_whitebox_dataset(dataset_dir);
    const std::size_t n = ds.instances.size();
    const PerturbationOperator op = cfg.op.build();
    fs::create_directories(join(out_dir, "masks"));
    fs::create_directories(join(out_dir, "scores"));

    std::vector<Matrix> batch;
    batch.reserve(n);
    for (const WhiteboxInstance& inst : ds.instances) {
        batch.push_back(inst.inputs);
    }

    std::vector<double> fit_seconds(n, 0.0);
    const auto t0 = std::chrono::steady_clock::now();
    parallel_for(n, cfg.jobs, [&](std::size_t k) {
        const WhiteboxInstance& inst = ds.instances[k];
        const WhiteBoxRegressor model(inst.target);

        const auto fit_start = std::chrono::steady_clock::now();
        const FitResult fit =
            fit_lowest_error_mask(model, op, inst.inputs, cfg.fit,
                                  cfg.area_grid);
        fit_seconds[k] = seconds_since(fit_start);
        save_mask(out_dir, "mask_" + std::to_string(k + 1), fit);

        const AttributionConfig det = cfg.attribution.build(nullptr);
        write_csv_matrix(score_csv(out_dir, "fo", k),
                         feature_occlusion(model, inst.inputs, det));
        write_csv_matrix(score_csv(out_dir, "ig", k),
                         integrated_gradients(model, inst.inputs, det));

        // Every instance recreates the same permutation stream, so the batch
        // redistribution is shared even though each call scores one member.
        RngStream fp_rng = RngStream(cfg.seed).substream(kPermutationStream);
        const AttributionConfig fp_cfg = cfg.attribution.build(&fp_rng);
        write_csv_matrix(score_csv(out_dir, "fp", k),
                         feature_permutation(model, batch, fp_cfg)[k]);

        RngStream svs_rng = method_stream(cfg.seed, k, kSvsKey);
        const AttributionConfig svs_cfg = cfg.attribution.build(&svs_rng);
        write_csv_matrix(score_csv(out_dir, "svs", k),
                         shapley_value_sampling(model, inst.inputs, svs_cfg));

        std::printf("  instance %zu/%zu: mask fit %.1f s\n", k + 1, n,
                    fit_seconds[k]);
        std::fflush(stdout);
    });
    write_timings(out_dir, fit_seconds, seconds_since(t0));

    double mean_fit = 0.0;
    for (double s : fit_seconds) mean_fit += s;
    mean_fit /= static_cast<double>(n == 0 ? 1 : n);
    std::printf("  mean mask fit %.1f s per instance (informational)\n",
                mean_fit);
    std::fflush(stdout);
}

void explain_state_world(const ExperimentConfig& cfg,
                         const std::string& dataset_dir,
                         const std::string& model_path,
                         const std::string& out_dir) {
    if (model_path.empty()) {
        throw std::invalid_argument(
            "explain: the state experiment needs a trained model (--model)");
    }
    const HmmDataset ds = load_hmm_dataset(dataset_dir);
    const DatasetMeta meta = load_dataset_meta(dataset_dir);
    const SplitDataset split = split_hmm(ds, meta.n_train);
    if (cfg.n_explain > split.test.size()) {
        throw std::invalid_argument("n_explain exceeds the test split size");
    }
    const GruClassifier gru = GruClassifier::load_weights(weights_file(model_path));
    const PerturbationOperator op = cfg.op.build();
    fs::create_directories(join(out_dir, "masks"));
    fs::create_directories(join(out_dir, "scores"));

    std::vector<Matrix> refs;
    refs.reserve(split.train.size());
    for (const HmmSeries& s : split.train.series) refs.push_back(s.inputs);
    std::vector<Matrix> batch;
    batch.reserve(cfg.n_explain);
    for (std::size_t e = 0; e < cfg.n_explain; ++e) {
        batch.push_back(split.test.series[e].inputs);
    }

    // One batch-wide permutation pass scores every explained instance.
    RngStream fp_rng = RngStream(meta.seed).substream(kPermutationStream);
    const AttributionConfig fp_cfg = cfg.attribution.build(&fp_rng);
    const std::vector<Matrix> fp_scores = feature_permutation(gru, batch, fp_cfg);

    std::vector<double> fit_seconds(cfg.n_explain, 0.0);
    const auto t0 = std::chrono::steady_clock::now();
    parallel_for(cfg.n_explain, cfg.jobs, [&](std::size_t e) {
        const Matrix& x = batch[e];

        const auto fit_start = std::chrono::steady_clock::now();
        FitResult fit;
        if (cfg.use_extremal) {
            const Matrix ones(x.rows(), x.cols(), 1.0);
            ExtremalConfig ext;
            ext.area_grid = cfg.area_grid;
            ext.epsilon = cfg.epsilon_factor *
                          error_loss_classification(gru, op, x, ones);
            fit = fit_extremal_mask(gru, op, x, cfg.fit, ext);
        } else {
            fit = fit_mask(gru, op, x, cfg.fit);
        }
        fit_seconds[e] = seconds_since(fit_start);
        save_mask(out_dir, "mask_" + std::to_string(e + 1), fit);

        const AttributionConfig det = cfg.attribution.build(nullptr);
        write_csv_matrix(score_csv(out_dir, "fo", e),
                         feature_occlusion(gru, x, det));
        write_csv_matrix(score_csv(out_dir, "ig", e),
                         integrated_gradients(gru, x, det));

        RngStream afo_rng = method_stream(meta.seed, e, kAfoKey);
        const AttributionConfig afo_cfg = cfg.attribution.build(&afo_rng);
        write_csv_matrix(score_csv(out_dir, "afo", e),
                         augmented_feature_occlusion(gru, x, refs, afo_cfg));

        write_csv_matrix(score_csv(out_dir, "fp", e), fp_scores[e]);

        RngStream svs_rng = method_stream(meta.seed, e, kSvsKey);
        const AttributionConfig svs_cfg = cfg.attribution.build(&svs_rng);
        write_csv_matrix(score_csv(out_dir, "svs", e),
                         shapley_value_sampling(gru, x, svs_cfg));

        std::printf("  instance %zu/%zu: mask fit %.1f s (area %.2f%s)\n",
                    e + 1, cfg.n_explain, fit_seconds[e], fit.area,
                    fit.converged ? "" : ", unconverged");
        std::fflush(stdout);
    });
    write_timings(out_dir, fit_seconds, seconds_since(t0));
}

const std::vector<std::string>& agreement_ops() {
    static const std::vector<std::string> ops = {
        "gaussian-blur", "fade-moving-average", "fade-past-average"};
    return ops;
}

std::vector<PerturbationOperator> agreement_operators(
    const ExperimentConfig& cfg) {
    std::vector<PerturbationOperator> ops;
    ops.push_back(PerturbationOperator::gaussian_blur(cfg.op.sigma_max));
    ops.push_back(PerturbationOperator::fade_moving_average(3));
    ops.push_back(PerturbationOperator::fade_past_average(6));
    return ops;
}

void explain_agreement_world(const ExperimentConfig& cfg,
                             const std::string& dataset_dir,
                             const std::string& model_path,
                             const std::string& out_dir) {
    if (model_path.empty()) {
        throw std::invalid_argument(
            "explain: the operator-agreement experiment needs a trained model");
    }
    const HmmDataset ds = load_hmm_dataset(dataset_dir);
    const DatasetMeta meta = load_dataset_meta(dataset_dir);
    const SplitDataset split = split_hmm(ds, meta.n_train);
    if (cfg.n_explain > split.test.size()) {
        throw std::invalid_argument("n_explain exceeds the test split size");
    }
    const GruClassifier gru = GruClassifier::load_weights(weights_file(model_path));
    const std::vector<PerturbationOperator> ops = agreement_operators(cfg);
    fs::create_directories(join(out_dir, "masks"));

    std::vector<double> fit_seconds(cfg.n_explain * ops.size(), 0.0);
    const auto t0 = std::chrono::steady_clock::now();
    parallel_for(cfg.n_explain, cfg.jobs, [&](std::size_t e) {
        const Matrix& x = split.test.series[e].inputs;
        for (std::size_t o = 0; o < ops.size(); ++o) {
            const auto fit_start = std::chrono::steady_clock::now();
            const FitResult fit = fit_mask(gru, ops[o], x, cfg.fit);
            fit_seconds[e * ops.size() + o] = seconds_since(fit_start);
            save_mask(out_dir,
                      agreement_ops()[o] + "_" + std::to_string(e + 1), fit);
        }
        std::printf("  instance %zu/%zu: %zu operator fits\n", e + 1,
                    cfg.n_explain, ops.size());
        std::fflush(stdout);
    });
    write_timings(out_dir, fit_seconds, seconds_since(t0));
}

// --------------------------------------------------------------------------
// evaluate
// --------------------------------------------------------------------------

Matrix load_explained_matrix(const std::string& path, std::size_t expected,
                             std::size_t index) {
    if (!fs::exists(path)) {
        throw std::runtime_error(
            "instance count mismatch: expected " + std::to_string(expected) +
            " explained instances but " + path + " is missing");
    }
    (void)index;
    return read_csv_matrix(path);
}

void require_no_extra(const std::string& path, std::size_t expected) {
    if (fs::exists(path)) {
        throw std::runtime_error(
            "instance count mismatch: found more explained instances than the "
            "dataset's " +
            std::to_string(expected) + " (" + path + " exists)");
    }
}

struct InstanceMetrics {
    double aup, aur, auroc, auprc, information, entropy;
};

InstanceMetrics target_metrics(const Matrix& mask_like,
                               const SaliencyTarget& target) {
    const AupAur pr = aup_aur(mask_like, target, ThresholdGrid::default_grid());
    const RankingAreas rank = auroc_auprc(mask_like, target);
    return {pr.aup,
            pr.aur,
            rank.auroc,
            rank.auprc,
            mask_information(mask_like, target),
            mask_entropy(mask_like, target)};
}

MetricRecord make_record(const std::string& method, std::uint64_t seed,
                         const InstanceMetrics& m, double ce, double acc) {
    MetricRecord r;
    r.method = method;
    r.seed = seed;
    r.aup = m.aup;
    r.aur = m.aur;
    r.auroc = m.auroc;
    r.auprc = m.auprc;
    r.information = m.information;
    r.entropy = m.entropy;
    r.ce = ce;
    r.acc = acc;
    return r;
}

void maybe_write_heatmaps(const ExperimentConfig& cfg,
                          const std::string& out_dir,
                          const std::string& stem, const Matrix& mask) {
    if (!cfg.heatmaps) return;
    const std::string dir = join(out_dir, "heatmaps");
    fs::create_directories(dir);
    write_pgm(join(dir, stem + ".pgm"), mask);
    write_csv_matrix(join(dir, stem + ".csv"), mask);
}

ExperimentReport blank_report(const ExperimentConfig& cfg) {
    ExperimentReport report;
    report.experiment = experiment_name(cfg.experiment);
    report.scale = cfg.scale;
    report.seed = cfg.seed;
    report.config_echo = config_to_json(cfg);
    // Where the run writes and how many workers it uses are execution
    // details, not experiment identity; dropping them keeps reruns of the
    // same experiment byte-identical. config.json at the run root keeps both.
    report.config_echo.erase("output_dir");
    report.config_echo.erase("jobs");
    return report;
}

ExperimentReport evaluate_rare(const ExperimentConfig& cfg,
                               const std::string& dataset_dir,
                               const std::string& explain_dir,
                               const std::string& out_dir) {
    const WhiteboxDataset ds = load_whitebox_dataset(dataset_dir);
    const std::size_t n = ds.instances.size();
    require_no_extra(mask_csv(explain_dir, n), n);

    ExperimentReport report = blank_report(cfg);
    const std::vector<std::string> methods = {"fo", "fp", "ig", "svs"};

    std::vector<Matrix> masks;
    masks.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        masks.push_back(
            load_explained_matrix(mask_csv(explain_dir, k), n, k));
    }
    for (std::size_t k = 0; k < n; ++k) {
        const WhiteboxInstance& inst = ds.instances[k];
        report.records.push_back(
            make_record("mask", inst.stream_seed,
                        target_metrics(masks[k], inst.target), kNaN, kNaN));
        maybe_write_heatmaps(cfg, out_dir, "mask_" + std::to_string(k + 1),
                             masks[k]);
    }
    for (const std::string& method : methods) {
        for (std::size_t k = 0; k < n; ++k) {
            const WhiteboxInstance& inst = ds.instances[k];
            const Matrix normalized = scores_to_mask(load_explained_matrix(
                score_csv(explain_dir, method, k), n, k));
            report.records.push_back(
                make_record(method, inst.stream_seed,
                            target_metrics(normalized, inst.target), kNaN,
                            kNaN));
        }
    }
    report.aggregates = aggregate_records(report.records);
    save_report(out_dir, report);
    return report;
}

/// Stacks per-instance mask-like matrices into one tall matrix and the
/// instance targets into one tall salient set, so the pooled curves weight
/// every explained cell equally.
struct PooledWorld {
    Matrix stacked;
    SaliencyTarget target;
};

PooledWorld pool_world(const std::vector<Matrix>& mask_like,
                       const std::vector<const SaliencyTarget*>& targets) {
    const std::size_t T = mask_like.front().rows();
    const std::size_t d = mask_like.front().cols();
    PooledWorld pooled;
    pooled.stacked = Matrix(mask_like.size() * T, d);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t e = 0; e < mask_like.size(); ++e) {
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t i = 0; i < d; ++i) {
                pooled.stacked(e * T + t, i) = mask_like[e](t, i);
            }
        }
        for (const auto& [t, i] : targets[e]->pairs()) {
            pairs.emplace_back(e * T + t, i);
        }
    }
    pooled.target = SaliencyTarget::from_pairs(std::move(pairs),
                                               mask_like.size() * T, d);
    return pooled;
}

struct WorldPaths {
    std::string data;
    std::string model;
    std::string explain;
};

std::vector<WorldPaths> resolve_worlds(const ExperimentConfig& cfg,
                                       const std::string& data_dir,
                                       const std::string& model_dir,
                                       const std::string& explain_dir) {
    if (has_meta(data_dir)) {
        return {WorldPaths{data_dir, model_dir, explain_dir}};
    }
    std::vector<WorldPaths> worlds;
    for (std::size_t j = 0; j < cfg.n_seeds; ++j) {
        worlds.push_back(WorldPaths{
            world_dir(data_dir, j),
            model_dir.empty() ? std::string{} : world_dir(model_dir, j),
            explain_dir.empty() ? std::string{} : world_dir(explain_dir, j)});
    }
    return worlds;
}

ExperimentReport evaluate_state(const ExperimentConfig& cfg,
                                const std::string& dataset_dir,
                                const std::string& explain_dir,
                                const std::string& model_path,
                                const std::string& out_dir) {
    ExperimentReport report = blank_report(cfg);
    const std::vector<std::string> methods = {"fo", "afo", "fp", "ig", "svs"};
    const std::vector<WorldPaths> worlds =
        resolve_worlds(cfg, dataset_dir, model_path, explain_dir);

    std::vector<MetricRecord> mask_records;
    std::vector<std::vector<MetricRecord>> method_records(methods.size());
    double salient_sum = 0.0;
    for (std::size_t j = 0; j < worlds.size(); ++j) {
        const WorldPaths& paths = worlds[j];
        const HmmDataset ds = load_hmm_dataset(paths.data);
        const DatasetMeta meta = load_dataset_meta(paths.data);
        const SplitDataset split = split_hmm(ds, meta.n_train);
        if (cfg.n_explain > split.test.size()) {
            throw std::invalid_argument("n_explain exceeds the test split size");
        }
        if (paths.model.empty()) {
            throw std::invalid_argument(
                "evaluate: the state experiment needs a trained model");
        }
        const GruClassifier gru =
            GruClassifier::load_weights(weights_file(paths.model));
        const FinalStepView head(gru);
        require_no_extra(mask_csv(paths.explain, cfg.n_explain), cfg.n_explain);

        std::vector<const SaliencyTarget*> targets;
        std::vector<Matrix> inputs;
        for (std::size_t e = 0; e < cfg.n_explain; ++e) {
            targets.push_back(&split.test.series[e].target);
            inputs.push_back(split.test.series[e].inputs);
        }

        const auto shift_stats = [&](const std::vector<Matrix>& mask_like)
            -> std::pair<double, double> {
            double ce = 0.0;
            double kept = 0.0;
            for (std::size_t e = 0; e < mask_like.size(); ++e) {
                const Matrix replaced = replace_top_fraction_by_time_average(
                    inputs[e], mask_like[e], cfg.shift_fraction);
                const PredictionShift shift =
                    prediction_shift(head, inputs[e], replaced);
                ce += shift.cross_entropy;
                kept += shift.flipped ? 0.0 : 1.0;
            }
            const double n = static_cast<double>(mask_like.size());
            return {ce / n, kept / n};
        };

        std::vector<Matrix> masks;
        for (std::size_t e = 0; e < cfg.n_explain; ++e) {
            masks.push_back(load_explained_matrix(mask_csv(paths.explain, e),
                                                  cfg.n_explain, e));
            maybe_write_heatmaps(cfg, out_dir,
                                 "world_" + std::to_string(j + 1) + "_mask_" +
                                     std::to_string(e + 1),
                                 masks.back());
        }
        const PooledWorld pooled_masks = pool_world(masks, targets);
        const auto [mask_ce, mask_acc] = shift_stats(masks);
        mask_records.push_back(
            make_record("mask", meta.seed,
                        target_metrics(pooled_masks.stacked,
                                       pooled_masks.target),
                        mask_ce, mask_acc));
        salient_sum += salient_fraction(pooled_masks.stacked);

        for (std::size_t m = 0; m < methods.size(); ++m) {
            std::vector<Matrix> normalized;
            for (std::size_t e = 0; e < cfg.n_explain; ++e) {
                normalized.push_back(scores_to_mask(load_explained_matrix(
                    score_csv(paths.explain, methods[m], e), cfg.n_explain,
                    e)));
            }
            const PooledWorld pooled = pool_world(normalized, targets);
            const auto [ce, acc] = shift_stats(normalized);
            method_records[m].push_back(
                make_record(methods[m], meta.seed,
                            target_metrics(pooled.stacked, pooled.target), ce,
                            acc));
        }
    }

    report.records = std::move(mask_records);
    for (const std::vector<MetricRecord>& rows : method_records) {
        report.records.insert(report.records.end(), rows.begin(), rows.end());
    }
    report.aggregates = aggregate_records(report.records);
    report.salient_fraction = salient_sum / static_cast<double>(worlds.size());
    save_report(out_dir, report);
    return report;
}

ExperimentReport evaluate_agreement(const ExperimentConfig& cfg,
                                    const std::string& dataset_dir,
                                    const std::string& explain_dir,
                                    const std::string& out_dir) {
    ExperimentReport report = blank_report(cfg);
    const WorldPaths paths =
        resolve_worlds(cfg, dataset_dir, "", explain_dir).front();
    const HmmDataset ds = load_hmm_dataset(paths.data);
    const DatasetMeta meta = load_dataset_meta(paths.data);
    const SplitDataset split = split_hmm(ds, meta.n_train);
    const std::vector<std::string>& ops = agreement_ops();

    std::vector<const SaliencyTarget*> targets;
    for (std::size_t e = 0; e < cfg.n_explain; ++e) {
        targets.push_back(&split.test.series[e].target);
    }

    std::vector<std::vector<Matrix>> masks(ops.size());
    for (std::size_t o = 0; o < ops.size(); ++o) {
        for (std::size_t e = 0; e < cfg.n_explain; ++e) {
            const std::string path =
                join(join(paths.explain, "masks"),
                     ops[o] + "_" + std::to_string(e + 1) + ".csv");
            masks[o].push_back(
                load_explained_matrix(path, cfg.n_explain, e));
        }
        const PooledWorld pooled = pool_world(masks[o], targets);
        report.records.push_back(
            make_record(ops[o], meta.seed,
                        target_metrics(pooled.stacked, pooled.target), kNaN,
                        kNaN));
    }

    report.agreement_ops = ops;
    report.agreement_matrix.assign(ops.size(),
                                   std::vector<double>(ops.size(), 0.0));
    for (std::size_t p = 0; p < ops.size(); ++p) {
        for (std::size_t q = 0; q < ops.size(); ++q) {
            double total = 0.0;
            for (std::size_t e = 0; e < cfg.n_explain; ++e) {
                total += pairwise_mask_accuracy(masks[p][e], masks[q][e]);
            }
            report.agreement_matrix[p][q] =
                total / static_cast<double>(cfg.n_explain);
        }
    }
    report.aggregates = aggregate_records(report.records);
    save_report(out_dir, report);
    return report;
}

}  // namespace

void cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir) {
    if (is_state_kind(cfg.experiment)) {
        for (std::size_t j = 0; j < cfg.n_seeds; ++j) {
            const std::uint64_t world_seed = cfg.seed + j;
            RngStream data = RngStream(world_seed).substream(kDataStream);
            const HmmDataset ds =
                generate_hmm_dataset(data, cfg.n_train + cfg.n_test, cfg.T);
            save_hmm_dataset(world_dir(out_dir, j), ds,
                             make_meta(cfg, world_seed, cfg.n_train));
        }
        return;
    }
    save_whitebox_dataset(out_dir, make_rare_dataset(cfg),
                          make_meta(cfg, cfg.seed, 0));
}

void cmd_train(const ExperimentConfig& cfg, const std::string& dataset_dir,
               const std::string& out_dir) {
    if (!is_state_kind(cfg.experiment)) {
        throw std::invalid_argument("train: experiment '" +
                                    experiment_name(cfg.experiment) +
                                    "' uses a white-box model; nothing to train");
    }
    if (has_meta(dataset_dir)) {
        train_world(cfg, dataset_dir, out_dir);
        return;
    }
    for (std::size_t j = 0; j < cfg.n_seeds; ++j) {
        std::printf("world %zu/%zu:\n", j + 1, cfg.n_seeds);
        std::fflush(stdout);
        train_world(cfg, world_dir(dataset_dir, j), world_dir(out_dir, j));
    }
}

void cmd_explain(const ExperimentConfig& cfg, const std::string& dataset_dir,
                 const std::string& model_path, const std::string& out_dir) {
    switch (cfg.experiment) {
        case ExperimentKind::rare_feature:
        case ExperimentKind::rare_time:
            explain_rare(cfg, dataset_dir, out_dir);
            return;
        case ExperimentKind::state:
        case ExperimentKind::operator_agreement:
            break;
    }
    const std::vector<WorldPaths> worlds =
        resolve_worlds(cfg, dataset_dir, model_path, out_dir);
    for (std::size_t j = 0; j < worlds.size(); ++j) {
        if (worlds.size() > 1) {
            std::printf("world %zu/%zu:\n", j + 1, worlds.size());
            std::fflush(stdout);
        }
        if (cfg.experiment == ExperimentKind::state) {
            explain_state_world(cfg, worlds[j].data, worlds[j].model,
                                worlds[j].explain.empty() ? out_dir
                                                          : worlds[j].explain);
        } else {
            explain_agreement_world(cfg, worlds[j].data, worlds[j].model,
                                    worlds[j].explain.empty()
                                        ? out_dir
                                        : worlds[j].explain);
        }
    }
}

ExperimentReport cmd_evaluate(const ExperimentConfig& cfg,
                              const std::string& dataset_dir,
                              const std::string& explain_dir,
                              const std::string& model_path,
                              const std::string& out_dir) {
    switch (cfg.experiment) {
        case ExperimentKind::rare_feature:
        case ExperimentKind::rare_time:
            return evaluate_rare(cfg, dataset_dir, explain_dir, out_dir);
        case ExperimentKind::state:
            return evaluate_state(cfg, dataset_dir, explain_dir, model_path,
                                  out_dir);
        case ExperimentKind::operator_agreement:
            return evaluate_agreement(cfg, dataset_dir, explain_dir, out_dir);
    }
    throw std::logic_error("unreachable experiment kind");
}

ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_text(join(out_dir, "config.json"),
               config_to_json(cfg).dump(2) + "\n");
    const auto t0 = std::chrono::steady_clock::now();

    std::printf("[generate] %s\n", experiment_name(cfg.experiment).c_str());
    std::fflush(stdout);
    const std::string data_dir = join(out_dir, "data");
    cmd_generate(cfg, data_dir);

    std::string model_dir;
    if (is_state_kind(cfg.experiment)) {
        model_dir = join(out_dir, "model");
        std::printf("[train]\n");
        std::fflush(stdout);
        cmd_train(cfg, data_dir, model_dir);
    }

    std::printf("[explain]\n");
    std::fflush(stdout);
    const std::string explain_dir = join(out_dir, "explain");
    cmd_explain(cfg, data_dir, model_dir, explain_dir);

    std::printf("[evaluate]\n");
    std::fflush(stdout);
    ExperimentReport report =
        cmd_evaluate(cfg, data_dir, explain_dir, model_dir, out_dir);
    std::printf("[done] %.1f s total; report under %s\n", seconds_since(t0),
                out_dir.c_str());
    std::fflush(stdout);
    return report;
}

}  // namespace dynamask::harness
