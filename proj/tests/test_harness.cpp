#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "dynamask/datagen.hpp"
#include "dynamask/matrix.hpp"
#include "dynamask/models.hpp"
#include "harness.hpp"

namespace fs = std::filesystem;
using namespace dynamask;
using namespace dynamask::harness;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }

    std::string sub(const std::string& leaf) const {
        return (path / leaf).string();
    }
};

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(bool(in));
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::map<std::string, std::string> dir_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        out[fs::relative(entry.path(), root).string()] =
            read_bytes(entry.path());
    }
    return out;
}

// Small enough to finish in milliseconds while exercising every stage.
ExperimentConfig tiny_rare() {
    ExperimentConfig cfg = default_config(ExperimentKind::rare_feature, "desk");
    cfg.seed = 5;
    cfg.T = 40;
    cfg.d = 40;
    cfg.repetitions = 2;
    cfg.n_feat = 2;
    cfg.fit.epochs = 40;
    cfg.area_grid = {0.05, 0.1};
    cfg.attribution.svs_samples = 2;
    cfg.attribution.ig_steps = 4;
    return cfg;
}

ExperimentConfig tiny_state(ExperimentKind kind = ExperimentKind::state) {
    ExperimentConfig cfg = default_config(kind, "desk");
    cfg.seed = 11;
    cfg.T = 12;
    cfg.n_train = 8;
    cfg.n_test = 4;
    cfg.n_explain = 2;
    cfg.n_seeds = 1;
    cfg.train.hidden_size = 4;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 4;
    cfg.fit.epochs = 40;
    cfg.area_grid = {0.3, 0.35};
    if (kind == ExperimentKind::operator_agreement) {
        cfg.fit.area = 0.35;
        cfg.area_grid = {0.35};
    }
    cfg.attribution.svs_samples = 2;
    cfg.attribution.afo_draws = 2;
    cfg.attribution.ig_steps = 4;
    return cfg;
}

}  // namespace

TEST_CASE("experiment names round-trip; mimic is rejected by name") {
    for (ExperimentKind kind :
         {ExperimentKind::rare_feature, ExperimentKind::rare_time,
          ExperimentKind::state, ExperimentKind::operator_agreement}) {
        CHECK(experiment_from_name(experiment_name(kind)) == kind);
    }
    CHECK_THROWS_AS(experiment_from_name("nope"), std::invalid_argument);
    try {
        experiment_from_name("mimic");
        FAIL("mimic must be rejected");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("clinical") != std::string::npos);
    }
}

TEST_CASE("default configs encode the published protocols") {
    SUBCASE("rare experiments are scale-independent") {
        for (const char* scale : {"desk", "paper"}) {
            const ExperimentConfig cfg =
                default_config(ExperimentKind::rare_feature, scale);
            CHECK(cfg.T == 50);
            CHECK(cfg.d == 50);
            CHECK(cfg.repetitions == 10);
            CHECK(cfg.op.kind == "gaussian-blur");
            CHECK(cfg.op.sigma_max == 1.0);
            CHECK(cfg.fit.learning_rate == 1.0);
            CHECK(cfg.fit.momentum == 1.0);
            CHECK(cfg.fit.lambda_0 == 1.0);
            CHECK(cfg.fit.dilation == 1000.0);
            CHECK(cfg.fit.lambda_c == 0.0);
            CHECK(cfg.fit.epochs == 1000);
            CHECK(cfg.fit.loss_kind == LossKind::regression);
            CHECK_FALSE(cfg.use_extremal);
            REQUIRE(cfg.area_grid.size() == 50);
            CHECK(cfg.area_grid.front() == doctest::Approx(0.001));
            CHECK(cfg.area_grid.back() == doctest::Approx(0.050));
        }
    }
    SUBCASE("state desk and paper differ only in size") {
        const ExperimentConfig desk =
            default_config(ExperimentKind::state, "desk");
        CHECK(desk.T == 100);
        CHECK(desk.d == 3);
        CHECK(desk.n_train == 200);
        CHECK(desk.n_test == 50);
        CHECK(desk.n_explain == 20);
        CHECK(desk.n_seeds == 5);
        CHECK(desk.train.hidden_size == 50);
        CHECK(desk.fit.lambda_0 == 0.1);
        CHECK(desk.fit.dilation == 100.0);
        CHECK(desk.fit.lambda_c == 1.0);
        CHECK(desk.fit.loss_kind == LossKind::classification);
        CHECK(desk.use_extremal);
        CHECK(desk.epsilon_factor == 0.9);
        REQUIRE(desk.area_grid.size() == 11);
        CHECK(desk.area_grid.front() == doctest::Approx(0.15));
        CHECK(desk.area_grid.back() == doctest::Approx(0.35));

        const ExperimentConfig paper =
            default_config(ExperimentKind::state, "paper");
        CHECK(paper.T == 200);
        CHECK(paper.n_train == 800);
        CHECK(paper.n_test == 200);
        CHECK(paper.n_explain == 100);
        CHECK(paper.train.hidden_size == 200);
        CHECK(paper.fit.lambda_0 == desk.fit.lambda_0);
    }
    SUBCASE("operator agreement pins one world at the grid maximum area") {
        const ExperimentConfig cfg =
            default_config(ExperimentKind::operator_agreement, "desk");
        CHECK(cfg.n_seeds == 1);
        CHECK(cfg.n_explain == 34);
        CHECK_FALSE(cfg.use_extremal);
        CHECK(cfg.fit.area == 0.35);
    }
    CHECK_THROWS_AS(default_config(ExperimentKind::state, "huge"),
                    std::invalid_argument);
}

TEST_CASE("config survives a json round trip bit-exactly") {
    for (ExperimentKind kind :
         {ExperimentKind::rare_feature, ExperimentKind::rare_time,
          ExperimentKind::state, ExperimentKind::operator_agreement}) {
        ExperimentConfig cfg = default_config(kind, "desk");
        cfg.seed = 987654321;
        cfg.output_dir = "somewhere/else";
        cfg.jobs = 7;
        cfg.heatmaps = true;
        const json doc = config_to_json(cfg);
        const json again = config_to_json(config_from_json(doc));
        CHECK(doc.dump() == again.dump());
    }
}

TEST_CASE("dotted-path overrides parse values as json with string fallback") {
    json doc = config_to_json(default_config(ExperimentKind::state, "desk"));
    apply_override(doc, "fit.epochs=250");
    apply_override(doc, "operator.kind=fade-moving-average");
    apply_override(doc, "area_grid=[0.1,0.2]");
    apply_override(doc, "train.learning_rate=0.01");
    const ExperimentConfig cfg = config_from_json(doc);
    CHECK(cfg.fit.epochs == 250);
    CHECK(cfg.op.kind == "fade-moving-average");
    REQUIRE(cfg.area_grid.size() == 2);
    CHECK(cfg.area_grid[1] == 0.2);
    CHECK(cfg.train.learning_rate == 0.01);
    CHECK_THROWS_AS(apply_override(doc, "no-equals-sign"),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_override(doc, "=5"), std::invalid_argument);
}

TEST_CASE("config validation rejects inconsistent documents") {
    const json base = config_to_json(default_config(ExperimentKind::state, "desk"));
    const auto broken = [&](const std::string& assignment) {
        json doc = base;
        apply_override(doc, assignment);
        return doc;
    };
    CHECK_THROWS_AS(config_from_json(broken("scale=galactic")),
                    std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(broken("area_grid=[]")),
                    std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(broken("n_explain=100")),
                    std::invalid_argument);  // exceeds n_test = 50
    CHECK_THROWS_AS(config_from_json(broken("operator.kind=identity")),
                    std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(broken("attribution.ig_baseline=noise")),
                    std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(broken("shift_fraction=0")),
                    std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(broken("fit.mode=remove")),
                    std::invalid_argument);
}

TEST_CASE("parallel_for covers every index once and propagates exceptions") {
    for (std::size_t jobs : {std::size_t{1}, std::size_t{4}}) {
        std::vector<std::atomic<int>> hits(97);
        parallel_for(hits.size(), jobs,
                     [&](std::size_t i) { hits[i].fetch_add(1); });
        for (const auto& h : hits) CHECK(h.load() == 1);
    }
    parallel_for(0, 4, [](std::size_t) { FAIL("must not run"); });
    CHECK_THROWS_AS(
        parallel_for(50, 4,
                     [](std::size_t i) {
                         if (i == 13) throw std::runtime_error("boom");
                     }),
        std::runtime_error);
}

TEST_CASE("aggregates are the sample mean and deviation of their records") {
    MetricRecord a;
    a.method = "m";
    a.aup = 1.0;
    MetricRecord b = a;
    b.aup = 3.0;
    const std::vector<MethodAggregate> aggs = aggregate_records({a, b});
    REQUIRE(aggs.size() == 1);
    CHECK(aggs[0].count == 2);
    CHECK(aggs[0].mean[0] == doctest::Approx(2.0));
    CHECK(aggs[0].stddev[0] == doctest::Approx(std::sqrt(2.0)));

    SUBCASE("a NaN record makes the whole column NaN") {
        MetricRecord c = a;
        c.ce = std::numeric_limits<double>::quiet_NaN();
        const auto with_nan = aggregate_records({c});
        const std::size_t ce_index = 6;
        CHECK(std::isnan(with_nan[0].mean[ce_index]));
    }

    SUBCASE("recomputing from the records matches to 1e-12") {
        RngStream rng(71);
        std::vector<MetricRecord> records;
        for (int k = 0; k < 40; ++k) {
            MetricRecord r;
            r.method = k % 3 == 0 ? "x" : "y";
            r.aup = rng.normal();
            r.aur = rng.normal();
            r.auroc = rng.normal();
            r.auprc = rng.normal();
            r.information = 100.0 * rng.normal();
            r.entropy = rng.normal();
            r.ce = rng.normal();
            r.acc = rng.normal();
            records.push_back(r);
        }
        for (const MethodAggregate& agg : aggregate_records(records)) {
            const std::vector<const double MetricRecord::*> fields = {
                &MetricRecord::aup,         &MetricRecord::aur,
                &MetricRecord::auroc,       &MetricRecord::auprc,
                &MetricRecord::information, &MetricRecord::entropy,
                &MetricRecord::ce,          &MetricRecord::acc};
            for (std::size_t m = 0; m < fields.size(); ++m) {
                std::vector<double> col;
                for (const MetricRecord& r : records) {
                    if (r.method == agg.method) col.push_back(r.*fields[m]);
                }
                // Reverse-order summation: same statistic, different
                // rounding path.
                double mean = 0.0;
                for (auto it = col.rbegin(); it != col.rend(); ++it) mean += *it;
                mean /= static_cast<double>(col.size());
                double var = 0.0;
                for (auto it = col.rbegin(); it != col.rend(); ++it) {
                    var += (*it - mean) * (*it - mean);
                }
                const double stddev =
                    std::sqrt(var / static_cast<double>(col.size() - 1));
                CHECK(agg.mean[m] == doctest::Approx(mean).epsilon(1e-12));
                CHECK(agg.stddev[m] ==
                      doctest::Approx(stddev).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("reports serialize NaN metrics as null and blank csv cells") {
    TempDir tmp("dynamask-test-report");
    ExperimentReport report;
    report.experiment = "rare-feature";
    report.scale = "desk";
    report.seed = 3;
    report.config_echo = json::object();
    MetricRecord r;
    r.method = "mask";
    r.seed = 9;
    r.aup = 0.5;
    r.ce = std::numeric_limits<double>::quiet_NaN();
    r.acc = std::numeric_limits<double>::quiet_NaN();
    report.records = {r};
    report.aggregates = aggregate_records(report.records);

    const json doc = report_to_json(report);
    CHECK(doc.at("format_version") == 1);
    CHECK(doc.at("records")[0].at("ce").is_null());
    CHECK(doc.at("records")[0].at("aup").get<double>() == 0.5);
    CHECK_FALSE(doc.contains("salient_fraction"));
    CHECK_FALSE(doc.contains("agreement"));

    save_report(tmp.path.string(), report);
    const std::string csv = read_bytes(tmp.path / "report.csv");
    CHECK(csv.find("method,count,aup_mean,aup_std") == 0);
    CHECK(csv.find(",,") != std::string::npos);  // NaN columns stay blank
    CHECK(read_bytes(tmp.path / "report.json").find("\"ce\": null") !=
          std::string::npos);
}

TEST_CASE("pgm export rounds mask cells onto the 255 gray scale") {
    TempDir tmp("dynamask-test-pgm");
    Matrix m(2, 3);
    m(0, 0) = 0.0;
    m(0, 1) = 0.5;
    m(0, 2) = 1.0;
    m(1, 0) = 0.25;
    m(1, 1) = -0.5;  // clamped
    m(1, 2) = 2.0;   // clamped
    const std::string path = tmp.sub("m.pgm");
    write_pgm(path, m);
    CHECK(read_bytes(path) == "P2\n3 2\n255\n0 128 255\n64 0 255\n");
}

TEST_CASE("acceptance checks mirror the criterion bounds") {
    const auto aggregate = [](const std::string& method, double aup,
                              double aur, double info, double entropy) {
        MetricRecord r;
        r.method = method;
        r.aup = aup;
        r.aur = aur;
        r.information = info;
        r.entropy = entropy;
        return r;
    };
    SUBCASE("rare-feature bounds") {
        ExperimentReport report;
        report.experiment = "rare-feature";
        report.records = {aggregate("mask", 0.99, 0.58, 250.0, 0.7),
                          aggregate("fo", 1.0, 0.14, 13.0, 11.0)};
        report.aggregates = aggregate_records(report.records);
        const auto results = check_acceptance(report);
        REQUIRE(results.size() == 5);
        for (const CriterionResult& r : results) CHECK(r.pass);

        report.records[0].aur = 0.75;  // outside [0.50, 0.70]
        report.aggregates = aggregate_records(report.records);
        CHECK_FALSE(check_acceptance(report)[0].pass);
    }
    SUBCASE("rare-time widens the recall band") {
        ExperimentReport report;
        report.experiment = "rare-time";
        report.records = {aggregate("mask", 0.99, 0.75, 1290.0, 7.1),
                          aggregate("ig", 1.0, 0.15, 53.0, 48.0)};
        report.aggregates = aggregate_records(report.records);
        for (const CriterionResult& r : check_acceptance(report))
            CHECK(r.pass);
    }
    SUBCASE("state requires strict dominance and a bounded salient set") {
        ExperimentReport report;
        report.experiment = "state";
        MetricRecord mask = aggregate("mask", 0.85, 0.6, 0.0, 0.0);
        mask.auroc = 0.9;
        mask.auprc = 0.8;
        MetricRecord fo = aggregate("fo", 0.85, 0.5, 0.0, 0.0);
        report.records = {mask, fo};
        report.aggregates = aggregate_records(report.records);
        report.salient_fraction = 0.32;
        const auto results = check_acceptance(report);
        REQUIRE(results.size() == 4);
        CHECK(results[0].pass);
        CHECK(results[1].pass);
        CHECK_FALSE(results[2].pass);  // AUP tie is not strict dominance
        CHECK(results[3].pass);
    }
    SUBCASE("agreement needs unit diagonal and 0.70 off-diagonal") {
        ExperimentReport report;
        report.experiment = "operator-agreement";
        report.agreement_ops = {"a", "b"};
        report.agreement_matrix = {{1.0, 0.8}, {0.8, 1.0}};
        auto results = check_acceptance(report);
        REQUIRE(results.size() == 2);
        CHECK(results[0].pass);
        CHECK(results[1].pass);
        report.agreement_matrix[0][1] = 0.69;
        CHECK_FALSE(check_acceptance(report)[1].pass);
        report.agreement_matrix[0][1] = 0.8;
        report.agreement_matrix[1][1] = 0.9999;
        CHECK_FALSE(check_acceptance(report)[0].pass);
    }
}

TEST_CASE("generate writes one file pair per instance, byte-reproducibly") {
    TempDir tmp("dynamask-test-generate");
    const ExperimentConfig cfg = tiny_rare();
    cmd_generate(cfg, tmp.sub("a"));
    cmd_generate(cfg, tmp.sub("b"));
    CHECK(dir_contents(tmp.path / "a") == dir_contents(tmp.path / "b"));
    for (int k = 1; k <= 2; ++k) {
        CHECK(fs::exists(tmp.path / "a" / "inputs" /
                         ("series_" + std::to_string(k) + ".csv")));
        CHECK(fs::exists(tmp.path / "a" / "targets" /
                         ("target_" + std::to_string(k) + ".json")));
    }
    const WhiteboxDataset ds = load_whitebox_dataset(tmp.sub("a"));
    REQUIRE(ds.instances.size() == 2);
    CHECK(ds.instances[0].inputs.rows() == 40);
    CHECK(ds.instances[0].target.size() == 2 * 25);
    CHECK(ds.instances[0].stream_seed != ds.instances[1].stream_seed);
}

TEST_CASE("generate writes one split world per state seed") {
    TempDir tmp("dynamask-test-generate-state");
    ExperimentConfig cfg = tiny_state();
    cfg.n_seeds = 2;
    cmd_generate(cfg, tmp.path.string());
    for (int j = 1; j <= 2; ++j) {
        const std::string world = tmp.sub("world_" + std::to_string(j));
        const DatasetMeta meta = load_dataset_meta(world);
        CHECK(meta.n_train == 8);
        CHECK(meta.seed == cfg.seed + static_cast<std::uint64_t>(j - 1));
        CHECK(load_hmm_dataset(world).size() == 12);
    }
}

TEST_CASE("train with zero epochs saves the initialization and round-trips") {
    TempDir tmp("dynamask-test-train");
    ExperimentConfig cfg = tiny_state();
    cfg.train.epochs = 0;
    cmd_generate(cfg, tmp.sub("data"));
    cmd_train(cfg, tmp.sub("data"), tmp.sub("model"));

    const fs::path world = tmp.path / "model" / "world_1";
    REQUIRE(fs::exists(world / "weights.json"));
    CHECK(read_bytes(world / "training_curve.csv") == "epoch,loss\n");

    const GruClassifier model =
        GruClassifier::load_weights((world / "weights.json").string());
    const HmmDataset ds = load_hmm_dataset(tmp.sub("data/world_1"));
    HmmDataset test;
    test.T = ds.T;
    for (std::size_t i = 8; i < ds.size(); ++i) {
        test.series.push_back(ds.series[i]);
    }
    const EvalResult eval = evaluate_gru(model, test);
    const json summary =
        json::parse(read_bytes(world / "train_summary.json"));
    CHECK(eval.cross_entropy ==
          doctest::Approx(summary.at("test_cross_entropy").get<double>())
              .epsilon(1e-12));
    CHECK(eval.accuracy ==
          doctest::Approx(summary.at("test_accuracy").get<double>())
              .epsilon(1e-12));

    CHECK_THROWS_AS(cmd_train(tiny_rare(), tmp.sub("data"), tmp.sub("m2")),
                    std::invalid_argument);
}

TEST_CASE("a perfect mask fixture scores aup = aur = 1 in the report") {
    TempDir tmp("dynamask-test-perfect");
    const ExperimentConfig cfg = tiny_rare();
    cmd_generate(cfg, tmp.sub("data"));
    const WhiteboxDataset ds = load_whitebox_dataset(tmp.sub("data"));

    fs::create_directories(tmp.path / "explain" / "masks");
    fs::create_directories(tmp.path / "explain" / "scores");
    for (std::size_t k = 0; k < ds.instances.size(); ++k) {
        const Matrix indicator = ds.instances[k].target.indicator();
        const std::string n = std::to_string(k + 1);
        write_csv_matrix(tmp.sub("explain/masks/mask_" + n + ".csv"),
                         indicator);
        for (const char* method : {"fo", "fp", "ig", "svs"}) {
            write_csv_matrix(
                tmp.sub("explain/scores/" + std::string(method) + "_" + n +
                        ".csv"),
                indicator);
        }
    }
    ExperimentConfig with_maps = cfg;
    with_maps.heatmaps = true;
    const ExperimentReport report = cmd_evaluate(
        with_maps, tmp.sub("data"), tmp.sub("explain"), "", tmp.sub("report"));
    REQUIRE(!report.aggregates.empty());
    CHECK(report.aggregates[0].method == "mask");
    CHECK(report.aggregates[0].mean[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(report.aggregates[0].mean[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fs::exists(tmp.path / "report" / "heatmaps" / "mask_1.pgm"));
    CHECK(fs::exists(tmp.path / "report" / "heatmaps" / "mask_1.csv"));

    SUBCASE("missing or extra instances are a count mismatch") {
        fs::remove(tmp.path / "explain" / "masks" / "mask_2.csv");
        CHECK_THROWS_WITH_AS(
            cmd_evaluate(cfg, tmp.sub("data"), tmp.sub("explain"), "",
                         tmp.sub("r2")),
            doctest::Contains("count mismatch"), std::runtime_error);
        write_csv_matrix(tmp.sub("explain/masks/mask_2.csv"),
                         ds.instances[1].target.indicator());
        write_csv_matrix(tmp.sub("explain/masks/mask_3.csv"),
                         ds.instances[1].target.indicator());
        CHECK_THROWS_WITH_AS(
            cmd_evaluate(cfg, tmp.sub("data"), tmp.sub("explain"), "",
                         tmp.sub("r3")),
            doctest::Contains("count mismatch"), std::runtime_error);
    }
}

TEST_CASE("run_experiment reports are byte-identical across reruns and jobs") {
    TempDir tmp("dynamask-test-run-state");
    ExperimentConfig cfg = tiny_state();
    const ExperimentReport report = run_experiment(cfg, tmp.sub("a"));
    CHECK(report.records.size() == 6);  // mask + five baselines, one world
    CHECK(std::isfinite(report.salient_fraction));
    for (const MetricRecord& r : report.records) {
        CHECK(std::isfinite(r.ce));
        CHECK(std::isfinite(r.acc));
    }

    cfg.jobs = 3;
    run_experiment(cfg, tmp.sub("b"));
    CHECK(read_bytes(tmp.path / "a" / "report.json") ==
          read_bytes(tmp.path / "b" / "report.json"));
    CHECK(read_bytes(tmp.path / "a" / "report.csv") ==
          read_bytes(tmp.path / "b" / "report.csv"));
    CHECK(fs::exists(tmp.path / "a" / "config.json"));
    CHECK(fs::exists(tmp.path / "a" / "explain" / "world_1" / "timings.json"));
}

TEST_CASE("rare pipeline emits mask and baseline rows for every instance") {
    TempDir tmp("dynamask-test-run-rare");
    const ExperimentConfig cfg = tiny_rare();
    const ExperimentReport report = run_experiment(cfg, tmp.path.string());
    CHECK(report.records.size() == 10);  // (mask + fo/fp/ig/svs) x 2
    CHECK(report.aggregates.size() == 5);
    CHECK(report.aggregates[0].method == "mask");
    // Rare experiments have no classifier, so the shift metrics stay null.
    for (const MetricRecord& r : report.records) {
        CHECK(std::isnan(r.ce));
        CHECK(std::isnan(r.acc));
    }
    CHECK(check_acceptance(report).size() == 14);
    const json doc =
        json::parse(read_bytes(tmp.path / "report.json"));
    CHECK(doc.at("config").contains("fit"));
    CHECK_FALSE(doc.at("config").contains("output_dir"));
}

TEST_CASE("agreement pipeline produces a symmetric unit-diagonal matrix") {
    TempDir tmp("dynamask-test-run-agree");
    ExperimentConfig cfg = tiny_state(ExperimentKind::operator_agreement);
    cfg.n_explain = 3;
    const ExperimentReport report = run_experiment(cfg, tmp.path.string());
    REQUIRE(report.agreement_matrix.size() == 3);
    CHECK(report.agreement_ops ==
          std::vector<std::string>{"gaussian-blur", "fade-moving-average",
                                   "fade-past-average"});
    for (std::size_t p = 0; p < 3; ++p) {
        CHECK(report.agreement_matrix[p][p] == 1.0);
        for (std::size_t q = 0; q < 3; ++q) {
            CHECK(report.agreement_matrix[p][q] ==
                  report.agreement_matrix[q][p]);
        }
    }
    CHECK(report.records.size() == 3);
}

TEST_CASE("output directories resolve to the override or a fresh stamp") {
    ExperimentConfig cfg = default_config(ExperimentKind::rare_time, "desk");
    cfg.output_dir = "runs/here";
    CHECK(resolve_output_dir(cfg) == "runs/here");
    cfg.output_dir.clear();
    const std::string stamped = resolve_output_dir(cfg);
    CHECK(stamped.rfind("dynamask-rare-time-", 0) == 0);
    CHECK(stamped.size() == std::string("dynamask-rare-time-").size() + 15);
}
