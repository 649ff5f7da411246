#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynamask/datagen.hpp"

namespace fs = std::filesystem;
using namespace dynamask;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("logistic is stable and symmetric") {
    CHECK(logistic(0.0) == 0.5);
    CHECK(logistic(800.0) == 1.0);
    CHECK(logistic(-800.0) == 0.0);
    CHECK(logistic(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
    CHECK(logistic(3.0) + logistic(-3.0) == doctest::Approx(1.0));
}

TEST_CASE("arma series reproduces the hand recursion column by column") {
    RngStream rng(123);
    RngStream clone(123);
    const std::size_t T = 20, d = 3;
    Matrix x = generate_arma(rng, T, d);
    REQUIRE(x.rows() == T);
    REQUIRE(x.cols() == d);
    // Same draw order, same operation order: bit-exact agreement expected.
    Matrix expected(T, d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t t = 0; t < T; ++t) {
            double v = clone.normal();
            if (t >= 1) v += 0.25 * expected(t - 1, i);
            if (t >= 2) v += 0.10 * expected(t - 2, i);
            if (t >= 3) v += 0.05 * expected(t - 3, i);
            expected(t, i) = v;
        }
    }
    CHECK(x == expected);
    CHECK(x.all_finite());
}

TEST_CASE("arma rejects degenerate shapes") {
    RngStream rng(1);
    CHECK_THROWS_AS(generate_arma(rng, 0, 3), std::invalid_argument);
    CHECK_THROWS_AS(generate_arma(rng, 3, 0), std::invalid_argument);
}

TEST_CASE("rare-feature target: fixed time block, sampled features") {
    RngStream rng(7);
    auto target = make_rare_feature_target(rng, 50, 50, 5);
    CHECK(target.size() == 125);  // 25 time steps x 5 features

    std::set<std::size_t> times, features;
    for (const auto& [t, i] : target.pairs()) {
        times.insert(t);
        features.insert(i);
    }
    REQUIRE(times.size() == 25);
    CHECK(*times.begin() == 12);   // 1-based step 13
    CHECK(*times.rbegin() == 36);  // 1-based step 37
    CHECK(features.size() == 5);
    for (std::size_t i : features) CHECK(i < 50);

    CHECK_THROWS_AS(make_rare_feature_target(rng, 50, 50, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_rare_feature_target(rng, 50, 50, 51),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_rare_feature_target(rng, 36, 50, 5),
                    std::invalid_argument);
}

TEST_CASE("rare-feature target: every feature is reachable") {
    RngStream rng(11);
    std::set<std::size_t> seen;
    for (int rep = 0; rep < 500; ++rep) {
        auto target = make_rare_feature_target(rng, 50, 50, 5);
        for (const auto& [t, i] : target.pairs()) seen.insert(i);
    }
    CHECK(seen.size() == 50);
}

TEST_CASE("rare-time target: sampled block start, fixed feature block") {
    RngStream rng(9);
    auto target = make_rare_time_target(rng, 50, 50, 5);
    CHECK(target.size() == 125);  // 5 time steps x 25 features

    std::set<std::size_t> times, features;
    for (const auto& [t, i] : target.pairs()) {
        times.insert(t);
        features.insert(i);
    }
    REQUIRE(times.size() == 5);
    CHECK(*times.rbegin() - *times.begin() == 4);  // consecutive block
    CHECK(*times.rbegin() <= 49);
    CHECK(features.size() == 25);
    CHECK(*features.begin() == 12);
    CHECK(*features.rbegin() == 36);

    CHECK_THROWS_AS(make_rare_time_target(rng, 50, 50, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_rare_time_target(rng, 50, 50, 47),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_rare_time_target(rng, 50, 36, 5),
                    std::invalid_argument);
}

TEST_CASE("rare-time block start is uniform over its 46 positions") {
    // chi-squared goodness of fit, df = 45; 0.99 quantile is 69.957.
    RngStream rng(20260815);
    const int reps = 46000;
    std::vector<int> counts(46, 0);
    for (int rep = 0; rep < reps; ++rep) {
        auto target = make_rare_time_target(rng, 50, 37, 5);
        counts[target.pairs().front().first] += 1;
    }
    double chi2 = 0.0;
    for (int c : counts) {
        const double diff = c - 1000.0;
        chi2 += diff * diff / 1000.0;
    }
    CHECK(chi2 < 69.957);
}

TEST_CASE("hmm dataset: shapes, targets and label law") {
    RngStream rng(42);
    const std::size_t T = 60;
    auto ds = generate_hmm_dataset(rng, 4, T);
    REQUIRE(ds.size() == 4);
    CHECK(ds.T == T);
    for (const auto& s : ds.series) {
        REQUIRE(s.inputs.rows() == T);
        REQUIRE(s.inputs.cols() == 3);
        REQUIRE(s.states.size() == T);
        REQUIRE(s.labels.size() == T);
        REQUIRE(s.bernoulli.size() == T);
        REQUIRE(s.target.size() == T);  // exactly one salient feature per step
        for (std::size_t t = 0; t < T; ++t) {
            const int st = s.states[t];
            REQUIRE((st == 0 || st == 1));
            REQUIRE((s.labels[t] == 0 || s.labels[t] == 1));
            // Salient cell is feature 2 in state 0, feature 3 in state 1
            // (1-based), and the label parameter is its logistic.
            const std::size_t salient = 1 + static_cast<std::size_t>(st);
            CHECK(s.target.contains(t, salient));
            CHECK(s.bernoulli[t] ==
                  logistic(s.inputs(t, salient)));
        }
        CHECK(s.inputs.all_finite());
    }
}

TEST_CASE("hmm dataset is reproducible and prefix-stable") {
    RngStream a(5), b(5);
    auto ds1 = generate_hmm_dataset(a, 5, 30);
    auto ds2 = generate_hmm_dataset(b, 5, 30);
    REQUIRE(ds1.size() == ds2.size());
    for (std::size_t k = 0; k < ds1.size(); ++k) {
        CHECK(ds1.series[k].inputs == ds2.series[k].inputs);
        CHECK(ds1.series[k].states == ds2.series[k].states);
        CHECK(ds1.series[k].labels == ds2.series[k].labels);
    }
    // Series k depends only on (seed, k), so growing the dataset keeps
    // the existing series unchanged.
    RngStream c(5);
    auto ds3 = generate_hmm_dataset(c, 8, 30);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(ds3.series[k].inputs == ds1.series[k].inputs);
        CHECK(ds3.series[k].labels == ds1.series[k].labels);
    }
}

TEST_CASE("hmm chain statistics match the generator law") {
    RngStream rng(2024);
    auto ds = generate_hmm_dataset(rng, 1, 100000);
    const auto& s = ds.series[0];

    // Transitions: to state 0 with prob 0.1 from either state.
    std::size_t to_zero = 0;
    for (std::size_t t = 1; t < s.states.size(); ++t) {
        if (s.states[t] == 0) ++to_zero;
    }
    const double frac_zero =
        static_cast<double>(to_zero) / static_cast<double>(s.states.size() - 1);
    CHECK(frac_zero == doctest::Approx(0.1).epsilon(0.1));

    // Labels follow Bernoulli(p_t) on average.
    double mean_label = 0.0, mean_p = 0.0;
    for (std::size_t t = 0; t < s.labels.size(); ++t) {
        mean_label += s.labels[t];
        mean_p += s.bernoulli[t];
    }
    mean_label /= static_cast<double>(s.labels.size());
    mean_p /= static_cast<double>(s.labels.size());
    CHECK(std::abs(mean_label - mean_p) < 0.01);

    // Emission means per state.
    const double mu0[3] = {0.1, 1.6, 0.5};
    const double mu1[3] = {-0.1, -0.4, -1.5};
    double sum0[3] = {0, 0, 0}, sum1[3] = {0, 0, 0};
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t t = 0; t < s.states.size(); ++t) {
        if (s.states[t] == 0) {
            ++n0;
            for (std::size_t i = 0; i < 3; ++i) sum0[i] += s.inputs(t, i);
        } else {
            ++n1;
            for (std::size_t i = 0; i < 3; ++i) sum1[i] += s.inputs(t, i);
        }
    }
    REQUIRE(n0 > 5000);
    REQUIRE(n1 > 50000);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(sum0[i] / static_cast<double>(n0) - mu0[i]) < 0.05);
        CHECK(std::abs(sum1[i] / static_cast<double>(n1) - mu1[i]) < 0.02);
    }
}

TEST_CASE("hmm initial state is a fair coin") {
    RngStream rng(99);
    auto ds = generate_hmm_dataset(rng, 4000, 1);
    std::size_t ones = 0;
    for (const auto& s : ds.series) ones += static_cast<std::size_t>(s.states[0]);
    const double frac = static_cast<double>(ones) / 4000.0;
    CHECK(std::abs(frac - 0.5) < 0.04);
}

TEST_CASE("whitebox dataset round-trips through its directory layout") {
    RngStream rng(314);
    WhiteboxDataset ds;
    for (std::size_t k = 0; k < 3; ++k) {
        RngStream sub = rng.substream(k);
        WhiteboxInstance inst;
        inst.stream_seed = sub.seed();
        inst.inputs = generate_arma(sub, 40, 10);
        inst.target = make_rare_feature_target(sub, 40, 10, 2);
        ds.instances.push_back(std::move(inst));
    }
    DatasetMeta meta;
    meta.experiment = "rare-feature";
    meta.seed = 314;
    meta.scale = "desk";

    TempDir dir("dynamask_test_whitebox");
    save_whitebox_dataset(dir.path.string(), ds, meta);
    CHECK(fs::exists(dir.path / "inputs" / "series_1.csv"));
    CHECK(fs::exists(dir.path / "targets" / "target_3.json"));
    CHECK(fs::exists(dir.path / "targets.json"));
    CHECK(fs::exists(dir.path / "meta.json"));

    auto loaded = load_whitebox_dataset(dir.path.string());
    REQUIRE(loaded.instances.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(loaded.instances[k].inputs == ds.instances[k].inputs);
        CHECK(loaded.instances[k].target == ds.instances[k].target);
        CHECK(loaded.instances[k].stream_seed == ds.instances[k].stream_seed);
    }
    auto meta2 = load_dataset_meta(dir.path.string());
    CHECK(meta2.experiment == "rare-feature");
    CHECK(meta2.seed == 314);
    CHECK(meta2.scale == "desk");
    CHECK(meta2.n_train == 0);
}

TEST_CASE("hmm dataset round-trips through its directory layout") {
    RngStream rng(55);
    auto ds = generate_hmm_dataset(rng, 4, 25);
    DatasetMeta meta;
    meta.experiment = "state";
    meta.seed = 55;
    meta.n_train = 3;

    TempDir dir("dynamask_test_hmm");
    save_hmm_dataset(dir.path.string(), ds, meta);
    CHECK(fs::exists(dir.path / "labels.csv"));
    CHECK(fs::exists(dir.path / "states.csv"));

    auto loaded = load_hmm_dataset(dir.path.string());
    REQUIRE(loaded.size() == 4);
    CHECK(loaded.T == 25);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(loaded.series[k].inputs == ds.series[k].inputs);
        CHECK(loaded.series[k].states == ds.series[k].states);
        CHECK(loaded.series[k].labels == ds.series[k].labels);
        CHECK(loaded.series[k].bernoulli == ds.series[k].bernoulli);
        CHECK(loaded.series[k].target == ds.series[k].target);
        CHECK(loaded.series[k].stream_seed == ds.series[k].stream_seed);
    }
    CHECK(load_dataset_meta(dir.path.string()).n_train == 3);
}

TEST_CASE("dataset loaders reject inconsistent directories") {
    RngStream rng(77);
    auto ds = generate_hmm_dataset(rng, 2, 10);
    DatasetMeta meta;
    meta.experiment = "state";

    TempDir dir("dynamask_test_badload");
    save_hmm_dataset(dir.path.string(), ds, meta);

    SUBCASE("missing directory") {
        CHECK_THROWS_AS(load_hmm_dataset((dir.path / "nope").string()),
                        std::runtime_error);
    }
    SUBCASE("targets.json with the wrong series count") {
        std::ofstream out(dir.path / "targets.json");
        out << "[[[1, 2]]]\n";
        out.close();
        CHECK_THROWS_AS(load_hmm_dataset(dir.path.string()),
                        std::runtime_error);
    }
    SUBCASE("label outside {0, 1}") {
        std::ofstream out(dir.path / "labels.csv");
        out << "series,t,label\n";
        for (std::size_t k = 1; k <= 2; ++k) {
            for (std::size_t t = 1; t <= 10; ++t) {
                out << k << ',' << t << ',' << (t == 3 && k == 1 ? 7 : 0)
                    << '\n';
            }
        }
        out.close();
        CHECK_THROWS_AS(load_hmm_dataset(dir.path.string()),
                        std::runtime_error);
    }
    SUBCASE("missing rows in states.csv") {
        std::ofstream out(dir.path / "states.csv");
        out << "series,t,state\n1,1,0\n";
        out.close();
        CHECK_THROWS_AS(load_hmm_dataset(dir.path.string()),
                        std::runtime_error);
    }
}
