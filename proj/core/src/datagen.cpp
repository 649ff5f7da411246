#include "dynamask/datagen.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace dynamask {

double logistic(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Matrix generate_arma(RngStream& rng, std::size_t T, std::size_t d) {
    if (T == 0 || d == 0) {
        throw std::invalid_argument("generate_arma: T and d must be positive");
    }
    Matrix x(T, d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t t = 0; t < T; ++t) {
            double v = rng.normal();
            if (t >= 1) v += 0.25 * x(t - 1, i);
            if (t >= 2) v += 0.10 * x(t - 2, i);
            if (t >= 3) v += 0.05 * x(t - 3, i);
            x(t, i) = v;
        }
    }
    return x;
}

namespace {

// 1-based {13..37} as 0-based indices; the fixed 25-element block shared by
// both rare tasks.
std::vector<std::size_t> fixed_block_indices() {
    std::vector<std::size_t> v(25);
    for (std::size_t k = 0; k < 25; ++k) v[k] = 12 + k;
    return v;
}

}  // namespace

SaliencyTarget make_rare_feature_target(RngStream& rng, std::size_t T,
                                        std::size_t d, std::size_t n_feat) {
    if (n_feat == 0 || n_feat > d) {
        throw std::invalid_argument(
            "make_rare_feature_target: need 1 <= n_feat <= d");
    }
    if (T < 37) {
        throw std::invalid_argument(
            "make_rare_feature_target: time block {13..37} needs T >= 37");
    }
    const auto features = rng.sample_without_replacement(d, n_feat);
    return SaliencyTarget::from_product(fixed_block_indices(), features, T, d);
}

SaliencyTarget make_rare_time_target(RngStream& rng, std::size_t T,
                                     std::size_t d, std::size_t n_time) {
    if (n_time == 0 || n_time + 4 > T) {
        throw std::invalid_argument(
            "make_rare_time_target: need 1 <= n_time <= T - 4");
    }
    if (d < 37) {
        throw std::invalid_argument(
            "make_rare_time_target: feature block {13..37} needs d >= 37");
    }
    const std::size_t t_star =
        static_cast<std::size_t>(rng.uniform_below(T - n_time + 1));
    std::vector<std::size_t> times(n_time);
    for (std::size_t k = 0; k < n_time; ++k) times[k] = t_star + k;
    return SaliencyTarget::from_product(times, fixed_block_indices(), T, d);
}

namespace {

struct HmmLaw {
    std::vector<std::vector<double>> mu{{0.1, 1.6, 0.5}, {-0.1, -0.4, -1.5}};
    Matrix chol[2];
    // Transition rows: from either state, next state is 0 w.p. 0.1.
    double to_zero = 0.1;

    HmmLaw() {
        chol[0] = cholesky_lower(Matrix::from_rows(
            {{0.8, 0.0, 0.0}, {0.0, 0.8, 0.01}, {0.0, 0.01, 0.8}}));
        chol[1] = cholesky_lower(Matrix::from_rows(
            {{0.8, 0.01, 0.0}, {0.01, 0.8, 0.0}, {0.0, 0.0, 0.8}}));
    }
};

HmmSeries generate_hmm_series(RngStream& rng, std::size_t T,
                              const HmmLaw& law) {
    HmmSeries s;
    s.stream_seed = rng.seed();
    s.inputs = Matrix(T, 3, 0.0);
    s.states.resize(T);
    s.labels.resize(T);
    s.bernoulli.resize(T);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(T);

    int state = rng.uniform01() < 0.5 ? 0 : 1;
    for (std::size_t t = 0; t < T; ++t) {
        if (t > 0) state = rng.uniform01() < law.to_zero ? 0 : 1;
        const auto x = sample_multivariate_normal_chol(
            rng, law.mu[static_cast<std::size_t>(state)],
            law.chol[static_cast<std::size_t>(state)]);
        for (std::size_t i = 0; i < 3; ++i) s.inputs(t, i) = x[i];
        const std::size_t salient_feature = 1 + static_cast<std::size_t>(state);
        const double p = logistic(s.inputs(t, salient_feature));
        s.states[t] = state;
        s.bernoulli[t] = p;
        s.labels[t] = rng.uniform01() < p ? 1 : 0;
        pairs.emplace_back(t, salient_feature);
    }
    s.target = SaliencyTarget::from_pairs(std::move(pairs), T, 3);
    return s;
}

}  // namespace

HmmDataset generate_hmm_dataset(RngStream& rng, std::size_t n_series,
                                std::size_t T) {
    if (n_series == 0 || T == 0) {
        throw std::invalid_argument(
            "generate_hmm_dataset: n_series and T must be positive");
    }
    static const HmmLaw law;
    HmmDataset ds;
    ds.T = T;
    ds.series.reserve(n_series);
    for (std::size_t k = 0; k < n_series; ++k) {
        RngStream sub = rng.substream(k);
        ds.series.push_back(generate_hmm_series(sub, T, law));
    }
    return ds;
}

namespace {

json target_to_json(const SaliencyTarget& target) {
    json arr = json::array();
    for (const auto& [t, i] : target.pairs()) {
        arr.push_back({t + 1, i + 1});  // serialized form is 1-based
    }
    return arr;
}

SaliencyTarget target_from_json(const json& arr, std::size_t rows,
                                std::size_t cols) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& e : arr) {
        if (!e.is_array() || e.size() != 2) {
            throw std::runtime_error("targets.json: entries must be [t, i] pairs");
        }
        const long long t = e[0].get<long long>();
        const long long i = e[1].get<long long>();
        if (t < 1 || i < 1) {
            throw std::runtime_error("targets.json: indices are 1-based");
        }
        pairs.emplace_back(static_cast<std::size_t>(t - 1),
                           static_cast<std::size_t>(i - 1));
    }
    return SaliencyTarget::from_pairs(std::move(pairs), rows, cols);
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << j.dump(2) << '\n';
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return json::parse(in);
}

json meta_to_json(const DatasetMeta& meta, std::size_t n_series, std::size_t T,
                  std::size_t d, const std::vector<std::uint64_t>& seeds) {
    json j{{"format_version", 1},
           {"experiment", meta.experiment},
           {"seed", meta.seed},
           {"scale", meta.scale},
           {"n_series", n_series},
           {"T", T},
           {"d", d}};
    if (meta.n_train > 0) j["n_train"] = meta.n_train;
    j["series_seeds"] = seeds;
    return j;
}

std::string series_file(std::size_t k) {
    return "series_" + std::to_string(k + 1) + ".csv";
}

void write_long_csv(const fs::path& path, const char* value_name,
                    const HmmDataset& ds,
                    const std::vector<int> HmmSeries::* field) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << "series,t," << value_name << '\n';
    for (std::size_t k = 0; k < ds.series.size(); ++k) {
        const auto& values = ds.series[k].*field;
        for (std::size_t t = 0; t < values.size(); ++t) {
            out << (k + 1) << ',' << (t + 1) << ',' << values[t] << '\n';
        }
    }
}

std::vector<std::vector<int>> read_long_csv(const fs::path& path,
                                            std::size_t n_series,
                                            std::size_t T) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::vector<int>> out(n_series, std::vector<int>(T, -1));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t p1 = line.find(',');
        std::size_t p2 = line.find(',', p1 + 1);
        if (p1 == std::string::npos || p2 == std::string::npos) {
            throw std::runtime_error("malformed row in " + path.string());
        }
        const std::size_t k = std::stoull(line.substr(0, p1));
        const std::size_t t = std::stoull(line.substr(p1 + 1, p2 - p1 - 1));
        const int v = std::stoi(line.substr(p2 + 1));
        if (k < 1 || k > n_series || t < 1 || t > T) {
            throw std::runtime_error("index out of range in " + path.string());
        }
        out[k - 1][t - 1] = v;
    }
    for (const auto& row : out) {
        for (int v : row) {
            if (v < 0) {
                throw std::runtime_error("missing entries in " + path.string());
            }
        }
    }
    return out;
}

}  // namespace

void save_whitebox_dataset(const std::string& dir, const WhiteboxDataset& ds,
                           const DatasetMeta& meta) {
    if (ds.instances.empty()) {
        throw std::invalid_argument("save_whitebox_dataset: empty dataset");
    }
    const std::size_t T = ds.instances.front().inputs.rows();
    const std::size_t d = ds.instances.front().inputs.cols();
    fs::create_directories(fs::path(dir) / "inputs");
    fs::create_directories(fs::path(dir) / "targets");

    json all_targets = json::array();
    std::vector<std::uint64_t> seeds;
    for (std::size_t k = 0; k < ds.instances.size(); ++k) {
        const auto& inst = ds.instances[k];
        if (inst.inputs.rows() != T || inst.inputs.cols() != d) {
            throw std::invalid_argument(
                "save_whitebox_dataset: inconsistent instance shapes");
        }
        write_csv_matrix((fs::path(dir) / "inputs" / series_file(k)).string(),
                         inst.inputs);
        const json tj = target_to_json(inst.target);
        write_json_file(fs::path(dir) / "targets" /
                            ("target_" + std::to_string(k + 1) + ".json"),
                        tj);
        all_targets.push_back(tj);
        seeds.push_back(inst.stream_seed);
    }
    write_json_file(fs::path(dir) / "targets.json", all_targets);
    write_json_file(fs::path(dir) / "meta.json",
                    meta_to_json(meta, ds.instances.size(), T, d, seeds));
}

WhiteboxDataset load_whitebox_dataset(const std::string& dir) {
    const json meta = read_json_file(fs::path(dir) / "meta.json");
    const std::size_t n = meta.at("n_series").get<std::size_t>();
    const std::size_t T = meta.at("T").get<std::size_t>();
    const std::size_t d = meta.at("d").get<std::size_t>();
    const json targets = read_json_file(fs::path(dir) / "targets.json");
    if (targets.size() != n) {
        throw std::runtime_error("targets.json: wrong number of series");
    }
    std::vector<std::uint64_t> seeds(n, 0);
    if (meta.contains("series_seeds")) {
        seeds = meta["series_seeds"].get<std::vector<std::uint64_t>>();
    }
    WhiteboxDataset ds;
    for (std::size_t k = 0; k < n; ++k) {
        WhiteboxInstance inst;
        inst.inputs =
            read_csv_matrix((fs::path(dir) / "inputs" / series_file(k)).string());
        if (inst.inputs.rows() != T || inst.inputs.cols() != d) {
            throw std::runtime_error("series shape disagrees with meta.json");
        }
        inst.target = target_from_json(targets[k], T, d);
        inst.stream_seed = seeds[k];
        ds.instances.push_back(std::move(inst));
    }
    return ds;
}

void save_hmm_dataset(const std::string& dir, const HmmDataset& ds,
                      const DatasetMeta& meta) {
    if (ds.series.empty()) {
        throw std::invalid_argument("save_hmm_dataset: empty dataset");
    }
    fs::create_directories(fs::path(dir) / "inputs");
    json all_targets = json::array();
    std::vector<std::uint64_t> seeds;
    for (std::size_t k = 0; k < ds.series.size(); ++k) {
        write_csv_matrix((fs::path(dir) / "inputs" / series_file(k)).string(),
                         ds.series[k].inputs);
        all_targets.push_back(target_to_json(ds.series[k].target));
        seeds.push_back(ds.series[k].stream_seed);
    }
    write_long_csv(fs::path(dir) / "labels.csv", "label", ds,
                   &HmmSeries::labels);
    write_long_csv(fs::path(dir) / "states.csv", "state", ds,
                   &HmmSeries::states);
    write_json_file(fs::path(dir) / "targets.json", all_targets);
    write_json_file(fs::path(dir) / "meta.json",
                    meta_to_json(meta, ds.series.size(), ds.T, 3, seeds));
}

HmmDataset load_hmm_dataset(const std::string& dir) {
    const json meta = read_json_file(fs::path(dir) / "meta.json");
    const std::size_t n = meta.at("n_series").get<std::size_t>();
    const std::size_t T = meta.at("T").get<std::size_t>();
    const json targets = read_json_file(fs::path(dir) / "targets.json");
    if (targets.size() != n) {
        throw std::runtime_error("targets.json: wrong number of series");
    }
    const auto labels = read_long_csv(fs::path(dir) / "labels.csv", n, T);
    const auto states = read_long_csv(fs::path(dir) / "states.csv", n, T);
    std::vector<std::uint64_t> seeds(n, 0);
    if (meta.contains("series_seeds")) {
        seeds = meta["series_seeds"].get<std::vector<std::uint64_t>>();
    }

    HmmDataset ds;
    ds.T = T;
    for (std::size_t k = 0; k < n; ++k) {
        HmmSeries s;
        s.inputs =
            read_csv_matrix((fs::path(dir) / "inputs" / series_file(k)).string());
        if (s.inputs.rows() != T || s.inputs.cols() != 3) {
            throw std::runtime_error("series shape disagrees with meta.json");
        }
        s.labels = labels[k];
        s.states = states[k];
        s.bernoulli.resize(T);
        for (std::size_t t = 0; t < T; ++t) {
            if (s.states[t] != 0 && s.states[t] != 1) {
                throw std::runtime_error("states.csv: states must be 0 or 1");
            }
            if (s.labels[t] != 0 && s.labels[t] != 1) {
                throw std::runtime_error("labels.csv: labels must be 0 or 1");
            }
            s.bernoulli[t] =
                logistic(s.inputs(t, 1 + static_cast<std::size_t>(s.states[t])));
        }
        s.target = target_from_json(targets[k], T, 3);
        s.stream_seed = seeds[k];
        ds.series.push_back(std::move(s));
    }
    return ds;
}

DatasetMeta load_dataset_meta(const std::string& dir) {
    const json j = read_json_file(fs::path(dir) / "meta.json");
    DatasetMeta meta;
    meta.experiment = j.value("experiment", std::string{});
    meta.seed = j.value("seed", std::uint64_t{0});
    meta.scale = j.value("scale", std::string{"desk"});
    meta.n_train = j.value("n_train", std::size_t{0});
    return meta;
}

}  // namespace dynamask
