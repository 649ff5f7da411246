#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "harness.hpp"

using nlohmann::json;
namespace harness = dynamask::harness;

namespace {

struct CommonFlags {
    std::string config_path;
    std::vector<std::string> sets;
    std::string experiment;
    std::string scale;
    std::string out;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string data;
    std::string model;
    std::string explain_dir;
    bool heatmaps = false;

    CLI::Option* experiment_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* scale_opt = nullptr;
    CLI::Option* out_opt = nullptr;
    CLI::Option* jobs_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file");
    cmd->add_option("--set", f.sets,
                    "config override as dotted.path=value (repeatable)");
    f.experiment_opt = cmd->add_option(
        "--experiment", f.experiment,
        "rare-feature | rare-time | state | operator-agreement");
    f.seed_opt = cmd->add_option("--seed", f.seed, "base seed");
    f.scale_opt = cmd->add_option("--scale", f.scale, "desk | paper")
                      ->check(CLI::IsMember({"desk", "paper"}));
    f.out_opt = cmd->add_option("--out", f.out, "output directory");
    f.jobs_opt = cmd->add_option("--jobs", f.jobs, "worker threads");
}

std::size_t jobs_from_env() {
    const char* env = std::getenv("DYNAMASK_JOBS");
    if (env == nullptr || *env == '\0') return 0;
    try {
        const long long v = std::stoll(env);
        if (v < 1) throw std::out_of_range("nonpositive");
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw std::invalid_argument(
            "DYNAMASK_JOBS must be a positive integer, got '" +
            std::string(env) + "'");
    }
}

harness::ExperimentConfig build_config(const CommonFlags& f,
                                       const std::string& forced_experiment =
                                           std::string{}) {
    json file_doc = json::object();
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) {
            throw std::invalid_argument("cannot read config file " +
                                        f.config_path);
        }
        file_doc = json::parse(in);
        if (!file_doc.is_object()) {
            throw std::invalid_argument("config file must hold a JSON object");
        }
    }
    std::string experiment =
        !forced_experiment.empty() ? forced_experiment
        : f.experiment_opt->count() > 0
            ? f.experiment
            : file_doc.value("experiment", std::string{});
    if (experiment.empty()) {
        throw std::invalid_argument(
            "no experiment selected; pass --experiment or set \"experiment\" "
            "in the config file");
    }
    const std::string scale = f.scale_opt->count() > 0
                                  ? f.scale
                                  : file_doc.value("scale", std::string{"desk"});

    json doc = harness::config_to_json(
        harness::default_config(harness::experiment_from_name(experiment),
                                scale));
    doc.merge_patch(file_doc);
    doc["experiment"] = experiment;
    doc["scale"] = scale;
    for (const std::string& s : f.sets) harness::apply_override(doc, s);
    if (f.seed_opt->count() > 0) doc["seed"] = f.seed;
    if (f.out_opt->count() > 0) doc["output_dir"] = f.out;
    if (f.jobs_opt->count() > 0) {
        doc["jobs"] = f.jobs;
    } else if (const std::size_t env_jobs = jobs_from_env(); env_jobs > 0) {
        doc["jobs"] = env_jobs;
    }
    if (f.heatmaps) doc["heatmaps"] = true;
    return harness::config_from_json(doc);
}

std::string metric_cell(double v) {
    if (!std::isfinite(v)) return "      -";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%7.4f", v);
    return buf;
}

void print_aggregates(const harness::ExperimentReport& report) {
    std::printf("%-8s", "method");
    for (const std::string& name : harness::kMetricNames) {
        std::printf("  %11s", name.c_str());
    }
    std::printf("\n");
    for (const harness::MethodAggregate& a : report.aggregates) {
        std::printf("%-8s", a.method.c_str());
        for (std::size_t m = 0; m < harness::kMetricNames.size(); ++m) {
            std::printf("  %s+-%.2f", metric_cell(a.mean[m]).c_str(),
                        std::isfinite(a.stddev[m]) ? a.stddev[m] : 0.0);
        }
        std::printf("\n");
    }
    if (!report.agreement_matrix.empty()) {
        std::printf("pairwise agreement:\n");
        for (std::size_t p = 0; p < report.agreement_ops.size(); ++p) {
            std::printf("  %-20s", report.agreement_ops[p].c_str());
            for (double v : report.agreement_matrix[p]) {
                std::printf(" %6.3f", v);
            }
            std::printf("\n");
        }
    }
    if (std::isfinite(report.salient_fraction)) {
        std::printf("mask salient fraction: %.4f\n", report.salient_fraction);
    }
    std::fflush(stdout);
}

int print_acceptance(const std::vector<harness::CriterionResult>& results) {
    bool all_pass = true;
    std::printf("acceptance criteria:\n");
    for (const harness::CriterionResult& r : results) {
        std::printf("  [%s] %s — %s\n", r.pass ? "PASS" : "FAIL",
                    r.name.c_str(), r.detail.c_str());
        all_pass = all_pass && r.pass;
    }
    std::fflush(stdout);
    return all_pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamask: dynamic saliency masks for sequence models"};
    app.require_subcommand(1);
    int exit_code = 0;

    CommonFlags gen_flags;
    CLI::App* generate =
        app.add_subcommand("generate", "write a dataset for an experiment");
    add_common(generate, gen_flags);
    generate->callback([&] {
        const harness::ExperimentConfig cfg = build_config(gen_flags);
        const std::string out = harness::resolve_output_dir(cfg);
        harness::cmd_generate(cfg, out);
        std::printf("dataset written to %s\n", out.c_str());
    });

    CommonFlags train_flags;
    CLI::App* train =
        app.add_subcommand("train", "train the sequence classifier");
    add_common(train, train_flags);
    train->add_option("--data", train_flags.data, "dataset directory")
        ->required();
    train->callback([&] {
        const harness::ExperimentConfig cfg = build_config(train_flags);
        const std::string out = harness::resolve_output_dir(cfg);
        harness::cmd_train(cfg, train_flags.data, out);
        std::printf("model written to %s\n", out.c_str());
    });

    CommonFlags explain_flags;
    CLI::App* explain =
        app.add_subcommand("explain", "fit masks and score baselines");
    add_common(explain, explain_flags);
    explain->add_option("--data", explain_flags.data, "dataset directory")
        ->required();
    explain->add_option("--model", explain_flags.model,
                        "trained model directory (state experiments)");
    explain->callback([&] {
        const harness::ExperimentConfig cfg = build_config(explain_flags);
        const std::string out = harness::resolve_output_dir(cfg);
        harness::cmd_explain(cfg, explain_flags.data, explain_flags.model, out);
        std::printf("explanations written to %s\n", out.c_str());
    });

    CommonFlags eval_flags;
    CLI::App* evaluate =
        app.add_subcommand("evaluate", "compute metrics and write the report");
    add_common(evaluate, eval_flags);
    evaluate->add_option("--data", eval_flags.data, "dataset directory")
        ->required();
    evaluate
        ->add_option("--explain", eval_flags.explain_dir,
                     "explanation directory from `explain`")
        ->required();
    evaluate->add_option("--model", eval_flags.model,
                         "trained model directory (state experiments)");
    evaluate->add_flag("--heatmaps", eval_flags.heatmaps,
                       "also export mask heatmaps (PGM + CSV)");
    evaluate->callback([&] {
        const harness::ExperimentConfig cfg = build_config(eval_flags);
        const std::string out = harness::resolve_output_dir(cfg);
        const harness::ExperimentReport report = harness::cmd_evaluate(
            cfg, eval_flags.data, eval_flags.explain_dir, eval_flags.model,
            out);
        print_aggregates(report);
        std::printf("report written to %s\n", out.c_str());
    });

    CommonFlags repro_flags;
    CLI::App* reproduce = app.add_subcommand(
        "reproduce", "run an experiment end to end and check its criteria");
    add_common(reproduce, repro_flags);
    std::string repro_name;
    reproduce->add_option("name", repro_name, "experiment to reproduce")
        ->required();
    reproduce->callback([&] {
        const harness::ExperimentConfig cfg =
            build_config(repro_flags, repro_name);
        const std::string out = harness::resolve_output_dir(cfg);
        const harness::ExperimentReport report =
            harness::run_experiment(cfg, out);
        print_aggregates(report);
        exit_code = print_acceptance(harness::check_acceptance(report));
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return exit_code;
}
