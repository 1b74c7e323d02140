// Command-line driver: benchmark sweeps, anomaly adaptation, CI coverage,
// histogram-rule consistency runs, and ROC band export.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mixprop/harness.hpp"
#include "mixprop/mcar.hpp"

namespace {

using mixprop::Index;
using nlohmann::json;

struct CommonArgs {
    std::string config;
    std::uint64_t seed = 1;
    std::string out;
    int jobs = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed, "master RNG seed");
    cmd->add_option("--out", args.out, "output directory (overrides config)");
    cmd->add_option("--jobs", args.jobs, "concurrent cells (overrides config)");
}

mixprop::harness::BenchmarkConfig load(const CommonArgs& args) {
    auto cfg = mixprop::harness::load_config(args.config);
    if (!args.out.empty()) cfg.out_dir = args.out;
    if (args.jobs > 0) cfg.jobs = args.jobs;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mixprop::MixpropError("cannot open config file: " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

int report_benchmark(const mixprop::harness::BenchmarkReport& report,
                     const mixprop::harness::BenchmarkConfig& cfg) {
    if (!cfg.out_dir.empty()) {
        mixprop::harness::emit_plot_data(report, "proportion-curve",
                                         cfg.out_dir + "/proportion_curve.csv");
        mixprop::harness::emit_plot_data(report, "dataset-table",
                                         cfg.out_dir + "/dataset_table.csv");
    }
    for (const auto& agg : report.by_dataset_method)
        std::cout << agg.dataset << " / " << agg.method << ": mean l1 " << agg.mean_l1 << " +- "
                  << agg.std_l1 << " (" << agg.count << " cells)\n";
    std::cout << report.rows.size() << " rows, " << report.failures << " failures\n";
    return report.failures == 0 ? 0 : 1;
}

int run_mcar(const CommonArgs& args) {
    json j = json::parse(slurp(args.config));
    auto spec = mixprop::harness::synthetic_spec_from_json(j.at("synthetic").dump());
    mixprop::mcar::EvaluationConfig cfg;
    for (auto n : j.at("sizes").get<std::vector<std::int64_t>>())
        cfg.sizes.push_back(static_cast<Index>(n));
    if (j.contains("ks"))
        for (auto k : j.at("ks").get<std::vector<std::int64_t>>())
            cfg.ks.push_back(static_cast<Index>(k));
    cfg.bayes_mc = j.value("bayes_mc", static_cast<std::int64_t>(cfg.bayes_mc));
    cfg.use_true_proportions = j.value("use_true_proportions", cfg.use_true_proportions);

    auto report = mixprop::mcar::evaluate_rule(spec, cfg, args.seed);
    json out{{"sizes", report.sizes},
             {"ks", report.ks},
             {"excess_risk", report.excess_risk},
             {"estimation_error", report.estimation_error},
             {"approximation_error", report.approximation_error},
             {"bayes_risk", report.bayes_risk}};
    if (!args.out.empty()) {
        std::filesystem::create_directories(args.out);
        std::ofstream f(args.out + "/mcar.json");
        f << out.dump(2);
    }
    for (std::size_t i = 0; i < report.sizes.size(); ++i)
        std::cout << "n=" << report.sizes[i] << " k=" << report.ks[i] << ": excess risk "
                  << report.excess_risk[i] << "\n";
    std::cout << "bayes risk " << report.bayes_risk << "\n";
    return 0;
}

int run_roc(const CommonArgs& args) {
    auto cfg = load(args);
    auto report = mixprop::harness::run_roc_curve(cfg, args.seed);
    std::string dir = cfg.out_dir.empty() ? "." : cfg.out_dir;
    std::filesystem::create_directories(dir);
    mixprop::harness::emit_plot_data(report, "roc", dir + "/roc.csv");
    std::cout << "wrote " << dir << "/roc.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"class proportion estimation toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    auto* cpe = app.add_subcommand("run-cpe-benchmark",
                                   "proportion sweep with all classes observed");
    auto* anomaly = app.add_subcommand("run-anomaly-benchmark",
                                       "sweep with the last class hidden from training");
    auto* coverage = app.add_subcommand("run-ci-coverage",
                                        "confidence interval coverage over repeated trials");
    auto* mcar = app.add_subcommand("run-mcar",
                                    "histogram anomaly-rejection consistency run");
    auto* roc = app.add_subcommand("emit-roc", "export one bootstrap ROC band as CSV");
    for (auto* cmd : {cpe, anomaly, coverage, mcar, roc}) add_common(cmd, args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cpe->parsed()) {
            auto cfg = load(args);
            return report_benchmark(mixprop::harness::run_cpe_benchmark(cfg, args.seed), cfg);
        }
        if (anomaly->parsed()) {
            auto cfg = load(args);
            return report_benchmark(mixprop::harness::run_anomaly_benchmark(cfg, args.seed), cfg);
        }
        if (coverage->parsed()) {
            auto cfg = load(args);
            auto report = mixprop::harness::run_ci_coverage(cfg, args.seed);
            std::cout << "coverage " << report.coverage << " over " << report.pairs
                      << " pairs, mean width " << report.mean_width << ", " << report.failures
                      << " failures\n";
            return report.failures == 0 ? 0 : 1;
        }
        if (mcar->parsed()) return run_mcar(args);
        if (roc->parsed()) return run_roc(args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
