#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixprop/common.hpp"
#include "mixprop/cpe.hpp"
#include "mixprop/roc.hpp"
#include "mixprop/synth.hpp"

namespace mixprop::harness {

/// One benchmark input: a file-backed dataset or a synthetic spec.
struct DatasetSpec {
    std::string name;
    std::string csv_path;
    std::string sparse_path;
    std::optional<synth::SyntheticSpec> synthetic;
};

struct BenchmarkConfig {
    std::vector<DatasetSpec> datasets;
    std::vector<std::string> methods;
    /// Proportion assigned to the last class; the remaining classes share
    /// 1 - p proportionally to their base weights.
    std::vector<double> proportion_grid = {0.01, 0.1, 0.2, 0.3, 0.4, 0.5,
                                           0.6,  0.7, 0.8, 0.9, 0.99};
    int permutations = 10;
    Index train_size = 400;  // per class
    Index test_size = 400;
    bool standardize = true;
    bool score_raw_values = false;  // l1 on raw instead of clamped values
    double level = 0.95;            // CI coverage level
    int ci_trials = 50;
    cpe::CpeConfig estimator;
    std::string out_dir;  // empty: no files written
    int jobs = 1;
};

/// Parses the JSON config format used by the CLI (see README for schema).
BenchmarkConfig config_from_json(const std::string& text);
BenchmarkConfig load_config(const std::string& path);

struct BenchmarkRow {
    std::string dataset;
    std::string method;
    double proportion = 0.0;  // grid value for the last class
    int permutation = 0;
    double l1 = 0.0;
    Vector estimate;
    double wall_ms = 0.0;
    bool failed = false;
    std::string error;
};

struct Aggregate {
    std::string dataset;  // empty in the per-proportion table
    std::string method;
    double proportion = -1.0;  // -1 in the per-dataset table
    double mean_l1 = 0.0;
    double std_l1 = 0.0;
    int count = 0;
};

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;  // sorted (dataset, method, proportion, permutation)
    std::vector<Aggregate> by_dataset_method;
    std::vector<Aggregate> by_method_proportion;
    int failures = 0;
    std::optional<roc::RocEnvelope> envelope;  // payload of the emit-roc pipeline
};

struct CoverageReport {
    int trials = 0;
    int pairs = 0;    // (trial, class) pairs scored
    int covered = 0;  // truth inside [lower, upper]
    double coverage = 0.0;
    double mean_width = 0.0;
    std::vector<std::pair<std::string, double>> per_dataset;
    int failures = 0;
};

/// Sum of absolute per-class differences.
double l1_error(const Vector& est, const Vector& truth);

/// Fully-observed sweep over (dataset x proportion x permutation); every
/// estimator scored per cell.  Cell failures are recorded, never fatal.
BenchmarkReport run_cpe_benchmark(const BenchmarkConfig& cfg, std::uint64_t master_seed);

/// Last class hidden from every method; comparators run on the reduced
/// class set and are zero-padded, the incomplete estimator adapts.
BenchmarkReport run_anomaly_benchmark(const BenchmarkConfig& cfg, std::uint64_t master_seed);

/// Fraction of (trial, class) pairs whose true proportion falls inside the
/// estimated interval.
CoverageReport run_ci_coverage(const BenchmarkConfig& cfg, std::uint64_t master_seed);

/// Builds one fully observed trial (first dataset, first grid proportion)
/// and returns a report whose payload is the bootstrap ROC band for the
/// test-vs-class-1 detection problem; feed it to emit_plot_data's roc kind.
BenchmarkReport run_roc_curve(const BenchmarkConfig& cfg, std::uint64_t master_seed);

/// Parses a synthetic class-mixture description (same schema as a dataset's
/// "synthetic" block in the benchmark config) from JSON text.
synth::SyntheticSpec synthetic_spec_from_json(const std::string& text);

/// Writes plot-ready CSV: kind "proportion-curve" (proportion, method,
/// mean_l1, std_l1), "dataset-table" (dataset, method, mean_l1, std_l1,
/// count), or "roc" (alpha, p, lower, upper; needs report.envelope).
void emit_plot_data(const BenchmarkReport& report, const std::string& kind,
                    const std::string& path);

/// Full report as JSON (rows + aggregates).
std::string report_to_json(const BenchmarkReport& report);
std::string coverage_to_json(const CoverageReport& report);

}  // namespace mixprop::harness
