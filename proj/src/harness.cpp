#include "mixprop/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>

#include "mixprop/dataio.hpp"
#include "mixprop/rng.hpp"

namespace mixprop::harness {

namespace {

using nlohmann::json;

Vector to_vector(const json& arr) {
    Vector v(static_cast<Index>(arr.size()));
    for (Index i = 0; i < v.size(); ++i) v[i] = arr[static_cast<std::size_t>(i)].get<double>();
    return v;
}

std::vector<double> to_std(const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

synth::SyntheticSpec synthetic_from_json(const json& j) {
    synth::SyntheticSpec spec;
    spec.dim = j.at("dim").get<Index>();
    spec.proportions = to_vector(j.at("proportions"));
    for (const auto& cls : j.at("classes")) {
        synth::ClassDensity c;
        if (cls.contains("atoms")) {
            const auto& a = cls.at("atoms");
            const auto& locs = a.at("locations");
            c.atom_locations.resize(static_cast<Index>(locs.size()), spec.dim);
            for (Index r = 0; r < c.atom_locations.rows(); ++r)
                c.atom_locations.row(r) = to_vector(locs[static_cast<std::size_t>(r)]).transpose();
            c.atom_masses = to_vector(a.at("masses"));
            c.atom_jitter = a.value("jitter", 0.0);
        } else {
            for (const auto& comp : cls.at("components")) {
                synth::GaussianComponent g;
                g.mean = to_vector(comp.at("mean"));
                g.stddev = to_vector(comp.at("stddev"));
                g.weight = comp.value("weight", 1.0);
                g.truncate_radius = comp.value("truncate_radius", 0.0);
                c.components.push_back(std::move(g));
            }
        }
        spec.classes.push_back(std::move(c));
    }
    synth::validate_spec(spec);
    return spec;
}

struct PreparedDataset {
    DatasetSpec spec;
    std::optional<dataio::Dataset> data;  // file-backed inputs, loaded once
    int class_count = 0;
    Vector base_weights;  // original class composition
};

PreparedDataset prepare(const DatasetSpec& ds) {
    PreparedDataset out;
    out.spec = ds;
    if (ds.synthetic) {
        out.class_count = static_cast<int>(ds.synthetic->classes.size());
        out.base_weights = ds.synthetic->proportions;
        return out;
    }
    dataio::Dataset data =
        !ds.csv_path.empty() ? dataio::load_csv(ds.csv_path) : dataio::load_sparse(ds.sparse_path);
    out.class_count = data.class_count;
    out.base_weights.resize(data.class_count);
    for (int c = 1; c <= data.class_count; ++c)
        out.base_weights[c - 1] = static_cast<double>(data.count_of(c));
    out.base_weights /= out.base_weights.sum();
    out.data = std::move(data);
    return out;
}

/// Last class gets p; the others share 1 - p proportionally to their base
/// weights (the benchmark protocol's "shrink proportionately").
Vector target_proportions(const PreparedDataset& ds, double p) {
    const int m = ds.class_count;
    Vector target(m);
    double rest = ds.base_weights.head(m - 1).sum();
    for (int c = 0; c < m - 1; ++c)
        target[c] = (1.0 - p) * (rest > 0.0 ? ds.base_weights[c] / rest : 1.0 / (m - 1));
    target[m - 1] = p;
    return target;
}

dataio::CpeTrial build_trial(const PreparedDataset& ds, const BenchmarkConfig& cfg,
                             const Vector& target, bool unobserved_last, std::uint64_t seed) {
    dataio::CpeTrial trial;
    if (ds.spec.synthetic) {
        synth::SyntheticSpec spec = *ds.spec.synthetic;
        spec.proportions = target;
        std::vector<Index> train_sizes(static_cast<std::size_t>(ds.class_count), cfg.train_size);
        trial = synth::make_synthetic_trial(spec, train_sizes, cfg.test_size, unobserved_last,
                                            seed);
    } else {
        std::vector<Index> train_sizes(static_cast<std::size_t>(ds.class_count), cfg.train_size);
        trial = dataio::make_cpe_trial(*ds.data, target, train_sizes, cfg.test_size,
                                       unobserved_last, seed);
    }
    return cfg.standardize ? dataio::standardize_trial(trial) : trial;
}

/// Comparators in the anomaly setting see only the observed classes: same
/// training sets and test sample, class count reduced by one.
dataio::CpeTrial reduce_trial(const dataio::CpeTrial& trial) {
    dataio::CpeTrial reduced = trial;
    reduced.class_count = trial.class_count - 1;
    // Renormalized so the metadata stays a simplex; scoring always uses the
    // full trial's proportions, so this never reaches the l1 computation.
    Vector head = trial.true_proportions.head(reduced.class_count);
    reduced.true_proportions = head / head.sum();
    return reduced;
}

Vector zero_pad(const Vector& v, Index len) {
    Vector out = Vector::Zero(len);
    out.head(v.size()) = v;
    return out;
}

void aggregate_rows(BenchmarkReport& report) {
    std::sort(report.rows.begin(), report.rows.end(), [](const auto& a, const auto& b) {
        return std::tie(a.dataset, a.method, a.proportion, a.permutation) <
               std::tie(b.dataset, b.method, b.proportion, b.permutation);
    });
    std::map<std::pair<std::string, std::string>, std::vector<double>> by_dm;
    std::map<std::pair<std::string, double>, std::vector<double>> by_mp;
    report.failures = 0;
    for (const auto& row : report.rows) {
        if (row.failed) {
            ++report.failures;
            continue;
        }
        by_dm[{row.dataset, row.method}].push_back(row.l1);
        by_mp[{row.method, row.proportion}].push_back(row.l1);
    }
    auto summarize = [](const std::vector<double>& xs, Aggregate& agg) {
        agg.count = static_cast<int>(xs.size());
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= xs.size();
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        agg.mean_l1 = mean;
        agg.std_l1 = std::sqrt(var / xs.size());
    };
    for (const auto& [key, xs] : by_dm) {
        Aggregate agg;
        agg.dataset = key.first;
        agg.method = key.second;
        summarize(xs, agg);
        report.by_dataset_method.push_back(agg);
    }
    for (const auto& [key, xs] : by_mp) {
        Aggregate agg;
        agg.method = key.first;
        agg.proportion = key.second;
        summarize(xs, agg);
        report.by_method_proportion.push_back(agg);
    }
}

struct Cell {
    std::size_t dataset = 0;
    std::size_t prop = 0;
    int perm = 0;
};

/// Runs fn over all cells with up to `jobs` threads; rows are sorted
/// afterwards so scheduling never affects the report.
template <typename Fn>
void for_each_cell(const std::vector<Cell>& cells, int jobs, Fn&& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1) {
        for (const Cell& c : cells) fn(c);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) break;
            fn(cells[i]);
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, std::uint64_t master_seed,
                              bool anomaly) {
    if (cfg.datasets.empty()) throw MixpropError("config lists no datasets");
    if (cfg.methods.empty()) throw MixpropError("config lists no methods");
    for (double p : cfg.proportion_grid)
        if (p <= 0.0 || p >= 1.0) throw MixpropError("proportion grid values must be in (0,1)");
    if (cfg.permutations < 1) throw MixpropError("permutations must be >= 1");

    std::vector<PreparedDataset> prepared;
    for (const auto& ds : cfg.datasets) {
        prepared.push_back(prepare(ds));
        if (anomaly && prepared.back().class_count < 3)
            throw MixpropError("anomaly benchmark needs at least 3 classes");
    }

    std::vector<Cell> cells;
    for (std::size_t d = 0; d < prepared.size(); ++d)
        for (std::size_t q = 0; q < cfg.proportion_grid.size(); ++q)
            for (int perm = 0; perm < cfg.permutations; ++perm) cells.push_back({d, q, perm});

    BenchmarkReport report;
    std::mutex mu;

    auto run_cell = [&](const Cell& cell) {
        const PreparedDataset& ds = prepared[cell.dataset];
        double p = cfg.proportion_grid[cell.prop];
        std::uint64_t seed = rng::derive_seed(
            master_seed, {static_cast<std::uint64_t>(cell.dataset),
                          static_cast<std::uint64_t>(cell.perm), static_cast<std::uint64_t>(cell.prop)});
        std::vector<BenchmarkRow> rows;
        auto base_row = [&](const std::string& method) {
            BenchmarkRow row;
            row.dataset = ds.spec.name;
            row.method = method;
            row.proportion = p;
            row.permutation = cell.perm;
            return row;
        };
        // One estimate_many call per trial shares the CV / per-class work
        // across methods; only when that batch throws do methods rerun one
        // at a time so a single bad method cannot take down its neighbors.
        auto score = [&](const cpe::ProportionEstimate& est, bool pad, const Vector& truth,
                         BenchmarkRow& row) {
            Vector values = cfg.score_raw_values ? est.raw_values : est.values;
            row.estimate = pad ? zero_pad(values, truth.size()) : values;
            row.l1 = l1_error(row.estimate, truth);
        };
        auto run_group = [&](const dataio::CpeTrial& input, const std::vector<std::string>& group,
                             bool pad, const Vector& truth) {
            if (group.empty()) return;
            auto started = std::chrono::steady_clock::now();
            try {
                auto ests = cpe::estimate_many(input, group, cfg.estimator);
                double ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - started)
                                .count();
                for (std::size_t i = 0; i < group.size(); ++i) {
                    BenchmarkRow row = base_row(group[i]);
                    score(ests[i], pad, truth, row);
                    row.wall_ms = ms;
                    rows.push_back(std::move(row));
                }
                return;
            } catch (const std::exception&) {
            }
            for (const auto& method : group) {
                BenchmarkRow row = base_row(method);
                auto method_start = std::chrono::steady_clock::now();
                try {
                    score(cpe::estimate_many(input, {method}, cfg.estimator).front(), pad, truth,
                          row);
                } catch (const std::exception& e) {
                    row.failed = true;
                    row.error = e.what();
                }
                row.wall_ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - method_start)
                                  .count();
                rows.push_back(std::move(row));
            }
        };
        try {
            Vector target = target_proportions(ds, p);
            dataio::CpeTrial trial = build_trial(ds, cfg, target, anomaly, seed);
            const Vector& truth = trial.true_proportions;
            if (anomaly) {
                dataio::CpeTrial reduced = reduce_trial(trial);
                std::vector<std::string> adaptive, comparators;
                for (const auto& m : cfg.methods)
                    (m == "mpe-incomplete" ? adaptive : comparators).push_back(m);
                run_group(trial, adaptive, false, truth);
                run_group(reduced, comparators, true, truth);
            } else {
                run_group(trial, cfg.methods, false, truth);
            }
        } catch (const std::exception& e) {
            // Trial construction failed: every requested method gets a
            // failure row so the report cardinality stays predictable.
            for (const auto& method : cfg.methods) {
                BenchmarkRow row = base_row(method);
                row.failed = true;
                row.error = e.what();
                rows.push_back(std::move(row));
            }
        }
        std::lock_guard<std::mutex> lock(mu);
        for (auto& r : rows) report.rows.push_back(std::move(r));
    };

    for_each_cell(cells, cfg.jobs, run_cell);
    aggregate_rows(report);

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        std::ofstream out(cfg.out_dir + "/report.json");
        out << report_to_json(report);
    }
    return report;
}

}  // namespace

BenchmarkConfig config_from_json(const std::string& text) {
    json j = json::parse(text);
    BenchmarkConfig cfg;
    for (const auto& ds : j.value("datasets", json::array())) {
        DatasetSpec spec;
        spec.name = ds.at("name").get<std::string>();
        spec.csv_path = ds.value("csv", "");
        spec.sparse_path = ds.value("sparse", "");
        if (ds.contains("synthetic")) spec.synthetic = synthetic_from_json(ds.at("synthetic"));
        if (spec.csv_path.empty() && spec.sparse_path.empty() && !spec.synthetic)
            throw MixpropError("dataset " + spec.name + " has no source");
        cfg.datasets.push_back(std::move(spec));
    }
    cfg.methods = j.value("methods", std::vector<std::string>{});
    if (j.contains("proportion_grid"))
        cfg.proportion_grid = j.at("proportion_grid").get<std::vector<double>>();
    cfg.permutations = j.value("permutations", cfg.permutations);
    cfg.train_size = j.value("train_size", cfg.train_size);
    cfg.test_size = j.value("test_size", cfg.test_size);
    cfg.standardize = j.value("standardize", cfg.standardize);
    cfg.score_raw_values = j.value("score_raw_values", cfg.score_raw_values);
    cfg.level = j.value("level", cfg.level);
    cfg.ci_trials = j.value("ci_trials", cfg.ci_trials);
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    if (j.contains("estimator")) {
        const auto& e = j.at("estimator");
        cfg.estimator.nu.max_train = e.value("max_train", cfg.estimator.nu.max_train);
        cfg.estimator.nu.cv_subsample = e.value("cv_subsample", cfg.estimator.nu.cv_subsample);
        cfg.estimator.nu.restarts = e.value("restarts", cfg.estimator.nu.restarts);
        cfg.estimator.nu.fit_raw_vertices =
            e.value("fit_raw_vertices", cfg.estimator.nu.fit_raw_vertices);
        cfg.estimator.nu.envelope.replicates =
            e.value("replicates", cfg.estimator.nu.envelope.replicates);
        cfg.estimator.nu.envelope.grid_size =
            e.value("grid_size", cfg.estimator.nu.envelope.grid_size);
        if (e.contains("sigma")) cfg.estimator.nu.sigma = e.at("sigma").get<double>();
    }
    return cfg;
}

BenchmarkConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MixpropError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return config_from_json(text);
}

synth::SyntheticSpec synthetic_spec_from_json(const std::string& text) {
    return synthetic_from_json(json::parse(text));
}

double l1_error(const Vector& est, const Vector& truth) {
    if (est.size() != truth.size()) throw MixpropError("estimate and truth lengths differ");
    return (est - truth).cwiseAbs().sum();
}

BenchmarkReport run_cpe_benchmark(const BenchmarkConfig& cfg, std::uint64_t master_seed) {
    return run_benchmark(cfg, master_seed, /*anomaly=*/false);
}

BenchmarkReport run_anomaly_benchmark(const BenchmarkConfig& cfg, std::uint64_t master_seed) {
    return run_benchmark(cfg, master_seed, /*anomaly=*/true);
}

CoverageReport run_ci_coverage(const BenchmarkConfig& cfg, std::uint64_t master_seed) {
    if (cfg.datasets.empty() || cfg.ci_trials < 1) throw MixpropError("empty experiment");
    CoverageReport report;
    double width_sum = 0.0;

    for (std::size_t d = 0; d < cfg.datasets.size(); ++d) {
        PreparedDataset ds = prepare(cfg.datasets[d]);
        int ds_pairs = 0, ds_covered = 0;
        for (int t = 0; t < cfg.ci_trials; ++t) {
            double p = cfg.proportion_grid[static_cast<std::size_t>(t) %
                                           cfg.proportion_grid.size()];
            std::uint64_t seed = rng::derive_seed(
                master_seed, {0x6369ULL, static_cast<std::uint64_t>(d),
                              static_cast<std::uint64_t>(t)});
            try {
                Vector target = target_proportions(ds, p);
                dataio::CpeTrial trial = build_trial(ds, cfg, target, false, seed);
                auto intervals = cpe::confidence_intervals(trial, cfg.level, cfg.estimator);
                for (std::size_t c = 0; c < intervals.size(); ++c) {
                    double truth = trial.true_proportions[static_cast<Index>(c)];
                    ++ds_pairs;
                    if (truth >= intervals[c].first - 1e-12 &&
                        truth <= intervals[c].second + 1e-12)
                        ++ds_covered;
                    width_sum += intervals[c].second - intervals[c].first;
                }
                ++report.trials;
            } catch (const std::exception&) {
                ++report.failures;
            }
        }
        report.pairs += ds_pairs;
        report.covered += ds_covered;
        report.per_dataset.emplace_back(
            cfg.datasets[d].name,
            ds_pairs > 0 ? static_cast<double>(ds_covered) / ds_pairs : 0.0);
    }
    if (report.pairs == 0) throw MixpropError("empty experiment");
    report.coverage = static_cast<double>(report.covered) / report.pairs;
    report.mean_width = width_sum / report.pairs;

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        std::ofstream out(cfg.out_dir + "/coverage.json");
        out << coverage_to_json(report);
    }
    return report;
}

BenchmarkReport run_roc_curve(const BenchmarkConfig& cfg, std::uint64_t master_seed) {
    if (cfg.datasets.empty()) throw MixpropError("config lists no datasets");
    if (cfg.proportion_grid.empty()) throw MixpropError("empty proportion grid");
    PreparedDataset ds = prepare(cfg.datasets.front());
    Vector target = target_proportions(ds, cfg.proportion_grid.front());
    dataio::CpeTrial trial =
        build_trial(ds, cfg, target, false, rng::derive_seed(master_seed, {0, 0, 0}));
    mpe::NuConfig nu = cfg.estimator.nu;
    nu.envelope.level = cfg.level;
    mpe::NuEstimate est =
        mpe::estimate_nu(trial.test_features, trial.train_per_class.front(), nu,
                         rng::derive_seed(master_seed, {0x726f63ULL}));
    if (!est.envelope) throw MixpropError("degenerate scores: no ROC band to emit");
    BenchmarkReport report;
    report.envelope = est.envelope;
    return report;
}

void emit_plot_data(const BenchmarkReport& report, const std::string& kind,
                    const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MixpropError("cannot write " + path);
    out.precision(12);
    if (kind == "proportion-curve") {
        out << "proportion,method,mean_l1,std_l1\n";
        for (const auto& agg : report.by_method_proportion)
            out << agg.proportion << ',' << agg.method << ',' << agg.mean_l1 << ',' << agg.std_l1
                << '\n';
    } else if (kind == "dataset-table") {
        out << "dataset,method,mean_l1,std_l1,count\n";
        for (const auto& agg : report.by_dataset_method)
            out << agg.dataset << ',' << agg.method << ',' << agg.mean_l1 << ',' << agg.std_l1
                << ',' << agg.count << '\n';
    } else if (kind == "roc") {
        if (!report.envelope) throw MixpropError("report carries no ROC curve");
        const auto& env = *report.envelope;
        out << "alpha,p,lower,upper\n";
        for (std::size_t i = 0; i < env.grid.size(); ++i)
            out << env.grid[i] << ',' << env.mean_curve[i] << ',' << env.lower[i] << ','
                << env.upper[i] << '\n';
    } else {
        throw MixpropError("unknown plot kind: " + kind);
    }
}

std::string report_to_json(const BenchmarkReport& report) {
    json rows = json::array();
    for (const auto& row : report.rows) {
        json r{{"dataset", row.dataset},  {"method", row.method},
               {"proportion", row.proportion}, {"permutation", row.permutation},
               {"l1", row.l1},           {"estimate", to_std(row.estimate)},
               {"wall_ms", row.wall_ms}, {"failed", row.failed}};
        if (row.failed) r["error"] = row.error;
        rows.push_back(std::move(r));
    }
    auto aggs = [](const std::vector<Aggregate>& in) {
        json out = json::array();
        for (const auto& a : in)
            out.push_back(json{{"dataset", a.dataset},
                               {"method", a.method},
                               {"proportion", a.proportion},
                               {"mean_l1", a.mean_l1},
                               {"std_l1", a.std_l1},
                               {"count", a.count}});
        return out;
    };
    json j{{"rows", rows},
           {"by_dataset_method", aggs(report.by_dataset_method)},
           {"by_method_proportion", aggs(report.by_method_proportion)},
           {"failures", report.failures}};
    return j.dump(2);
}

std::string coverage_to_json(const CoverageReport& report) {
    json per = json::array();
    for (const auto& [name, cov] : report.per_dataset)
        per.push_back(json{{"dataset", name}, {"coverage", cov}});
    json j{{"trials", report.trials},   {"pairs", report.pairs},
           {"covered", report.covered}, {"coverage", report.coverage},
           {"mean_width", report.mean_width}, {"per_dataset", per},
           {"failures", report.failures}};
    return j.dump(2);
}

}  // namespace mixprop::harness
