#include "mixprop/mcar.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <random>

#include "mixprop/cpe.hpp"
#include "mixprop/rng.hpp"

namespace mixprop::mcar {

Index HistogramClassifier::cell_count() const {
    Index total = 1;
    for (Index k = 0; k < dim(); ++k) total *= cells_per_dim;
    return total;
}

Index HistogramClassifier::cell_of(const Vector& x) const {
    if (x.size() != dim()) throw MixpropError("point dimension mismatch");
    Index flat = 0;
    for (Index k = 0; k < dim(); ++k) {
        double width = (upper[k] - lower[k]) / static_cast<double>(cells_per_dim);
        Index idx = 0;
        if (width > 0.0) {
            idx = static_cast<Index>(std::floor((x[k] - lower[k]) / width));
            idx = std::clamp(idx, Index{0}, cells_per_dim - 1);
        }
        flat = flat * cells_per_dim + idx;
    }
    return flat;
}

int HistogramClassifier::predict(const Vector& x) const {
    return cell_labels.at(static_cast<std::size_t>(cell_of(x)));
}

std::string to_json(const HistogramClassifier& f) {
    nlohmann::json j;
    j["lower"] = std::vector<double>(f.lower.data(), f.lower.data() + f.lower.size());
    j["upper"] = std::vector<double>(f.upper.data(), f.upper.data() + f.upper.size());
    j["cells_per_dim"] = f.cells_per_dim;
    j["cell_labels"] = f.cell_labels;
    j["class_count"] = f.class_count;
    return j.dump();
}

HistogramClassifier classifier_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    HistogramClassifier f;
    std::vector<double> lo = j.at("lower").get<std::vector<double>>();
    std::vector<double> hi = j.at("upper").get<std::vector<double>>();
    f.lower = Eigen::Map<const Vector>(lo.data(), static_cast<Index>(lo.size()));
    f.upper = Eigen::Map<const Vector>(hi.data(), static_cast<Index>(hi.size()));
    f.cells_per_dim = j.at("cells_per_dim").get<Index>();
    f.cell_labels = j.at("cell_labels").get<std::vector<int>>();
    f.class_count = j.at("class_count").get<int>();
    if (static_cast<Index>(f.cell_labels.size()) != f.cell_count())
        throw MixpropError("cell label array does not match grid size");
    return f;
}

double conditional_error(const HistogramClassifier& f, const Matrix& sample, int label) {
    if (sample.rows() == 0) throw MixpropError("empty sample");
    Index misses = 0;
    for (Index i = 0; i < sample.rows(); ++i)
        if (f.predict(sample.row(i).transpose()) != label) ++misses;
    return static_cast<double>(misses) / static_cast<double>(sample.rows());
}

namespace {

/// Per-cell empirical masses: one row per cell, columns are the observed
/// classes followed by the test sample.
Matrix cell_masses(const HistogramClassifier& grid, const dataio::CpeTrial& trial) {
    const int observed = static_cast<int>(trial.train_per_class.size());
    Matrix masses = Matrix::Zero(grid.cell_count(), observed + 1);
    for (int c = 0; c < observed; ++c) {
        const Matrix& X = trial.train_per_class[static_cast<std::size_t>(c)];
        if (X.rows() == 0) throw MixpropError("empty training sample");
        double w = 1.0 / static_cast<double>(X.rows());
        for (Index i = 0; i < X.rows(); ++i) masses(grid.cell_of(X.row(i).transpose()), c) += w;
    }
    if (trial.test_features.rows() == 0) throw MixpropError("empty test sample");
    double w = 1.0 / static_cast<double>(trial.test_features.rows());
    for (Index i = 0; i < trial.test_features.rows(); ++i)
        masses(grid.cell_of(trial.test_features.row(i).transpose()), observed) += w;
    return masses;
}

/// Estimated-risk contribution of one cell under each candidate label.
/// masses row: observed-class masses then test mass; cost(label j < M) =
/// test_mass - pi_j * m_j, cost(reject) = sum_i pi_i * m_i.
Vector cell_costs(const Eigen::Ref<const Eigen::RowVectorXd>& mass_row, const Vector& pi_hat,
                  int class_count) {
    const int observed = static_cast<int>(mass_row.size()) - 1;
    double test_mass = mass_row[observed];
    double reject_cost = 0.0;
    for (int i = 0; i < observed; ++i) reject_cost += pi_hat[i] * mass_row[i];
    Vector costs(class_count);
    for (int j = 0; j < class_count - 1; ++j)
        costs[j] = j < observed ? test_mass - pi_hat[j] * mass_row[j] : test_mass;
    costs[class_count - 1] = reject_cost;
    return costs;
}

HistogramClassifier make_grid(const dataio::CpeTrial& trial, Index k) {
    if (k < 1) throw MixpropError("cell count must be >= 1");
    const Index d = trial.test_features.cols();
    HistogramClassifier grid;
    grid.cells_per_dim = k;
    grid.class_count = trial.class_count;
    grid.lower = trial.test_features.colwise().minCoeff().transpose();
    grid.upper = trial.test_features.colwise().maxCoeff().transpose();
    for (const auto& X : trial.train_per_class) {
        if (X.rows() == 0) continue;
        grid.lower = grid.lower.cwiseMin(X.colwise().minCoeff().transpose());
        grid.upper = grid.upper.cwiseMax(X.colwise().maxCoeff().transpose());
    }
    double cells = std::pow(static_cast<double>(k), static_cast<double>(d));
    if (cells > 2e7) throw MixpropError("grid too large for memory");
    grid.cell_labels.assign(static_cast<std::size_t>(grid.cell_count()), trial.class_count);
    return grid;
}

void check_pi(const dataio::CpeTrial& trial, const Vector& pi_hat) {
    if (pi_hat.size() < static_cast<Index>(trial.train_per_class.size()))
        throw MixpropError("need a proportion estimate per observed class");
}

}  // namespace

RiskEstimate estimate_risk(const HistogramClassifier& f, const dataio::CpeTrial& trial,
                           const Vector& pi_hat) {
    check_pi(trial, pi_hat);
    const int observed = static_cast<int>(trial.train_per_class.size());
    const int M = trial.class_count;
    RiskEstimate est;
    est.per_class_terms.resize(observed);
    double anomaly = conditional_error(f, trial.test_features, M);  // R_0M
    for (int i = 0; i < observed; ++i) {
        const Matrix& X = trial.train_per_class[static_cast<std::size_t>(i)];
        est.per_class_terms[i] = pi_hat[i] * conditional_error(f, X, i + 1);
        anomaly -= pi_hat[i] * conditional_error(f, X, M);
    }
    est.anomaly_term = anomaly;
    est.total = est.per_class_terms.sum() + est.anomaly_term;
    return est;
}

HistogramClassifier erm_histogram(const dataio::CpeTrial& trial, const Vector& pi_hat, Index k) {
    check_pi(trial, pi_hat);
    HistogramClassifier grid = make_grid(trial, k);
    Matrix masses = cell_masses(grid, trial);
    for (Index cell = 0; cell < grid.cell_count(); ++cell) {
        Vector costs = cell_costs(masses.row(cell), pi_hat, grid.class_count);
        Index best;
        costs.minCoeff(&best);  // ties resolve to the smallest label
        grid.cell_labels[static_cast<std::size_t>(cell)] = static_cast<int>(best) + 1;
    }
    return grid;
}

Matrix true_cell_masses(const synth::SyntheticSpec& truth, const HistogramClassifier& f) {
    synth::validate_spec(truth);
    const Index d = f.dim();
    if (truth.dim != d) throw MixpropError("truth dimension mismatch");
    const Index k = f.cells_per_dim;
    const int M = static_cast<int>(truth.classes.size());
    Matrix out(f.cell_count(), M);

    std::vector<Index> idx(static_cast<std::size_t>(d), 0);
    for (Index cell = 0; cell < f.cell_count(); ++cell) {
        Index rest = cell;
        for (Index dd = d - 1; dd >= 0; --dd) {
            idx[static_cast<std::size_t>(dd)] = rest % k;
            rest /= k;
        }
        Vector lo(d), hi(d);
        std::vector<bool> lo_inf(static_cast<std::size_t>(d)), hi_inf(static_cast<std::size_t>(d));
        for (Index dd = 0; dd < d; ++dd) {
            double width = (f.upper[dd] - f.lower[dd]) / static_cast<double>(k);
            Index i = idx[static_cast<std::size_t>(dd)];
            lo[dd] = f.lower[dd] + static_cast<double>(i) * width;
            hi[dd] = f.lower[dd] + static_cast<double>(i + 1) * width;
            lo_inf[static_cast<std::size_t>(dd)] = i == 0;       // clamping
            hi_inf[static_cast<std::size_t>(dd)] = i == k - 1;   // semantics
        }
        for (int c = 0; c < M; ++c)
            out(cell, c) = synth::interval_probability(truth.classes[static_cast<std::size_t>(c)],
                                                       d, lo, hi, lo_inf, hi_inf);
    }
    return out;
}

double true_risk(const HistogramClassifier& f, const synth::SyntheticSpec& truth) {
    Matrix masses = true_cell_masses(truth, f);
    const int M = static_cast<int>(truth.classes.size());
    if (f.class_count != M) throw MixpropError("label count disagrees with truth classes");
    double risk = 0.0;
    for (Index cell = 0; cell < f.cell_count(); ++cell) {
        int label = f.cell_labels[static_cast<std::size_t>(cell)];
        for (int c = 0; c < M; ++c)
            if (c + 1 != label) risk += truth.proportions[c] * masses(cell, c);
    }
    return risk;
}

double best_risk_in_family(const HistogramClassifier& grid, const synth::SyntheticSpec& truth) {
    Matrix masses = true_cell_masses(truth, grid);
    const int M = static_cast<int>(truth.classes.size());
    double risk = 0.0;
    for (Index cell = 0; cell < grid.cell_count(); ++cell) {
        double total = 0.0, best = 0.0;
        for (int c = 0; c < M; ++c) total += truth.proportions[c] * masses(cell, c);
        for (int c = 0; c < M; ++c)
            best = std::max(best, truth.proportions[c] * masses(cell, c));
        risk += total - best;
    }
    return risk;
}

double sup_deviation(const dataio::CpeTrial& trial, const Vector& pi_hat, Index k,
                     const synth::SyntheticSpec& truth) {
    check_pi(trial, pi_hat);
    HistogramClassifier grid = make_grid(trial, k);
    Matrix emp = cell_masses(grid, trial);
    Matrix tru = true_cell_masses(truth, grid);
    const int M = grid.class_count;

    // Both R and R_hat are sums of independent per-cell label contributions,
    // so each direction's sup decomposes into per-cell maxima.
    double up = 0.0, down = 0.0;
    for (Index cell = 0; cell < grid.cell_count(); ++cell) {
        Vector est_costs = cell_costs(emp.row(cell), pi_hat, M);
        Vector true_costs(M);
        for (int label = 1; label <= M; ++label) {
            double r = 0.0;
            for (int c = 0; c < M; ++c)
                if (c + 1 != label) r += truth.proportions[c] * tru(cell, c);
            true_costs[label - 1] = r;
        }
        up += (true_costs - est_costs).maxCoeff();
        down += (est_costs - true_costs).maxCoeff();
    }
    return std::max(up, down);
}

BayesRisk bayes_risk_oracle(const synth::SyntheticSpec& spec, Index n_mc, std::uint64_t seed) {
    synth::validate_spec(spec);
    if (n_mc < 1) throw MixpropError("need at least one Monte Carlo draw");
    const int M = static_cast<int>(spec.classes.size());
    auto label_stream = rng::make_stream(seed, {0x62617965ULL});
    std::vector<double> props(spec.proportions.data(), spec.proportions.data() + M);
    std::discrete_distribution<int> pick(props.begin(), props.end());
    std::vector<Index> counts(static_cast<std::size_t>(M), 0);
    for (Index i = 0; i < n_mc; ++i) ++counts[static_cast<std::size_t>(pick(label_stream))];

    Index errors = 0;
    for (int y = 0; y < M; ++y) {
        if (counts[static_cast<std::size_t>(y)] == 0) continue;
        Matrix block = synth::sample_class(
            spec.classes[static_cast<std::size_t>(y)], spec.dim, counts[static_cast<std::size_t>(y)],
            rng::derive_seed(seed, {0x62737831ULL, static_cast<std::uint64_t>(y)}));
        for (Index i = 0; i < block.rows(); ++i) {
            Vector point = block.row(i).transpose();
            int best = 0;
            double best_score = -1.0;
            for (int c = 0; c < M; ++c) {
                double score = spec.proportions[c] *
                               synth::class_density(spec.classes[static_cast<std::size_t>(c)],
                                                    spec.dim, point);
                if (score > best_score) {
                    best_score = score;
                    best = c;
                }
            }
            if (best != y) ++errors;
        }
    }
    BayesRisk out;
    out.value = static_cast<double>(errors) / static_cast<double>(n_mc);
    out.std_error = std::sqrt(out.value * (1.0 - out.value) / static_cast<double>(n_mc));
    return out;
}

ConsistencyReport evaluate_rule(const synth::SyntheticSpec& spec, const EvaluationConfig& cfg,
                                std::uint64_t seed) {
    synth::validate_spec(spec);
    if (cfg.sizes.empty()) throw MixpropError("no sizes requested");
    const Index d = spec.dim;
    const int M = static_cast<int>(spec.classes.size());

    ConsistencyReport report;
    BayesRisk bayes = bayes_risk_oracle(spec, cfg.bayes_mc, rng::derive_seed(seed, {0x6263ULL}));
    report.bayes_risk = bayes.value;

    for (std::size_t s = 0; s < cfg.sizes.size(); ++s) {
        Index n = cfg.sizes[s];
        Index k = s < cfg.ks.size()
                      ? cfg.ks[s]
                      : static_cast<Index>(std::ceil(
                            std::pow(static_cast<double>(n), 1.0 / static_cast<double>(d + 2))));
        std::vector<Index> train_sizes(static_cast<std::size_t>(M), n);
        dataio::CpeTrial trial = synth::make_synthetic_trial(
            spec, train_sizes, n, /*unobserved_last=*/true,
            rng::derive_seed(seed, {0x7472ULL, static_cast<std::uint64_t>(s)}));

        Vector pi_hat;
        if (cfg.use_true_proportions) {
            pi_hat = spec.proportions.head(M - 1);
        } else {
            cpe::CpeConfig est_cfg;
            cpe::ProportionEstimate est = cpe::estimate_incomplete(trial, est_cfg);
            pi_hat = est.values.head(M - 1);
        }

        HistogramClassifier f = erm_histogram(trial, pi_hat, k);
        double risk = true_risk(f, spec);
        double best = best_risk_in_family(f, spec);

        report.sizes.push_back(n);
        report.ks.push_back(k);
        report.excess_risk.push_back(risk - report.bayes_risk);
        report.estimation_error.push_back(risk - best);
        report.approximation_error.push_back(best - report.bayes_risk);
    }
    return report;
}

}  // namespace mixprop::mcar
