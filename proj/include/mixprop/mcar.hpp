#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixprop/common.hpp"
#include "mixprop/dataio.hpp"
#include "mixprop/synth.hpp"

namespace mixprop::mcar {

/// Axis-aligned regular grid classifier; label class_count is the reject
/// label.  Points outside the bounding box clamp to boundary cells, so the
/// first and last cell in each dimension extend to infinity.
struct HistogramClassifier {
    Vector lower;
    Vector upper;
    Index cells_per_dim = 1;
    std::vector<int> cell_labels;  // row-major flat array, size k^d, labels in 1..class_count
    int class_count = 2;

    Index dim() const { return lower.size(); }
    Index cell_count() const;
    /// Flat row-major cell index of x (clamped into the grid).
    Index cell_of(const Vector& x) const;
    int predict(const Vector& x) const;
};

std::string to_json(const HistogramClassifier& f);
HistogramClassifier classifier_from_json(const std::string& text);

/// Fraction of sample rows NOT assigned `label`: R_i for label = i on a
/// class-i sample, R_iM for label = reject on the same sample.
double conditional_error(const HistogramClassifier& f, const Matrix& sample, int label);

struct RiskEstimate {
    double total = 0.0;
    Vector per_class_terms;     // pi_hat_i * R_i(f) for observed classes
    double anomaly_term = 0.0;  // estimation noise can push this negative
};

/// Plug-in risk estimate: observed-class terms plus the anomaly remainder
/// R_0M - sum_i pi_hat_i R_iM, assembled from the trial's training samples
/// and test sample.
RiskEstimate estimate_risk(const HistogramClassifier& f, const dataio::CpeTrial& trial,
                           const Vector& pi_hat);

/// Exact minimizer of the estimated risk over all labelings of the k-cell
/// grid (the risk decomposes per cell); ties go to the smallest label.
HistogramClassifier erm_histogram(const dataio::CpeTrial& trial, const Vector& pi_hat, Index k);

/// Exact sup over the whole grid family of |R(f) - R_hat(f)|, computed by
/// maximizing each cell's contribution independently in both directions.
double sup_deviation(const dataio::CpeTrial& trial, const Vector& pi_hat, Index k,
                     const synth::SyntheticSpec& truth);

/// (cells x M) matrix of exact per-cell class probabilities under the truth,
/// boundary cells extended to infinity to match clamping.
Matrix true_cell_masses(const synth::SyntheticSpec& truth, const HistogramClassifier& f);

/// Exact risk of f under the truth via per-cell probabilities.
double true_risk(const HistogramClassifier& f, const synth::SyntheticSpec& truth);

/// Smallest exact risk over all labelings of f's grid.
double best_risk_in_family(const HistogramClassifier& grid, const synth::SyntheticSpec& truth);

struct BayesRisk {
    double value = 0.0;
    double std_error = 0.0;
};

/// Monte Carlo Bayes risk using the exact-density arg-max rule.
BayesRisk bayes_risk_oracle(const synth::SyntheticSpec& spec, Index n_mc, std::uint64_t seed);

struct ConsistencyReport {
    std::vector<Index> sizes;
    std::vector<Index> ks;
    std::vector<double> excess_risk;          // R(f_hat) - R*
    std::vector<double> estimation_error;     // R(f_hat) - best in family
    std::vector<double> approximation_error;  // best in family - R*
    double bayes_risk = 0.0;
};

struct EvaluationConfig {
    std::vector<Index> sizes;  // per-class training size = test size = n
    std::vector<Index> ks;     // empty: k(n) = ceil(n^(1/(d+2)))
    Index bayes_mc = 400000;
    /// pi_hat source; empty grid fields leave the estimator defaults alone.
    bool use_true_proportions = false;  // ablation switch
};

/// Builds one trial per size (last class unobserved), estimates proportions,
/// runs ERM with the schedule, and reports the exact risk decomposition.
ConsistencyReport evaluate_rule(const synth::SyntheticSpec& spec, const EvaluationConfig& cfg,
                                std::uint64_t seed);

}  // namespace mixprop::mcar
