#pragma once

#include <cstdint>
#include <vector>

#include "mixprop/common.hpp"

namespace mixprop::roc {

/// Empirical ROC polyline.  Vertices run from (0,0) to (1,1) with both
/// coordinates nondecreasing; scores tied across the two samples move both
/// coordinates within a single vertex step.
struct RocCurve {
    std::vector<double> alpha;  // false-positive rates, starts at 0, ends at 1
    std::vector<double> p;      // true-positive rates
    Index n_alt = 0;
    Index n_null = 0;

    /// Piecewise-linear value at false-positive rate a (upper value at
    /// vertical jumps).
    double eval(double a) const;
};

/// Builds the ROC for thresholding `score >= t`, alt sample as the positive
/// (detection) class.  Higher scores are more alt-like.
RocCurve empirical_roc(const Vector& scores_alt, const Vector& scores_null);

/// Weighted variant; weights need not be normalized (they are internally).
RocCurve weighted_roc(const Vector& scores_alt, const Vector& weights_alt,
                      const Vector& scores_null, const Vector& weights_null);

/// Trapezoidal area under the polyline.
double roc_auc(const RocCurve& c);

struct RocEnvelope {
    std::vector<double> grid;        // alpha values
    std::vector<double> mean_curve;  // pointwise mean over replicates
    std::vector<double> lower;       // pointwise (1-level)/2 quantile
    std::vector<double> upper;       // pointwise (1+level)/2 quantile
    double level = 0.95;
    int replicates = 0;
    /// One curve per replicate, evaluated on `grid`; filled only when
    /// EnvelopeConfig::keep_replicates is set (slope-resampling needs them).
    std::vector<std::vector<double>> replicate_curves;
};

struct EnvelopeConfig {
    int replicates = 100;
    int grid_size = 100;
    double level = 0.95;
    /// Append empirical-curve vertices with alpha >= tail_from to the grid so
    /// the right end is densely represented.
    bool augment_tail_vertices = true;
    double tail_from = 0.9;
    bool keep_replicates = false;
};

/// Bayesian bootstrap of the ROC: each replicate reweights both samples with
/// independent flat Dirichlet weights, recomputes the weighted ROC, and
/// evaluates it on a shared alpha grid.
RocEnvelope bootstrap_envelope(const Vector& scores_alt, const Vector& scores_null,
                               const EnvelopeConfig& cfg, std::uint64_t seed);

}  // namespace mixprop::roc
