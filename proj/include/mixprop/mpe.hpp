#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mixprop/common.hpp"
#include "mixprop/roc.hpp"
#include "mixprop/rocfit.hpp"

namespace mixprop::mpe {

/// Probability masses over a shared finite atom universe (atom i = index i).
/// Exact nu* is computable here, which makes these the test oracle for the
/// sample-based estimator.
struct DiscreteDistribution {
    std::vector<double> masses;

    DiscreteDistribution() = default;
    explicit DiscreteDistribution(std::vector<double> m);  // validates simplex
};

/// Largest nu with F = (1-nu) G + nu H for some distribution G; equals
/// min over atoms a with H(a) > 0 of F(a)/H(a), capped at 1.
double nu_star_discrete(const DiscreteDistribution& F, const DiscreteDistribution& H);

/// True iff every distribution has an atom of positive mass outside the
/// union of the others' supports (each class "sticks out").
bool check_condition_B(const std::vector<DiscreteDistribution>& dists);

struct NuConfig {
    /// Kernel bandwidth for the scorer.  Unset: a full (sigma, lambda)
    /// accuracy-CV selection runs first; set: only lambda is re-selected by
    /// AUC, implementing the second stage of the two-stage protocol.
    std::optional<double> sigma;
    std::vector<double> sigma_grid;   // empty: median heuristic x {1/4,...,4}
    std::vector<double> lambda_grid;  // empty: {1e-4,...,1}
    int cv_folds = 3;
    /// Caps (per side, without replacement) keeping the O(n^3) solver and the
    /// O(n^2) CV affordable on large samples; scores for the ROC still use
    /// every point.
    Index max_train = 400;
    Index cv_subsample = 150;
    roc::EnvelopeConfig envelope;
    RocModelKind kind = RocModelKind::power_linear;
    int restarts = 8;
    /// Default fits the bootstrap mean curve on the alpha grid; true fits the
    /// raw empirical ROC vertices instead.
    bool fit_raw_vertices = false;
    bool compute_upper_ci = false;
};

struct NuEstimate {
    double value = 1.0;  // right-endpoint slope of the fitted curve
    RocFit fit;
    double auc = 0.5;  // of the unsmoothed empirical ROC
    std::optional<double> upper_ci;
    bool degenerate = false;  // scorer produced (near-)constant scores
    /// The points the model was fitted to (smoothed grid curve or raw
    /// vertices); reused by the joint simplex-constrained fit.
    std::vector<RocPoint> fit_points;
    /// Bootstrap band behind the fit; absent on the degenerate path.
    std::optional<roc::RocEnvelope> envelope;
};

/// Full pipeline for nu(F, H): KLR scorer -> Bayesian-bootstrap ROC ->
/// model fit -> right-endpoint slope.  Deterministic given seed.
NuEstimate estimate_nu(const Matrix& sample_F, const Matrix& sample_H, const NuConfig& cfg,
                       std::uint64_t seed);

}  // namespace mixprop::mpe
