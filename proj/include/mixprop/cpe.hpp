#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mixprop/common.hpp"
#include "mixprop/dataio.hpp"
#include "mixprop/mpe.hpp"

namespace mixprop::cpe {

struct CpeConfig {
    /// Settings for every per-class nu estimate.  `nu.sigma` is normally left
    /// unset: estimators run the shared accuracy-CV bandwidth selection on
    /// the labeled training classes first, then hand the winner down.
    mpe::NuConfig nu;
    int joint_max_outer = 200;  // outer alternating-descent rounds
    int em_max_iters = 500;
    double em_tol = 1e-8;  // l1 change per iteration
    int l2_max_iters = 20000;
    double l2_tol = 1e-10;  // projected-gradient stationarity
};

/// Estimated class proportions.  `values` aligns with
/// trial.true_proportions; `raw_values` is the pre-clamp / pre-projection
/// vector for methods that post-process.
struct ProportionEstimate {
    std::string method;
    Vector values;
    Vector raw_values;
    /// Fully-observed incomplete estimate only: remainder mass assigned to a
    /// phantom extra class, 1 - sum of per-class estimates (may be negative).
    std::optional<double> extra_mass;
    std::vector<std::pair<double, double>> ci;  // per-class (lower, upper), may be empty
    bool converged = true;
};

/// Euclidean projection onto {x >= 0, sum x = 1} (sort-and-threshold).
Vector project_to_simplex(const Vector& v);

/// Simplex-constrained joint fit of one binormal-linear model per class.
struct JointFit {
    Vector gammas;  // on the simplex; the class-proportion estimates
    Vector deltas;
    std::vector<double> objective_trace;  // total deviance after each outer round
    bool converged = true;
};

/// Minimizes the summed binomial deviance over {(gamma_i, delta_i)} subject
/// to sum gamma_i = 1 by alternating per-class delta line searches with
/// projected-gradient steps on the gamma block.  The objective never
/// increases between outer rounds.
JointFit joint_fit_binormal(const std::vector<std::vector<mpe::RocPoint>>& class_points,
                            int max_outer);

/// Per-class nu estimates with the remainder assigned to the last class
/// (unobserved-last trials) or to a reported phantom class (fully observed).
/// Works without any training data for the last class.
ProportionEstimate estimate_incomplete(const dataio::CpeTrial& trial, const CpeConfig& cfg);

/// Fully-observed variant: per-class nu vector projected onto the simplex.
ProportionEstimate estimate_projected(const dataio::CpeTrial& trial, const CpeConfig& cfg);

/// Fully-observed variant: fits all per-class ROC curves at once with the
/// binormal-linear model under the constraint sum gamma_i = 1 and reports the
/// gamma vector.
ProportionEstimate estimate_joint(const dataio::CpeTrial& trial, const CpeConfig& cfg);

/// Binary-only estimator that stays consistent when the two classes overlap
/// (P1 != P2 suffices): each proportion is rescaled by 1 - nu between the
/// training classes.  Errors when the classes are near-indistinguishable.
ProportionEstimate estimate_binary_rescaled(const dataio::CpeTrial& trial, const CpeConfig& cfg);

/// Comparator: fixed-point iteration reweighting calibrated posteriors until
/// the implied test priors stop moving.
ProportionEstimate estimate_em(const dataio::CpeTrial& trial, const CpeConfig& cfg);

/// Comparator: minimizes the L2 distance between the mixture of per-class
/// Gaussian KDEs and the test-sample KDE over the simplex.
ProportionEstimate estimate_l2_kde(const dataio::CpeTrial& trial, const CpeConfig& cfg);

/// Comparator: frequencies of arg-max labels from one-vs-rest KLR.
ProportionEstimate estimate_baseline(const dataio::CpeTrial& trial, const CpeConfig& cfg);

/// Runs several estimators on one trial, sharing the bandwidth selection,
/// per-class nu estimates, and posterior models across methods.  Tags:
/// mpe-incomplete, mpe-projected, mpe-joint, mpe-rescaled, em, l2-kde,
/// baseline.
std::vector<ProportionEstimate> estimate_many(const dataio::CpeTrial& trial,
                                              const std::vector<std::string>& methods,
                                              const CpeConfig& cfg);

/// Per-class (lower, upper) intervals: upper from the model fit to the ROC
/// lower envelope, lower as one minus the other classes' uppers (clamped at
/// 0).  Requires every class observed.
std::vector<std::pair<double, double>> confidence_intervals(const dataio::CpeTrial& trial,
                                                            double level, const CpeConfig& cfg);

}  // namespace mixprop::cpe
