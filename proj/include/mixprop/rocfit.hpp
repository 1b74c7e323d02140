#pragma once

#include <cstdint>
#include <vector>

#include "mixprop/common.hpp"

namespace mixprop::mpe {

/// Two-parameter binormal model with a linear term, or three-parameter
/// power-law model with a linear term.  Both pass through (0,0) and (1,1).
enum class RocModelKind { binormal_linear, power_linear };

struct RocModelParams {
    double gamma = 0.5;  // weight of the linear term, in [0,1]
    double delta = 1.0;  // curve-quality parameter, >= 0
    double mu = 1.0;     // asymmetry parameter (power_linear only), > 0
};

struct RocPoint {
    double alpha;
    double p;
};

struct RocFit {
    RocModelKind kind = RocModelKind::power_linear;
    RocModelParams params;
    double deviance = 0.0;
    double slope = 0.0;  // right-endpoint slope of the fitted curve
    bool improved = true;  // false when no start improved on its initial value
};

/// Model value at false-positive rate alpha; exact, no clamping.
double eval_model(RocModelKind kind, const RocModelParams& params, double alpha);

/// Closed-form slope at alpha = 1: gamma for binormal_linear,
/// (1-gamma)*delta + gamma for power_linear.
double right_slope(RocModelKind kind, const RocModelParams& params);

/// -2 * binomial log-likelihood of the model against the points; model values
/// are clamped to [1e-9, 1-1e-9] inside the logs and exact (0,0)/(1,1)
/// points are excluded.
double binomial_deviance(RocModelKind kind, const RocModelParams& params,
                         const std::vector<RocPoint>& points);

/// Multi-start Nelder-Mead in transformed coordinates (logistic for gamma,
/// log for delta and mu).  Starts beyond the built-in grid are drawn from
/// `seed`.  Never returns a deviance above the identity curve's.
RocFit fit_roc_model(const std::vector<RocPoint>& points, RocModelKind kind, int restarts,
                     std::uint64_t seed);

/// Single Nelder-Mead run warm-started from `start`; never returns a deviance
/// above the start's or the identity curve's.  Cheap enough to run once per
/// bootstrap replicate when resampling the right-endpoint slope.
RocFit refit_roc_model(const std::vector<RocPoint>& points, RocModelKind kind,
                       const RocModelParams& start, int max_iters = 200);

}  // namespace mixprop::mpe
