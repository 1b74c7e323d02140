#pragma once

#include <cstdint>
#include <vector>

#include "mixprop/common.hpp"

namespace mixprop::klr {

/// Gaussian-kernel logistic regression model in dual (representer) form.
/// Posterior for the positive class is sigmoid(k(x, X)^T alpha + bias).
struct KlrModel {
    Matrix support_points;
    Vector dual_weights;
    double bias = 0.0;
    double bandwidth = 1.0;
    double regularization = 1.0;
    bool converged = true;
    std::vector<double> objective_trace;  // regularized NLL per Newton iteration
};

/// exp(-||x-y||^2 / (2 sigma^2)); symmetric, equals 1 iff x == y.
double gaussian_kernel(const Vector& x, const Vector& y, double sigma);

/// Fits dual weights and an unpenalized bias by damped Newton (IRLS) on the
/// regularized negative log-likelihood.  y must contain both 0 and 1.
/// Non-convergence after 100 iterations returns the best iterate with
/// converged = false.
KlrModel train_klr(const Matrix& X, const std::vector<int>& y, double sigma, double lambda);

/// Positive-class posterior probabilities, clamped to (0, 1).
Vector predict_posterior(const KlrModel& m, const Matrix& X);

enum class CvCriterion { accuracy, auc };

struct HyperParams {
    double sigma = 1.0;
    double lambda = 1.0;
    double score = 0.0;
};

/// Stratified k-fold grid search.  Labels may be any integers; with more than
/// two distinct labels one-vs-rest models are fit and accuracy is measured on
/// the arg-max label (auc requires a binary problem).  Ties prefer larger
/// sigma, then larger lambda.
HyperParams select_hyperparameters(const Matrix& X, const std::vector<int>& y,
                                   const std::vector<double>& sigma_grid,
                                   const std::vector<double>& lambda_grid, int folds,
                                   CvCriterion criterion, std::uint64_t seed);

/// Median pairwise Euclidean distance, subsampled to at most max_points rows.
double median_pairwise_distance(const Matrix& X, std::uint64_t seed, Index max_points = 500);

}  // namespace mixprop::klr
