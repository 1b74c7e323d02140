#include "mixprop/mpe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mixprop/klr.hpp"
#include "mixprop/rng.hpp"

namespace mixprop::mpe {

DiscreteDistribution::DiscreteDistribution(std::vector<double> m) : masses(std::move(m)) {
    double total = 0.0;
    for (double v : masses) {
        if (!(v >= 0.0)) throw MixpropError("discrete distribution has a negative mass");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw MixpropError("discrete distribution masses must sum to 1");
}

double nu_star_discrete(const DiscreteDistribution& F, const DiscreteDistribution& H) {
    if (F.masses.size() != H.masses.size())
        throw MixpropError("distributions must share one atom universe");
    double h_total = std::accumulate(H.masses.begin(), H.masses.end(), 0.0);
    if (h_total <= 0.0) throw MixpropError("H has zero total mass");
    double nu = 1.0;
    for (std::size_t a = 0; a < H.masses.size(); ++a)
        if (H.masses[a] > 0.0) nu = std::min(nu, F.masses[a] / H.masses[a]);
    return nu;
}

bool check_condition_B(const std::vector<DiscreteDistribution>& dists) {
    if (dists.size() < 2) throw MixpropError("condition (B) needs at least 2 distributions");
    const std::size_t atoms = dists.front().masses.size();
    for (const auto& d : dists)
        if (d.masses.size() != atoms)
            throw MixpropError("distributions must share one atom universe");
    for (std::size_t i = 0; i < dists.size(); ++i) {
        bool sticks_out = false;
        for (std::size_t a = 0; a < atoms && !sticks_out; ++a) {
            if (dists[i].masses[a] <= 0.0) continue;
            bool covered = false;
            for (std::size_t j = 0; j < dists.size() && !covered; ++j)
                covered = j != i && dists[j].masses[a] > 0.0;
            sticks_out = !covered;
        }
        if (!sticks_out) return false;
    }
    return true;
}

namespace {

Matrix subsample_rows(const Matrix& X, Index cap, std::mt19937_64& stream) {
    if (X.rows() <= cap) return X;
    std::vector<Index> idx(static_cast<std::size_t>(X.rows()));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::shuffle(idx.begin(), idx.end(), stream);
    Matrix out(cap, X.cols());
    for (Index i = 0; i < cap; ++i) out.row(i) = X.row(idx[static_cast<std::size_t>(i)]);
    return out;
}

Matrix stack(const Matrix& A, const Matrix& B) {
    Matrix out(A.rows() + B.rows(), A.cols());
    out.topRows(A.rows()) = A;
    out.bottomRows(B.rows()) = B;
    return out;
}

}  // namespace

NuEstimate estimate_nu(const Matrix& sample_F, const Matrix& sample_H, const NuConfig& cfg,
                       std::uint64_t seed) {
    if (sample_F.rows() == 0 || sample_H.rows() == 0)
        throw MixpropError("estimate_nu needs non-empty samples");
    if (sample_F.cols() != sample_H.cols())
        throw MixpropError("samples must share a feature dimension");

    auto stream_f = rng::make_stream(seed, {0x73756273ULL, 0});
    auto stream_h = rng::make_stream(seed, {0x73756273ULL, 1});
    Matrix train_f = subsample_rows(sample_F, cfg.max_train, stream_f);
    Matrix train_h = subsample_rows(sample_H, cfg.max_train, stream_h);

    auto stream_cf = rng::make_stream(seed, {0x63767373ULL, 0});
    auto stream_ch = rng::make_stream(seed, {0x63767373ULL, 1});
    Matrix cv_f = subsample_rows(train_f, cfg.cv_subsample, stream_cf);
    Matrix cv_h = subsample_rows(train_h, cfg.cv_subsample, stream_ch);
    Matrix cv_x = stack(cv_f, cv_h);
    std::vector<int> cv_y(static_cast<std::size_t>(cv_x.rows()), 1);
    for (std::size_t i = static_cast<std::size_t>(cv_f.rows()); i < cv_y.size(); ++i) cv_y[i] = 0;

    std::vector<double> lambda_grid = cfg.lambda_grid;
    if (lambda_grid.empty()) lambda_grid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    std::vector<double> sigma_grid;
    if (cfg.sigma) {
        sigma_grid = {*cfg.sigma};
    } else if (!cfg.sigma_grid.empty()) {
        sigma_grid = cfg.sigma_grid;
    } else {
        double med = klr::median_pairwise_distance(cv_x, rng::derive_seed(seed, {0x6d656469ULL}));
        for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) sigma_grid.push_back(f * med);
    }

    // Stage two of the protocol: bandwidth fixed, lambda re-selected by AUC
    // on this detection problem.  Without a provided bandwidth both are
    // selected here (stage one and two collapse onto the same binary data).
    klr::HyperParams hp;
    if (!cfg.sigma && sigma_grid.size() > 1) {
        hp = klr::select_hyperparameters(cv_x, cv_y, sigma_grid, lambda_grid, cfg.cv_folds,
                                         klr::CvCriterion::accuracy,
                                         rng::derive_seed(seed, {0x73746131ULL}));
        sigma_grid = {hp.sigma};
    }
    hp = klr::select_hyperparameters(cv_x, cv_y, sigma_grid, lambda_grid, cfg.cv_folds,
                                     klr::CvCriterion::auc,
                                     rng::derive_seed(seed, {0x73746132ULL}));

    std::vector<int> train_y(static_cast<std::size_t>(train_f.rows() + train_h.rows()), 1);
    for (std::size_t i = static_cast<std::size_t>(train_f.rows()); i < train_y.size(); ++i)
        train_y[i] = 0;
    klr::KlrModel model = klr::train_klr(stack(train_f, train_h), train_y, hp.sigma, hp.lambda);

    Vector scores_f = klr::predict_posterior(model, sample_F);
    Vector scores_h = klr::predict_posterior(model, sample_H);

    NuEstimate est;
    double lo = std::min(scores_f.minCoeff(), scores_h.minCoeff());
    double hi = std::max(scores_f.maxCoeff(), scores_h.maxCoeff());
    if (hi - lo <= 1e-12) {
        // Constant scorer: the samples are statistically indistinguishable to
        // the classifier, which is the F = H limit.
        est.value = 1.0;
        est.degenerate = true;
        est.fit.kind = cfg.kind;
        est.fit.params = {1.0, cfg.kind == RocModelKind::power_linear ? 1.0 : 0.0, 1.0};
        est.fit.slope = 1.0;
        est.auc = 0.5;
        if (cfg.compute_upper_ci) est.upper_ci = 1.0;
        int grid = std::max(2, cfg.envelope.grid_size);
        for (int i = 0; i <= grid; ++i) {
            double a = static_cast<double>(i) / grid;
            est.fit_points.push_back({a, a});
        }
        return est;
    }

    roc::EnvelopeConfig env_cfg = cfg.envelope;
    env_cfg.keep_replicates = cfg.compute_upper_ci;
    roc::RocEnvelope env = roc::bootstrap_envelope(scores_f, scores_h, env_cfg,
                                                   rng::derive_seed(seed, {0x656e7665ULL}));
    est.envelope = env;

    std::vector<RocPoint> points;
    if (cfg.fit_raw_vertices) {
        roc::RocCurve curve = roc::empirical_roc(scores_f, scores_h);
        for (std::size_t i = 0; i < curve.alpha.size(); ++i)
            points.push_back({curve.alpha[i], curve.p[i]});
    } else {
        for (std::size_t i = 0; i < env.grid.size(); ++i)
            points.push_back({env.grid[i], env.mean_curve[i]});
    }

    est.fit = fit_roc_model(points, cfg.kind, cfg.restarts, rng::derive_seed(seed, {0x66697431ULL}));
    // A convex-near-the-endpoint fit can report slope > 1; proportions cannot.
    est.value = std::min(est.fit.slope, 1.0);
    est.fit_points = points;
    est.auc = roc::roc_auc(roc::empirical_roc(scores_f, scores_h));

    if (cfg.compute_upper_ci) {
        if (env.replicate_curves.size() <= 1) {
            // A collapsed envelope carries no spread information.
            est.upper_ci = est.value;
        } else {
            // Resample the slope itself: refit each bootstrap curve
            // (warm-started from the point fit) and take an upper quantile of
            // the slopes.  The pointwise band is too tight for this
            // functional, so the band's lower boundary is fitted too and the
            // larger of the two bounds wins.
            std::vector<double> slopes;
            slopes.reserve(env.replicate_curves.size());
            std::vector<RocPoint> pts(env.grid.size());
            for (const auto& rep : env.replicate_curves) {
                for (std::size_t i = 0; i < env.grid.size(); ++i) pts[i] = {env.grid[i], rep[i]};
                slopes.push_back(
                    std::min(refit_roc_model(pts, cfg.kind, est.fit.params).slope, 1.0));
            }
            std::sort(slopes.begin(), slopes.end());
            double q = (1.0 + cfg.envelope.level) / 2.0;
            double pos = q * static_cast<double>(slopes.size() - 1);
            std::size_t lo = static_cast<std::size_t>(std::floor(pos));
            std::size_t hi = std::min(lo + 1, slopes.size() - 1);
            double upper =
                slopes[lo] + (pos - static_cast<double>(lo)) * (slopes[hi] - slopes[lo]);

            std::vector<RocPoint> lower_points;
            lower_points.reserve(env.grid.size());
            for (std::size_t i = 0; i < env.grid.size(); ++i)
                lower_points.push_back({env.grid[i], env.lower[i]});
            RocFit lower_fit = fit_roc_model(lower_points, cfg.kind, cfg.restarts,
                                             rng::derive_seed(seed, {0x66697432ULL}));
            upper = std::max(upper, lower_fit.slope);

            // When the identity curve explains the fitted points nearly as
            // well as the best model, a slope of 1 cannot be excluded, and in
            // that regime the fitted slope is strongly biased downward.
            // Release the bound instead of trusting resampled spread around a
            // biased centre.
            constexpr double kIdentityReleaseGap = 20.0;
            RocModelParams identity{
                1.0, cfg.kind == RocModelKind::power_linear ? 1.0 : 0.0, 1.0};
            double identity_gap =
                binomial_deviance(cfg.kind, identity, est.fit_points) - est.fit.deviance;
            if (identity_gap <= kIdentityReleaseGap) upper = 1.0;

            est.upper_ci = std::min(std::max(upper, est.value), 1.0);
        }
    }
    return est;
}

}  // namespace mixprop::mpe
