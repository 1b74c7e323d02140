#include "mixprop/cpe.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mixprop/klr.hpp"
#include "mixprop/rng.hpp"

namespace mixprop::cpe {

Vector project_to_simplex(const Vector& v) {
    for (Index i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i])) throw MixpropError("cannot project non-finite vector");
    const Index n = v.size();
    if (n == 0) throw MixpropError("cannot project empty vector");
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0, theta = 0.0;
    for (Index j = 0; j < n; ++j) {
        css += u[static_cast<std::size_t>(j)];
        double t = (css - 1.0) / static_cast<double>(j + 1);
        if (u[static_cast<std::size_t>(j)] - t > 0.0) theta = t;
    }
    Vector out(n);
    for (Index i = 0; i < n; ++i) out[i] = std::max(v[i] - theta, 0.0);
    return out;
}

namespace {

const boost::math::normal_distribution<double> kStdNormal;

Vector clamp01(const Vector& v) {
    Vector out = v;
    for (Index i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], 0.0, 1.0);
    return out;
}

Matrix subsample_rows(const Matrix& X, Index cap, std::mt19937_64& stream) {
    if (X.rows() <= cap) return X;
    std::vector<Index> idx(static_cast<std::size_t>(X.rows()));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::shuffle(idx.begin(), idx.end(), stream);
    Matrix out(cap, X.cols());
    for (Index i = 0; i < cap; ++i) out.row(i) = X.row(idx[static_cast<std::size_t>(i)]);
    return out;
}

void check_trial(const dataio::CpeTrial& trial) {
    if (trial.test_features.rows() == 0) throw MixpropError("empty test sample");
    if (trial.train_per_class.empty()) throw MixpropError("no observed training classes");
}

void require_fully_observed(const dataio::CpeTrial& trial, const char* method) {
    if (static_cast<int>(trial.train_per_class.size()) != trial.class_count)
        throw MixpropError(std::string(method) + " needs every class observed");
}

/// Lazily computed per-trial state shared across estimators so that running
/// several methods on one trial does not repeat the expensive selections.
/// All seeds derive from (trial.seed, fixed ids), never from call order.
class TrialState {
  public:
    TrialState(const dataio::CpeTrial& trial, const CpeConfig& cfg) : trial_(trial), cfg_(cfg) {
        check_trial(trial);
    }

    int observed() const { return static_cast<int>(trial_.train_per_class.size()); }

    /// Stage one of the protocol: bandwidth (and a default regularization)
    /// from accuracy CV on the pooled labeled training classes.
    const klr::HyperParams& stage1() {
        if (!stage1_) {
            Matrix X;
            std::vector<int> y;
            pooled_cv_data(X, y);
            std::vector<double> sigma_grid;
            if (cfg_.nu.sigma) {
                sigma_grid = {*cfg_.nu.sigma};
            } else if (!cfg_.nu.sigma_grid.empty()) {
                sigma_grid = cfg_.nu.sigma_grid;
            } else {
                double med = klr::median_pairwise_distance(
                    X, rng::derive_seed(trial_.seed, {0x6d656431ULL}));
                for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) sigma_grid.push_back(f * med);
            }
            if (observed() < 2) {
                // Single training class: no labeled CV problem exists, fall
                // back to the heuristic bandwidth and mid-grid shrinkage.
                stage1_ = klr::HyperParams{sigma_grid[sigma_grid.size() / 2], 1e-2, 0.0};
            } else {
                stage1_ = klr::select_hyperparameters(
                    X, y, sigma_grid, lambda_grid(), cfg_.nu.cv_folds, klr::CvCriterion::accuracy,
                    rng::derive_seed(trial_.seed, {0x73746731ULL}));
            }
        }
        return *stage1_;
    }

    /// nu(test, class i) with the stage-one bandwidth (i is 0-based).
    const mpe::NuEstimate& class_nu(int i) {
        auto& slot = class_nu_.at(static_cast<std::size_t>(i));
        if (!slot) {
            mpe::NuConfig nu_cfg = cfg_.nu;
            nu_cfg.sigma = stage1().sigma;
            slot = mpe::estimate_nu(trial_.test_features,
                                    trial_.train_per_class[static_cast<std::size_t>(i)], nu_cfg,
                                    rng::derive_seed(trial_.seed, {0x6e7545ULL,
                                                                  static_cast<std::uint64_t>(i)}));
        }
        return *slot;
    }

    /// Vector of nu(test, class i) over all observed classes.
    Vector nu_vector() {
        Vector v(observed());
        for (int i = 0; i < observed(); ++i) v[i] = class_nu(i).value;
        return v;
    }

    /// One-vs-rest posterior models over the observed classes, trained with
    /// the stage-one hyperparameters on capped training data.
    const std::vector<klr::KlrModel>& ovr_models() {
        if (!ovr_) {
            Matrix X;
            std::vector<int> y;
            pooled_train_data(X, y);
            const klr::HyperParams& hp = stage1();
            std::vector<klr::KlrModel> models;
            for (int c = 0; c < observed(); ++c) {
                std::vector<int> bin(y.size());
                for (std::size_t j = 0; j < y.size(); ++j) bin[j] = y[j] == c + 1 ? 1 : 0;
                models.push_back(klr::train_klr(X, bin, hp.sigma, hp.lambda));
            }
            ovr_ = std::move(models);
        }
        return *ovr_;
    }

    /// Per-class posterior matrix on the test sample, rows normalized to
    /// sum to one across classes.
    const Matrix& test_posteriors() {
        if (!posteriors_) {
            const auto& models = ovr_models();
            Matrix Q(trial_.test_features.rows(), observed());
            for (int c = 0; c < observed(); ++c)
                Q.col(c) = klr::predict_posterior(models[static_cast<std::size_t>(c)],
                                                  trial_.test_features);
            for (Index r = 0; r < Q.rows(); ++r) Q.row(r) /= Q.row(r).sum();
            posteriors_ = std::move(Q);
        }
        return *posteriors_;
    }

    /// Class frequencies of the (capped) training data the OvR models saw.
    const Vector& train_priors() {
        ovr_models();
        return train_priors_;
    }

    const dataio::CpeTrial& trial() const { return trial_; }
    const CpeConfig& cfg() const { return cfg_; }

    std::vector<double> lambda_grid() const {
        if (!cfg_.nu.lambda_grid.empty()) return cfg_.nu.lambda_grid;
        return {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    }

  private:
    void pooled_cv_data(Matrix& X, std::vector<int>& y) const {
        pool(cfg_.nu.cv_subsample, 0x63767370ULL, X, y);
    }

    void pooled_train_data(Matrix& X, std::vector<int>& y) {
        pool(cfg_.nu.max_train, 0x74726e70ULL, X, y);
        Vector priors(observed());
        for (int c = 0; c < observed(); ++c)
            priors[c] = static_cast<double>(
                std::count(y.begin(), y.end(), c + 1));
        train_priors_ = priors / priors.sum();
    }

    void pool(Index cap, std::uint64_t id, Matrix& X, std::vector<int>& y) const {
        std::vector<Matrix> parts;
        Index total = 0;
        for (int c = 0; c < observed(); ++c) {
            auto stream = rng::make_stream(trial_.seed, {id, static_cast<std::uint64_t>(c)});
            parts.push_back(
                subsample_rows(trial_.train_per_class[static_cast<std::size_t>(c)], cap, stream));
            total += parts.back().rows();
        }
        X.resize(total, trial_.test_features.cols());
        y.clear();
        Index at = 0;
        for (int c = 0; c < observed(); ++c) {
            X.middleRows(at, parts[static_cast<std::size_t>(c)].rows()) =
                parts[static_cast<std::size_t>(c)];
            at += parts[static_cast<std::size_t>(c)].rows();
            y.insert(y.end(), static_cast<std::size_t>(parts[static_cast<std::size_t>(c)].rows()),
                     c + 1);
        }
    }

    const dataio::CpeTrial& trial_;
    const CpeConfig& cfg_;
    std::optional<klr::HyperParams> stage1_;
    std::vector<std::optional<mpe::NuEstimate>> class_nu_ =
        std::vector<std::optional<mpe::NuEstimate>>(trial_.train_per_class.size());
    std::optional<std::vector<klr::KlrModel>> ovr_;
    std::optional<Matrix> posteriors_;
    Vector train_priors_;
};

ProportionEstimate incomplete_from(TrialState& st) {
    const auto& trial = st.trial();
    const int M = trial.class_count;
    ProportionEstimate est;
    est.method = "mpe-incomplete";
    Vector nus = st.nu_vector();
    if (trial.last_class_unobserved()) {
        est.raw_values.resize(M);
        est.raw_values.head(M - 1) = nus;
        est.raw_values[M - 1] = 1.0 - nus.sum();
    } else {
        est.raw_values = nus;
        est.extra_mass = 1.0 - nus.sum();
    }
    est.values = clamp01(est.raw_values);
    return est;
}

ProportionEstimate projected_from(TrialState& st) {
    require_fully_observed(st.trial(), "mpe-projected");
    ProportionEstimate est;
    est.method = "mpe-projected";
    est.raw_values = st.nu_vector();
    est.values = project_to_simplex(est.raw_values);
    return est;
}

ProportionEstimate joint_from(TrialState& st) {
    require_fully_observed(st.trial(), "mpe-joint");
    const int M = st.trial().class_count;
    std::vector<std::vector<mpe::RocPoint>> class_points;
    for (int i = 0; i < M; ++i) class_points.push_back(st.class_nu(i).fit_points);
    JointFit jf = joint_fit_binormal(class_points, st.cfg().joint_max_outer);
    ProportionEstimate est;
    est.method = "mpe-joint";
    est.raw_values = st.nu_vector();  // unconstrained per-class slopes
    est.values = jf.gammas;
    est.converged = jf.converged;
    return est;
}

ProportionEstimate rescaled_from(TrialState& st) {
    const auto& trial = st.trial();
    require_fully_observed(trial, "binary rescaled estimator");
    if (trial.class_count != 2) throw MixpropError("binary rescaled estimator needs M = 2");
    mpe::NuConfig nu_cfg = st.cfg().nu;
    nu_cfg.sigma = st.stage1().sigma;
    auto nu_between = [&](int a, int b) {
        return mpe::estimate_nu(trial.train_per_class[static_cast<std::size_t>(a)],
                                trial.train_per_class[static_cast<std::size_t>(b)], nu_cfg,
                                rng::derive_seed(trial.seed,
                                                 {0x72736358ULL, static_cast<std::uint64_t>(a),
                                                  static_cast<std::uint64_t>(b)}));
    };
    mpe::NuEstimate n12 = nu_between(0, 1);
    mpe::NuEstimate n21 = nu_between(1, 0);
    // Rescaling divides by 1 - nu between the classes; that is only meaningful
    // when the scorer actually separates them.  Near-chance AUC means the
    // fitted slopes are noise, so fail loudly instead of dividing by it.
    constexpr double kMinSeparationAuc = 0.7;
    if (n12.auc < kMinSeparationAuc || n21.auc < kMinSeparationAuc)
        throw MixpropError("classes statistically indistinguishable");
    double den1 = 1.0 - n12.value;
    double den2 = 1.0 - n21.value;
    if (den1 < 0.05 || den2 < 0.05)
        throw MixpropError("classes statistically indistinguishable");
    ProportionEstimate est;
    est.method = "mpe-rescaled";
    est.raw_values.resize(2);
    est.raw_values[0] = (1.0 - st.class_nu(1).value) / den1;
    est.raw_values[1] = (1.0 - st.class_nu(0).value) / den2;
    est.values = clamp01(est.raw_values);
    return est;
}

ProportionEstimate em_from(TrialState& st) {
    require_fully_observed(st.trial(), "EM estimator");
    const int M = st.trial().class_count;
    const Matrix& Q = st.test_posteriors();
    const Vector& train_pi = st.train_priors();
    const auto& cfg = st.cfg();

    Vector pi = Vector::Constant(M, 1.0 / M);
    bool converged = false;
    for (int it = 0; it < cfg.em_max_iters; ++it) {
        Vector next = Vector::Zero(M);
        for (Index r = 0; r < Q.rows(); ++r) {
            Vector w(M);
            for (int c = 0; c < M; ++c) w[c] = pi[c] * Q(r, c) / train_pi[c];
            next += w / w.sum();
        }
        next /= static_cast<double>(Q.rows());
        double change = (next - pi).cwiseAbs().sum();
        pi = next;
        if (change <= cfg.em_tol) {
            converged = true;
            break;
        }
    }
    ProportionEstimate est;
    est.method = "em";
    est.values = pi;
    est.raw_values = pi;
    est.converged = converged;
    return est;
}

/// Integral of the product of two axis-aligned Gaussian product kernels,
/// averaged over all point pairs: the Gram entries of the L2 objective.
double kde_cross(const Matrix& A, const Vector& ha, const Matrix& B, const Vector& hb) {
    const Index d = A.cols();
    Vector var(d);
    double norm = 1.0;
    for (Index k = 0; k < d; ++k) {
        var[k] = ha[k] * ha[k] + hb[k] * hb[k];
        norm /= std::sqrt(2.0 * M_PI * var[k]);
    }
    double acc = 0.0;
    for (Index i = 0; i < A.rows(); ++i)
        for (Index j = 0; j < B.rows(); ++j) {
            double e = 0.0;
            for (Index k = 0; k < d; ++k) {
                double diff = A(i, k) - B(j, k);
                e += diff * diff / var[k];
            }
            acc += std::exp(-0.5 * e);
        }
    return norm * acc / (static_cast<double>(A.rows()) * static_cast<double>(B.rows()));
}

Vector silverman_bandwidths(const Matrix& X) {
    const Index n = X.rows();
    const Index d = X.cols();
    double factor = std::pow(4.0 / ((d + 2.0) * static_cast<double>(n)), 1.0 / (d + 4.0));
    Vector h(d);
    for (Index k = 0; k < d; ++k) {
        double mean = X.col(k).mean();
        double var = (X.col(k).array() - mean).square().mean();
        h[k] = std::max(std::sqrt(var), 1e-3) * factor;
    }
    return h;
}

ProportionEstimate l2_from(TrialState& st) {
    require_fully_observed(st.trial(), "L2 estimator");
    const auto& trial = st.trial();
    const int M = trial.class_count;
    const auto& cfg = st.cfg();

    // One bandwidth for every density, averaged over the per-class Silverman
    // rules.  Smoothing with a common kernel commutes with mixing, so the
    // smoothed objective keeps its minimum at the true proportions no matter
    // the bandwidth; per-distribution bandwidths would break that and bias the
    // fit toward uniform.  Averaging over classes also avoids the inflated
    // spread a Silverman rule would read off the test mixture.
    Vector h = Vector::Zero(trial.test_features.cols());
    for (int i = 0; i < M; ++i)
        h += silverman_bandwidths(trial.train_per_class[static_cast<std::size_t>(i)]);
    h /= static_cast<double>(M);

    Matrix A(M, M);
    Vector b(M);
    for (int i = 0; i < M; ++i) {
        const Matrix& Xi = trial.train_per_class[static_cast<std::size_t>(i)];
        b[i] = kde_cross(Xi, h, trial.test_features, h);
        for (int j = i; j < M; ++j) {
            A(i, j) = kde_cross(Xi, h, trial.train_per_class[static_cast<std::size_t>(j)], h);
            A(j, i) = A(i, j);
        }
    }

    // Projected gradient on pi' A pi - 2 b' pi with a fixed 1/L step.
    double lip = 2.0 * A.cwiseAbs().rowwise().sum().maxCoeff();
    Vector pi = Vector::Constant(M, 1.0 / M);
    bool converged = false;
    for (int it = 0; it < cfg.l2_max_iters; ++it) {
        Vector grad = 2.0 * (A * pi - b);
        double residual = (pi - project_to_simplex(pi - grad)).cwiseAbs().maxCoeff();
        if (residual <= cfg.l2_tol) {
            converged = true;
            break;
        }
        pi = project_to_simplex(pi - grad / lip);
    }
    ProportionEstimate est;
    est.method = "l2-kde";
    est.values = pi;
    est.raw_values = pi;
    est.converged = converged;
    return est;
}

ProportionEstimate baseline_from(TrialState& st) {
    require_fully_observed(st.trial(), "baseline estimator");
    const int M = st.trial().class_count;
    const Matrix& Q = st.test_posteriors();
    Vector counts = Vector::Zero(M);
    for (Index r = 0; r < Q.rows(); ++r) {
        Index best;
        Q.row(r).maxCoeff(&best);
        counts[best] += 1.0;
    }
    ProportionEstimate est;
    est.method = "baseline";
    est.values = counts / static_cast<double>(Q.rows());
    est.raw_values = est.values;
    return est;
}

ProportionEstimate dispatch(TrialState& st, const std::string& method) {
    if (method == "mpe-incomplete") return incomplete_from(st);
    if (method == "mpe-projected") return projected_from(st);
    if (method == "mpe-joint") return joint_from(st);
    if (method == "mpe-rescaled") return rescaled_from(st);
    if (method == "em") return em_from(st);
    if (method == "l2-kde") return l2_from(st);
    if (method == "baseline") return baseline_from(st);
    throw MixpropError("unknown estimator method: " + method);
}

}  // namespace

JointFit joint_fit_binormal(const std::vector<std::vector<mpe::RocPoint>>& class_points,
                            int max_outer) {
    const int M = static_cast<int>(class_points.size());
    if (M == 0) throw MixpropError("joint fit needs at least one class");

    // Precompute normal quantiles once per point; deviance evals then only
    // need the forward CDF.
    struct Prepared {
        std::vector<double> z, p, alpha;
    };
    std::vector<Prepared> prep(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) {
        for (const auto& pt : class_points[static_cast<std::size_t>(i)]) {
            if ((pt.alpha == 0.0 && pt.p == 0.0) || (pt.alpha == 1.0 && pt.p == 1.0)) continue;
            double z;
            if (pt.alpha == 0.0)
                z = -std::numeric_limits<double>::infinity();
            else if (pt.alpha == 1.0)
                z = std::numeric_limits<double>::infinity();
            else
                z = boost::math::quantile(kStdNormal, pt.alpha);
            prep[static_cast<std::size_t>(i)].z.push_back(z);
            prep[static_cast<std::size_t>(i)].p.push_back(pt.p);
            prep[static_cast<std::size_t>(i)].alpha.push_back(pt.alpha);
        }
    }

    auto class_dev = [&](int i, double gamma, double delta) {
        const auto& pr = prep[static_cast<std::size_t>(i)];
        double dev = 0.0;
        for (std::size_t j = 0; j < pr.z.size(); ++j) {
            double f;
            if (std::isinf(pr.z[j]))
                f = pr.z[j] < 0 ? 0.0 : 1.0;
            else
                f = (1.0 - gamma) * boost::math::cdf(kStdNormal, pr.z[j] + delta) +
                    gamma * pr.alpha[j];
            f = std::clamp(f, 1e-9, 1.0 - 1e-9);
            dev += -2.0 * (pr.p[j] * std::log(f) + (1.0 - pr.p[j]) * std::log(1.0 - f));
        }
        return dev;
    };

    // Warm start from unconstrained per-class fits, gammas projected.
    Vector gam(M), del(M);
    for (int i = 0; i < M; ++i) {
        mpe::RocFit f = mpe::fit_roc_model(class_points[static_cast<std::size_t>(i)],
                                           mpe::RocModelKind::binormal_linear, 8, 0);
        gam[i] = f.params.gamma;
        del[i] = std::clamp(f.params.delta, 1e-6, 100.0);
    }
    gam = project_to_simplex(gam);

    auto total_dev = [&](const Vector& g, const Vector& d) {
        double t = 0.0;
        for (int i = 0; i < M; ++i) t += class_dev(i, g[i], d[i]);
        return t;
    };

    JointFit out;
    out.converged = false;
    double current = total_dev(gam, del);
    out.objective_trace.push_back(current);
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;

    for (int round = 0; round < max_outer; ++round) {
        // Per-class golden-section refinement of delta (log domain); only
        // improvements are accepted.
        for (int i = 0; i < M; ++i) {
            double lo = std::log(1e-6), hi = std::log(100.0);
            double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
            double f1 = class_dev(i, gam[i], std::exp(x1));
            double f2 = class_dev(i, gam[i], std::exp(x2));
            for (int it = 0; it < 60; ++it) {
                if (f1 <= f2) {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - phi * (hi - lo);
                    f1 = class_dev(i, gam[i], std::exp(x1));
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + phi * (hi - lo);
                    f2 = class_dev(i, gam[i], std::exp(x2));
                }
            }
            double cand = std::exp(f1 <= f2 ? x1 : x2);
            if (class_dev(i, gam[i], cand) < class_dev(i, gam[i], del[i])) del[i] = cand;
        }

        // Projected-gradient step on the gamma block (one-sided numerical
        // derivatives keep evaluations inside [0,1]).
        Vector grad(M);
        const double h = 1e-6;
        for (int i = 0; i < M; ++i) {
            double base = class_dev(i, gam[i], del[i]);
            if (gam[i] + h <= 1.0)
                grad[i] = (class_dev(i, gam[i] + h, del[i]) - base) / h;
            else
                grad[i] = (base - class_dev(i, gam[i] - h, del[i])) / h;
        }
        double before = total_dev(gam, del);
        double step = 1.0;
        for (int bt = 0; bt < 60; ++bt) {
            Vector cand = project_to_simplex(gam - step * grad);
            if (total_dev(cand, del) < before - 1e-12) {
                gam = cand;
                break;
            }
            step *= 0.5;
        }

        double after = total_dev(gam, del);
        out.objective_trace.push_back(after);
        if (current - after <= 1e-10 * (1.0 + std::abs(current))) {
            current = after;
            out.converged = true;
            break;
        }
        current = after;
    }

    out.gammas = gam;
    out.deltas = del;
    return out;
}

ProportionEstimate estimate_incomplete(const dataio::CpeTrial& trial, const CpeConfig& cfg) {
    TrialState st(trial, cfg);
    return incomplete_from(st);
}

ProportionEstimate estimate_projected(const dataio::CpeTrial& trial, const CpeConfig& cfg) {
    TrialState st(trial, cfg);
    return projected_from(st);
}

ProportionEstimate estimate_joint(const dataio::CpeTrial& trial, const CpeConfig& cfg) {
    TrialState st(trial, cfg);
    return joint_from(st);
}

ProportionEstimate estimate_binary_rescaled(const dataio::CpeTrial& trial, const CpeConfig& cfg) {
    TrialState st(trial, cfg);
    return rescaled_from(st);
}

ProportionEstimate estimate_em(const dataio::CpeTrial& trial, const CpeConfig& cfg) {
    TrialState st(trial, cfg);
    return em_from(st);
}

ProportionEstimate estimate_l2_kde(const dataio::CpeTrial& trial, const CpeConfig& cfg) {
    TrialState st(trial, cfg);
    return l2_from(st);
}

ProportionEstimate estimate_baseline(const dataio::CpeTrial& trial, const CpeConfig& cfg) {
    TrialState st(trial, cfg);
    return baseline_from(st);
}

std::vector<ProportionEstimate> estimate_many(const dataio::CpeTrial& trial,
                                              const std::vector<std::string>& methods,
                                              const CpeConfig& cfg) {
    TrialState st(trial, cfg);
    std::vector<ProportionEstimate> out;
    for (const auto& m : methods) out.push_back(dispatch(st, m));
    return out;
}

std::vector<std::pair<double, double>> confidence_intervals(const dataio::CpeTrial& trial,
                                                            double level, const CpeConfig& cfg) {
    if (level <= 0.0 || level >= 1.0) throw MixpropError("level must be in (0,1)");
    require_fully_observed(trial, "confidence intervals");
    check_trial(trial);
    const int M = trial.class_count;

    CpeConfig ci_cfg = cfg;
    ci_cfg.nu.compute_upper_ci = true;
    ci_cfg.nu.envelope.level = level;
    TrialState st(trial, ci_cfg);

    std::vector<double> uppers(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) {
        const mpe::NuEstimate& e = st.class_nu(i);
        uppers[static_cast<std::size_t>(i)] = std::min(1.0, e.upper_ci.value_or(e.value));
    }
    std::vector<std::pair<double, double>> out;
    for (int i = 0; i < M; ++i) {
        double other = 0.0;
        for (int j = 0; j < M; ++j)
            if (j != i) other += uppers[static_cast<std::size_t>(j)];
        // If the uppers sum below 1 the derived lower bound would cross the
        // upper one; truncating keeps the interval well-formed.
        double up = uppers[static_cast<std::size_t>(i)];
        out.emplace_back(std::min(std::max(0.0, 1.0 - other), up), up);
    }
    return out;
}

}  // namespace mixprop::cpe
