#include "mixprop/rocfit.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <functional>
#include <random>

#include "mixprop/rng.hpp"

namespace mixprop::mpe {

namespace {

const boost::math::normal_distribution<double> kStdNormal;

void check_params(RocModelKind kind, const RocModelParams& p) {
    bool ok = p.gamma >= 0.0 && p.gamma <= 1.0 && p.delta >= 0.0 && std::isfinite(p.delta);
    if (kind == RocModelKind::power_linear) ok = ok && p.mu > 0.0 && std::isfinite(p.mu);
    if (!ok) throw MixpropError("invalid ROC model parameters");
}

double power_core(double delta, double mu, double alpha) {
    // (1 + delta*(alpha^-mu - 1))^(-1/mu), computed through logs so that
    // alpha near 0 underflows cleanly instead of overflowing.
    double t = std::expm1(-mu * std::log(alpha));  // alpha^-mu - 1
    double l = std::log1p(delta * t);
    return std::exp(-l / mu);
}

}  // namespace

double eval_model(RocModelKind kind, const RocModelParams& params, double alpha) {
    check_params(kind, params);
    if (alpha < 0.0 || alpha > 1.0) throw MixpropError("alpha must be in [0,1]");
    if (alpha == 0.0) return 0.0;
    if (alpha == 1.0) return 1.0;
    if (kind == RocModelKind::binormal_linear) {
        double z = boost::math::quantile(kStdNormal, alpha);
        return (1.0 - params.gamma) * boost::math::cdf(kStdNormal, z + params.delta) +
               params.gamma * alpha;
    }
    return (1.0 - params.gamma) * power_core(params.delta, params.mu, alpha) +
           params.gamma * alpha;
}

double right_slope(RocModelKind kind, const RocModelParams& params) {
    check_params(kind, params);
    if (kind == RocModelKind::binormal_linear) return params.gamma;
    return (1.0 - params.gamma) * params.delta + params.gamma;
}

double binomial_deviance(RocModelKind kind, const RocModelParams& params,
                         const std::vector<RocPoint>& points) {
    check_params(kind, params);
    double dev = 0.0;
    for (const auto& pt : points) {
        if (pt.alpha < 0.0 || pt.alpha > 1.0 || pt.p < 0.0 || pt.p > 1.0)
            throw MixpropError("ROC points must lie in the unit square");
        if ((pt.alpha == 0.0 && pt.p == 0.0) || (pt.alpha == 1.0 && pt.p == 1.0)) continue;
        double f = std::clamp(eval_model(kind, params, pt.alpha), 1e-9, 1.0 - 1e-9);
        dev += -2.0 * (pt.p * std::log(f) + (1.0 - pt.p) * std::log(1.0 - f));
    }
    return dev;
}

namespace {

// ---- minimal Nelder-Mead on doubles -------------------------------------

struct SimplexResult {
    std::vector<double> x;
    double value = 0.0;
};

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          std::vector<double> x0, double step, int max_iters) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> verts(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) verts[i + 1][i] += step;
    std::vector<double> vals(n + 1);
    for (std::size_t i = 0; i <= n; ++i) vals[i] = f(verts[i]);

    auto order = [&]() {
        std::vector<std::size_t> idx(n + 1);
        for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        std::vector<std::vector<double>> v2;
        std::vector<double> f2;
        for (std::size_t i : idx) {
            v2.push_back(verts[i]);
            f2.push_back(vals[i]);
        }
        verts.swap(v2);
        vals.swap(f2);
    };

    for (int it = 0; it < max_iters; ++it) {
        order();
        if (std::abs(vals[n] - vals[0]) <= 1e-12 * (1.0 + std::abs(vals[0]))) break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) centroid[j] += verts[i][j] / n;

        auto blend = [&](const std::vector<double>& from, double coef) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j) p[j] = centroid[j] + coef * (centroid[j] - from[j]);
            return p;
        };

        auto refl = blend(verts[n], 1.0);
        double f_refl = f(refl);
        if (f_refl < vals[0]) {
            auto expa = blend(verts[n], 2.0);
            double f_expa = f(expa);
            if (f_expa < f_refl) {
                verts[n] = expa;
                vals[n] = f_expa;
            } else {
                verts[n] = refl;
                vals[n] = f_refl;
            }
        } else if (f_refl < vals[n - 1]) {
            verts[n] = refl;
            vals[n] = f_refl;
        } else {
            bool outside = f_refl < vals[n];
            auto contr = blend(verts[n], outside ? 0.5 : -0.5);
            double f_contr = f(contr);
            if (f_contr < (outside ? f_refl : vals[n])) {
                verts[n] = contr;
                vals[n] = f_contr;
            } else {
                for (std::size_t i = 1; i <= n; ++i) {
                    for (std::size_t j = 0; j < n; ++j)
                        verts[i][j] = verts[0][j] + 0.5 * (verts[i][j] - verts[0][j]);
                    vals[i] = f(verts[i]);
                }
            }
        }
    }
    order();
    return {verts[0], vals[0]};
}

// ---- parameter transforms -----------------------------------------------

double logit(double p) {
    return std::log(p / (1.0 - p));
}

RocModelParams decode(RocModelKind kind, const std::vector<double>& theta) {
    // Clamp the search coordinates: corner-shaped curves push the simplex far
    // enough out that a bare exp would under/overflow to 0 or inf, and the
    // deviance is flat out there anyway.
    auto bounded = [](double t) { return std::clamp(t, -60.0, 60.0); };
    RocModelParams p;
    p.gamma = 1.0 / (1.0 + std::exp(-bounded(theta[0])));
    p.delta = std::exp(bounded(theta[1]));
    p.mu = kind == RocModelKind::power_linear ? std::exp(bounded(theta[2])) : 1.0;
    return p;
}

std::vector<double> encode(RocModelKind kind, const RocModelParams& p) {
    std::vector<double> theta{logit(std::clamp(p.gamma, 1e-7, 1.0 - 1e-7)),
                              std::log(std::max(p.delta, 1e-8))};
    if (kind == RocModelKind::power_linear) theta.push_back(std::log(p.mu));
    return theta;
}

}  // namespace

RocFit fit_roc_model(const std::vector<RocPoint>& points, RocModelKind kind, int restarts,
                     std::uint64_t seed) {
    int interior = 0;
    for (const auto& pt : points)
        if (!((pt.alpha == 0.0 && pt.p == 0.0) || (pt.alpha == 1.0 && pt.p == 1.0))) ++interior;
    if (interior < 3) throw MixpropError("need at least 3 interior ROC points to fit");

    auto objective = [&](const std::vector<double>& theta) {
        return binomial_deviance(kind, decode(kind, theta), points);
    };

    // Candidate starts: a fixed grid pruned by initial deviance, plus a
    // near-identity start so the fit can never lose to the identity curve.
    std::vector<std::vector<double>> starts;
    for (double g : {0.1, 0.5, 0.9})
        for (double d : {0.1, 1.0, 5.0}) {
            if (kind == RocModelKind::power_linear) {
                for (double m : {0.5, 1.0, 2.0}) starts.push_back(encode(kind, {g, d, m}));
            } else {
                starts.push_back(encode(kind, {g, d}));
            }
        }
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < starts.size(); ++i) ranked.emplace_back(objective(starts[i]), i);
    std::sort(ranked.begin(), ranked.end());

    const int grid_keep = std::min<int>(restarts, static_cast<int>(ranked.size()));
    std::vector<std::vector<double>> chosen;
    for (int i = 0; i < grid_keep; ++i) chosen.push_back(starts[ranked[i].second]);
    if (restarts > static_cast<int>(ranked.size())) {
        auto stream = rng::make_stream(seed, {0x666974ULL});
        std::uniform_real_distribution<double> ua(-3.0, 3.0), ud(std::log(0.05), std::log(8.0)),
            um(std::log(0.3), std::log(3.0));
        for (int i = static_cast<int>(ranked.size()); i < restarts; ++i) {
            std::vector<double> t{ua(stream), ud(stream)};
            if (kind == RocModelKind::power_linear) t.push_back(um(stream));
            chosen.push_back(std::move(t));
        }
    }
    chosen.push_back(encode(kind, {1.0 - 1e-7, kind == RocModelKind::power_linear ? 1.0 : 1e-8, 1.0}));

    double best_initial = ranked.empty() ? 0.0 : ranked[0].first;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> best_theta;
    for (const auto& s : chosen) {
        SimplexResult r = nelder_mead(objective, s, 0.5, 400);
        if (r.value < best_val) {
            best_val = r.value;
            best_theta = r.x;
        }
    }

    RocFit fit;
    fit.kind = kind;
    fit.improved = best_val < best_initial;
    if (!fit.improved) {
        // Nothing beat the best grid start's initial value; report that start.
        best_theta = starts[ranked[0].second];
        best_val = best_initial;
    }
    fit.params = decode(kind, best_theta);
    fit.deviance = best_val;

    // The identity curve belongs to both families; never report worse.
    RocModelParams identity{1.0, kind == RocModelKind::power_linear ? 1.0 : 0.0, 1.0};
    double identity_dev = binomial_deviance(kind, identity, points);
    if (fit.deviance > identity_dev) {
        fit.params = identity;
        fit.deviance = identity_dev;
    }
    fit.slope = right_slope(kind, fit.params);
    return fit;
}

RocFit refit_roc_model(const std::vector<RocPoint>& points, RocModelKind kind,
                       const RocModelParams& start, int max_iters) {
    auto objective = [&](const std::vector<double>& theta) {
        return binomial_deviance(kind, decode(kind, theta), points);
    };
    std::vector<double> theta0 = encode(kind, start);
    double start_val = objective(theta0);
    SimplexResult r = nelder_mead(objective, theta0, 0.25, max_iters);

    RocFit fit;
    fit.kind = kind;
    fit.improved = r.value < start_val;
    if (fit.improved) {
        fit.params = decode(kind, r.x);
        fit.deviance = r.value;
    } else {
        fit.params = decode(kind, theta0);
        fit.deviance = start_val;
    }

    RocModelParams identity{1.0, kind == RocModelKind::power_linear ? 1.0 : 0.0, 1.0};
    double identity_dev = binomial_deviance(kind, identity, points);
    if (fit.deviance > identity_dev) {
        fit.params = identity;
        fit.deviance = identity_dev;
    }
    fit.slope = right_slope(kind, fit.params);
    return fit;
}

}  // namespace mixprop::mpe
