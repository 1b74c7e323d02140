#include "mixprop/roc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mixprop/rng.hpp"

namespace mixprop::roc {

namespace {

struct ScoredWeight {
    double score;
    double w_alt;
    double w_null;
};

RocCurve build_curve(std::vector<ScoredWeight>& pool, double total_alt, double total_null,
                     Index n_alt, Index n_null) {
    std::sort(pool.begin(), pool.end(),
              [](const ScoredWeight& a, const ScoredWeight& b) { return a.score > b.score; });

    RocCurve c;
    c.n_alt = n_alt;
    c.n_null = n_null;
    c.alpha.push_back(0.0);
    c.p.push_back(0.0);
    double cum_alt = 0.0, cum_null = 0.0;
    std::size_t i = 0;
    while (i < pool.size()) {
        double s = pool[i].score;
        // Merge equal scores into a single step.
        while (i < pool.size() && pool[i].score == s) {
            cum_alt += pool[i].w_alt;
            cum_null += pool[i].w_null;
            ++i;
        }
        // The running sums and the vectorized totals can associate differently,
        // so the ratios may overshoot 1 by an ulp; coordinates are probabilities.
        c.alpha.push_back(std::min(cum_null / total_null, 1.0));
        c.p.push_back(std::min(cum_alt / total_alt, 1.0));
    }
    c.alpha.back() = 1.0;
    c.p.back() = 1.0;
    return c;
}

}  // namespace

double RocCurve::eval(double a) const {
    // Collapse vertical runs: for each distinct alpha keep the highest p.
    // Vertices are already sorted by (alpha, p).
    if (a <= 0.0) {
        double top = 0.0;
        for (std::size_t i = 0; i < alpha.size() && alpha[i] <= 0.0; ++i) top = p[i];
        return top;
    }
    if (a >= 1.0) return 1.0;
    // Find the last vertex with alpha <= a and the first with alpha > a.
    auto it = std::upper_bound(alpha.begin(), alpha.end(), a);
    std::size_t hi = static_cast<std::size_t>(it - alpha.begin());
    std::size_t lo = hi - 1;
    if (alpha[hi] == alpha[lo]) return p[hi];
    // Use the top p at the left alpha (end of any vertical run).
    double t = (a - alpha[lo]) / (alpha[hi] - alpha[lo]);
    return p[lo] + t * (p[hi] - p[lo]);
}

RocCurve empirical_roc(const Vector& scores_alt, const Vector& scores_null) {
    return weighted_roc(scores_alt, Vector::Ones(scores_alt.size()), scores_null,
                        Vector::Ones(scores_null.size()));
}

RocCurve weighted_roc(const Vector& scores_alt, const Vector& weights_alt,
                      const Vector& scores_null, const Vector& weights_null) {
    if (scores_alt.size() == 0 || scores_null.size() == 0)
        throw MixpropError("empirical ROC needs non-empty samples");
    if (!scores_alt.allFinite() || !scores_null.allFinite())
        throw MixpropError("scores must be finite");
    if (weights_alt.size() != scores_alt.size() || weights_null.size() != scores_null.size())
        throw MixpropError("weight length mismatch");

    std::vector<ScoredWeight> pool;
    pool.reserve(static_cast<std::size_t>(scores_alt.size() + scores_null.size()));
    for (Index i = 0; i < scores_alt.size(); ++i)
        pool.push_back({scores_alt[i], weights_alt[i], 0.0});
    for (Index i = 0; i < scores_null.size(); ++i)
        pool.push_back({scores_null[i], 0.0, weights_null[i]});
    return build_curve(pool, weights_alt.sum(), weights_null.sum(), scores_alt.size(),
                       scores_null.size());
}

double roc_auc(const RocCurve& c) {
    double auc = 0.0;
    for (std::size_t i = 1; i < c.alpha.size(); ++i)
        auc += (c.alpha[i] - c.alpha[i - 1]) * 0.5 * (c.p[i] + c.p[i - 1]);
    return auc;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.size() == 1) return sorted[0];
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

RocEnvelope bootstrap_envelope(const Vector& scores_alt, const Vector& scores_null,
                               const EnvelopeConfig& cfg, std::uint64_t seed) {
    if (cfg.replicates < 1) throw MixpropError("need at least one bootstrap replicate");
    if (cfg.level <= 0.0 || cfg.level >= 1.0) throw MixpropError("level must be in (0,1)");

    RocEnvelope env;
    env.level = cfg.level;
    env.replicates = cfg.replicates;

    env.grid.reserve(cfg.grid_size);
    for (int i = 0; i < cfg.grid_size; ++i)
        env.grid.push_back(static_cast<double>(i) / (cfg.grid_size - 1));
    if (cfg.augment_tail_vertices) {
        RocCurve base = empirical_roc(scores_alt, scores_null);
        for (double a : base.alpha)
            if (a >= cfg.tail_from && a < 1.0) env.grid.push_back(a);
    }
    std::sort(env.grid.begin(), env.grid.end());
    env.grid.erase(std::unique(env.grid.begin(), env.grid.end()), env.grid.end());

    const std::size_t g = env.grid.size();
    std::vector<std::vector<double>> values(g, std::vector<double>(cfg.replicates));
    Vector w_alt(scores_alt.size()), w_null(scores_null.size());
    for (int b = 0; b < cfg.replicates; ++b) {
        auto stream = rng::make_stream(seed, {0x626f6f74ULL, static_cast<std::uint64_t>(b)});
        std::exponential_distribution<double> expo(1.0);
        for (Index i = 0; i < w_alt.size(); ++i) w_alt[i] = expo(stream);
        for (Index i = 0; i < w_null.size(); ++i) w_null[i] = expo(stream);
        RocCurve rc = weighted_roc(scores_alt, w_alt, scores_null, w_null);
        for (std::size_t i = 0; i < g; ++i) values[i][b] = rc.eval(env.grid[i]);
    }

    if (cfg.keep_replicates) {
        env.replicate_curves.assign(static_cast<std::size_t>(cfg.replicates),
                                    std::vector<double>(g));
        for (int b = 0; b < cfg.replicates; ++b)
            for (std::size_t i = 0; i < g; ++i)
                env.replicate_curves[static_cast<std::size_t>(b)][i] = values[i][b];
    }

    env.mean_curve.resize(g);
    env.lower.resize(g);
    env.upper.resize(g);
    const double q_lo = (1.0 - cfg.level) / 2.0;
    const double q_hi = (1.0 + cfg.level) / 2.0;
    for (std::size_t i = 0; i < g; ++i) {
        auto& v = values[i];
        env.mean_curve[i] = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
        std::sort(v.begin(), v.end());
        env.lower[i] = std::min(quantile_sorted(v, q_lo), env.mean_curve[i]);
        env.upper[i] = std::max(quantile_sorted(v, q_hi), env.mean_curve[i]);
    }
    return env;
}

}  // namespace mixprop::roc
