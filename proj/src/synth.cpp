#include "mixprop/synth.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>
#include <random>

#include "mixprop/rng.hpp"

namespace mixprop::synth {

namespace {

const boost::math::normal_distribution<double> kStdNormal;

void check_class(const ClassDensity& c, Index dim) {
    if (c.uses_atoms()) {
        if (c.atom_locations.rows() != c.atom_masses.size())
            throw MixpropError("atom locations and masses disagree in count");
        if (c.atom_locations.cols() != dim) throw MixpropError("atom dimension mismatch");
        double total = 0.0;
        for (Index i = 0; i < c.atom_masses.size(); ++i) {
            if (c.atom_masses[i] < 0.0) throw MixpropError("negative atom mass");
            total += c.atom_masses[i];
        }
        if (std::abs(total - 1.0) > 1e-9) throw MixpropError("atom masses must sum to 1");
        if (c.atom_jitter < 0.0) throw MixpropError("negative jitter");
        return;
    }
    if (c.components.empty()) throw MixpropError("class density has no components");
    for (const auto& g : c.components) {
        if (g.mean.size() != dim || g.stddev.size() != dim)
            throw MixpropError("component dimension mismatch");
        if (g.weight <= 0.0) throw MixpropError("component weight must be positive");
        if (g.truncate_radius < 0.0) throw MixpropError("negative truncation radius");
        for (Index k = 0; k < dim; ++k)
            if (g.stddev[k] <= 0.0) throw MixpropError("component stddev must be positive");
    }
}

double total_weight(const ClassDensity& c) {
    double w = 0.0;
    for (const auto& g : c.components) w += g.weight;
    return w;
}

/// Mass of the standardized ball of the given radius in `dim` dimensions.
double ball_mass(double radius, Index dim) {
    boost::math::chi_squared_distribution<double> chi2(static_cast<double>(dim));
    return boost::math::cdf(chi2, radius * radius);
}

double normal_pdf(double x, double mean, double sd) {
    double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
}

/// Phi((b-mean)/sd) - Phi((a-mean)/sd) with infinite-side flags.
double normal_interval(double mean, double sd, double a, double b, bool a_inf, bool b_inf) {
    double upper = b_inf ? 1.0 : boost::math::cdf(kStdNormal, (b - mean) / sd);
    double lower = a_inf ? 0.0 : boost::math::cdf(kStdNormal, (a - mean) / sd);
    return std::max(0.0, upper - lower);
}

}  // namespace

void validate_spec(const SyntheticSpec& spec) {
    if (spec.classes.empty()) throw MixpropError("spec has no classes");
    if (spec.proportions.size() != static_cast<Index>(spec.classes.size()))
        throw MixpropError("proportions length must match class count");
    double total = 0.0;
    for (Index i = 0; i < spec.proportions.size(); ++i) {
        if (spec.proportions[i] < 0.0) throw MixpropError("negative proportion");
        total += spec.proportions[i];
    }
    if (std::abs(total - 1.0) > 1e-9) throw MixpropError("proportions must sum to 1");
    for (const auto& c : spec.classes) check_class(c, spec.dim);
}

Matrix sample_class(const ClassDensity& c, Index dim, Index n, std::uint64_t seed) {
    check_class(c, dim);
    auto stream = rng::make_stream(seed, {0x73616d70ULL});
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix out(n, dim);

    if (c.uses_atoms()) {
        std::vector<double> masses(c.atom_masses.data(), c.atom_masses.data() + c.atom_masses.size());
        std::discrete_distribution<int> pick(masses.begin(), masses.end());
        for (Index i = 0; i < n; ++i) {
            int a = pick(stream);
            out.row(i) = c.atom_locations.row(a);
            if (c.atom_jitter > 0.0)
                for (Index k = 0; k < dim; ++k) out(i, k) += c.atom_jitter * gauss(stream);
        }
        return out;
    }

    std::vector<double> weights;
    for (const auto& g : c.components) weights.push_back(g.weight);
    std::discrete_distribution<int> pick(weights.begin(), weights.end());
    for (Index i = 0; i < n; ++i) {
        const auto& g = c.components[static_cast<std::size_t>(pick(stream))];
        while (true) {
            double r2 = 0.0;
            for (Index k = 0; k < dim; ++k) {
                double z = gauss(stream);
                out(i, k) = g.mean[k] + g.stddev[k] * z;
                r2 += z * z;
            }
            if (g.truncate_radius <= 0.0 || r2 <= g.truncate_radius * g.truncate_radius) break;
        }
    }
    return out;
}

double class_density(const ClassDensity& c, Index dim, const Vector& x) {
    check_class(c, dim);
    if (x.size() != dim) throw MixpropError("point dimension mismatch");

    if (c.uses_atoms()) {
        if (c.atom_jitter > 0.0) {
            double dens = 0.0;
            for (Index a = 0; a < c.atom_masses.size(); ++a) {
                double term = c.atom_masses[a];
                for (Index k = 0; k < dim; ++k)
                    term *= normal_pdf(x[k], c.atom_locations(a, k), c.atom_jitter);
                dens += term;
            }
            return dens;
        }
        for (Index a = 0; a < c.atom_masses.size(); ++a)
            if ((c.atom_locations.row(a).transpose() - x).cwiseAbs().maxCoeff() <= 1e-12)
                return c.atom_masses[a];
        return 0.0;
    }

    double dens = 0.0;
    for (const auto& g : c.components) {
        double term = g.weight;
        double r2 = 0.0;
        for (Index k = 0; k < dim; ++k) {
            double z = (x[k] - g.mean[k]) / g.stddev[k];
            r2 += z * z;
            term *= normal_pdf(x[k], g.mean[k], g.stddev[k]);
        }
        if (g.truncate_radius > 0.0) {
            if (r2 > g.truncate_radius * g.truncate_radius)
                term = 0.0;
            else
                term /= ball_mass(g.truncate_radius, dim);
        }
        dens += term;
    }
    return dens / total_weight(c);
}

double interval_probability(const ClassDensity& c, Index dim, const Vector& lo, const Vector& hi,
                            const std::vector<bool>& lo_inf, const std::vector<bool>& hi_inf) {
    check_class(c, dim);
    if (lo.size() != dim || hi.size() != dim || lo_inf.size() != static_cast<std::size_t>(dim) ||
        hi_inf.size() != static_cast<std::size_t>(dim))
        throw MixpropError("interval dimension mismatch");

    if (c.uses_atoms()) {
        if (c.atom_jitter > 0.0) {
            double prob = 0.0;
            for (Index a = 0; a < c.atom_masses.size(); ++a) {
                double term = c.atom_masses[a];
                for (Index k = 0; k < dim; ++k)
                    term *= normal_interval(c.atom_locations(a, k), c.atom_jitter, lo[k], hi[k],
                                            lo_inf[static_cast<std::size_t>(k)],
                                            hi_inf[static_cast<std::size_t>(k)]);
                prob += term;
            }
            return prob;
        }
        // Point masses land in a half-open box [lo, hi), matching the
        // histogram's floor-based cell assignment.
        double prob = 0.0;
        for (Index a = 0; a < c.atom_masses.size(); ++a) {
            bool inside = true;
            for (Index k = 0; k < dim && inside; ++k) {
                double v = c.atom_locations(a, k);
                if (!lo_inf[static_cast<std::size_t>(k)] && v < lo[k]) inside = false;
                if (!hi_inf[static_cast<std::size_t>(k)] && v >= hi[k]) inside = false;
            }
            if (inside) prob += c.atom_masses[a];
        }
        return prob;
    }

    double prob = 0.0;
    for (const auto& g : c.components) {
        double term = g.weight;
        if (g.truncate_radius > 0.0) {
            if (dim != 1)
                throw MixpropError("truncated components support exact intervals in 1-D only");
            double r = g.truncate_radius;
            double left = g.mean[0] - r * g.stddev[0];
            double right = g.mean[0] + r * g.stddev[0];
            double a = lo_inf[0] ? left : std::max(lo[0], left);
            double b = hi_inf[0] ? right : std::min(hi[0], right);
            term *= b <= a ? 0.0
                           : normal_interval(g.mean[0], g.stddev[0], a, b, false, false) /
                                 ball_mass(r, 1);
        } else {
            for (Index k = 0; k < dim; ++k)
                term *= normal_interval(g.mean[k], g.stddev[k], lo[k], hi[k],
                                        lo_inf[static_cast<std::size_t>(k)],
                                        hi_inf[static_cast<std::size_t>(k)]);
        }
        prob += term;
    }
    return prob / total_weight(c);
}

dataio::CpeTrial make_synthetic_trial(const SyntheticSpec& spec,
                                      const std::vector<Index>& train_sizes, Index test_size,
                                      bool unobserved_last, std::uint64_t seed) {
    validate_spec(spec);
    const int M = static_cast<int>(spec.classes.size());
    const int observed = unobserved_last ? M - 1 : M;
    if (static_cast<int>(train_sizes.size()) < observed)
        throw MixpropError("need a training size for every observed class");
    if (test_size <= 0) throw MixpropError("test size must be positive");

    dataio::CpeTrial trial;
    trial.class_count = M;
    trial.true_proportions = spec.proportions;
    trial.seed = seed;
    for (int c = 0; c < observed; ++c) {
        trial.train_per_class.push_back(
            sample_class(spec.classes[static_cast<std::size_t>(c)], spec.dim,
                         train_sizes[static_cast<std::size_t>(c)],
                         rng::derive_seed(seed, {0x7472636cULL, static_cast<std::uint64_t>(c)})));
        trial.observed_classes.push_back(c + 1);
    }

    std::vector<Index> counts = dataio::largest_remainder_counts(spec.proportions, test_size);
    Matrix test(test_size, spec.dim);
    Index at = 0;
    for (int c = 0; c < M; ++c) {
        Matrix block =
            sample_class(spec.classes[static_cast<std::size_t>(c)], spec.dim,
                         counts[static_cast<std::size_t>(c)],
                         rng::derive_seed(seed, {0x7465636cULL, static_cast<std::uint64_t>(c)}));
        test.middleRows(at, block.rows()) = block;
        at += block.rows();
    }
    std::vector<Index> order(static_cast<std::size_t>(test_size));
    std::iota(order.begin(), order.end(), Index{0});
    auto stream = rng::make_stream(seed, {0x74657368ULL});
    std::shuffle(order.begin(), order.end(), stream);
    trial.test_features.resize(test_size, spec.dim);
    for (Index i = 0; i < test_size; ++i)
        trial.test_features.row(i) = test.row(order[static_cast<std::size_t>(i)]);
    return trial;
}

}  // namespace mixprop::synth
