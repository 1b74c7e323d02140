#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <map>

#include "mixprop/synth.hpp"

using namespace mixprop;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

synth::ClassDensity gaussian(const Vector& mean, const Vector& sd, double radius = 0.0) {
    synth::GaussianComponent g;
    g.mean = mean;
    g.stddev = sd;
    g.truncate_radius = radius;
    return {{g}, Matrix(), Vector(), 0.0};
}

synth::ClassDensity atoms(const Matrix& locations, const Vector& masses, double jitter) {
    return {{}, locations, masses, jitter};
}

double phi_interval(double mean, double sd, double lo, double hi) {
    boost::math::normal_distribution<double> n(mean, sd);
    return boost::math::cdf(n, hi) - boost::math::cdf(n, lo);
}

}  // namespace

TEST_CASE("validate_spec rejects malformed specs") {
    synth::SyntheticSpec spec;
    spec.dim = 2;
    spec.proportions = vec({0.5, 0.5});
    spec.classes.push_back(gaussian(vec({0.0, 0.0}), vec({1.0, 1.0})));
    spec.classes.push_back(gaussian(vec({1.0, 1.0}), vec({1.0, 1.0})));
    CHECK_NOTHROW(synth::validate_spec(spec));

    SUBCASE("dimension mismatch") {
        spec.classes[0].components[0].mean = vec({0.0});
        CHECK_THROWS_AS(synth::validate_spec(spec), MixpropError);
    }
    SUBCASE("off-simplex proportions") {
        spec.proportions = vec({0.5, 0.6});
        CHECK_THROWS_AS(synth::validate_spec(spec), MixpropError);
    }
    SUBCASE("negative stddev") {
        spec.classes[1].components[0].stddev = vec({1.0, -1.0});
        CHECK_THROWS_AS(synth::validate_spec(spec), MixpropError);
    }
    SUBCASE("class with neither components nor atoms") {
        spec.classes[0] = synth::ClassDensity{};
        CHECK_THROWS_AS(synth::validate_spec(spec), MixpropError);
    }
}

TEST_CASE("sample_class is deterministic and respects truncation") {
    synth::ClassDensity c = gaussian(vec({1.0, -2.0}), vec({0.5, 2.0}), 2.5);
    Matrix a = synth::sample_class(c, 2, 500, 42);
    Matrix b = synth::sample_class(c, 2, 500, 42);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

    // every draw lies inside the standardized ball of radius 2.5
    for (Index i = 0; i < a.rows(); ++i) {
        double r2 = std::pow((a(i, 0) - 1.0) / 0.5, 2) + std::pow((a(i, 1) + 2.0) / 2.0, 2);
        CHECK(r2 <= 2.5 * 2.5 + 1e-12);
    }
}

TEST_CASE("discrete atom samples follow their masses") {
    Matrix locs(3, 1);
    locs << 1.0, 2.0, 3.0;
    synth::ClassDensity c = atoms(locs, vec({0.2, 0.3, 0.5}), 0.0);
    Matrix draws = synth::sample_class(c, 1, 20000, 7);
    std::map<double, int> counts;
    for (Index i = 0; i < draws.rows(); ++i) ++counts[draws(i, 0)];
    CHECK(counts[1.0] / 20000.0 == doctest::Approx(0.2).epsilon(0.1));
    CHECK(counts[2.0] / 20000.0 == doctest::Approx(0.3).epsilon(0.1));
    CHECK(counts[3.0] / 20000.0 == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("class_density closed forms") {
    SUBCASE("plain Gaussian") {
        synth::ClassDensity c = gaussian(vec({0.0}), vec({2.0}));
        double expected = std::exp(-0.5) / (2.0 * std::sqrt(2.0 * M_PI));
        CHECK(synth::class_density(c, 1, vec({2.0})) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("truncated Gaussian renormalizes inside, vanishes outside") {
        synth::ClassDensity plain = gaussian(vec({0.0}), vec({1.0}));
        synth::ClassDensity trunc = gaussian(vec({0.0}), vec({1.0}), 2.0);
        double inside_plain = synth::class_density(plain, 1, vec({0.5}));
        double inside_trunc = synth::class_density(trunc, 1, vec({0.5}));
        // (within 2 sigma) = 0.9545 of the mass
        CHECK(inside_trunc == doctest::Approx(inside_plain / 0.954499736104).epsilon(1e-9));
        CHECK(synth::class_density(trunc, 1, vec({2.5})) == 0.0);
    }
    SUBCASE("jittered atoms are a Gaussian mixture") {
        Matrix locs(2, 1);
        locs << 0.0, 3.0;
        synth::ClassDensity c = atoms(locs, vec({0.4, 0.6}), 0.5);
        boost::math::normal_distribution<double> n0(0.0, 0.5), n1(3.0, 0.5);
        double x = 1.1;
        double expected = 0.4 * boost::math::pdf(n0, x) + 0.6 * boost::math::pdf(n1, x);
        CHECK(synth::class_density(c, 1, vec({x})) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("discrete atoms report point mass on exact match only") {
        Matrix locs(2, 1);
        locs << 1.0, 2.0;
        synth::ClassDensity c = atoms(locs, vec({0.3, 0.7}), 0.0);
        CHECK(synth::class_density(c, 1, vec({2.0})) == 0.7);
        CHECK(synth::class_density(c, 1, vec({1.5})) == 0.0);
    }
}

TEST_CASE("interval_probability exact values") {
    std::vector<bool> finite{false}, inf{true};

    SUBCASE("untruncated Gaussian interval") {
        synth::ClassDensity c = gaussian(vec({1.0}), vec({2.0}));
        double p = synth::interval_probability(c, 1, vec({0.0}), vec({2.0}), finite, finite);
        CHECK(p == doctest::Approx(phi_interval(1.0, 2.0, 0.0, 2.0)).epsilon(1e-12));
        // infinite flags cover the whole line
        CHECK(synth::interval_probability(c, 1, vec({0.0}), vec({0.0}), inf, inf) ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("2-D product interval") {
        synth::GaussianComponent g;
        g.mean = vec({0.0, 1.0});
        g.stddev = vec({1.0, 0.5});
        synth::ClassDensity c{{g}, Matrix(), Vector(), 0.0};
        std::vector<bool> no{false, false};
        double p = synth::interval_probability(c, 2, vec({-1.0, 0.5}), vec({1.0, 1.5}), no, no);
        double expected =
            phi_interval(0.0, 1.0, -1.0, 1.0) * phi_interval(1.0, 0.5, 0.5, 1.5);
        CHECK(p == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("1-D truncated Gaussian") {
        synth::ClassDensity c = gaussian(vec({0.0}), vec({1.0}), 2.0);
        // support is [-2, 2]; mass of [0, 5) is half the ball mass, renormalized
        double p = synth::interval_probability(c, 1, vec({0.0}), vec({5.0}), finite, finite);
        CHECK(p == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(synth::interval_probability(c, 1, vec({2.0}), vec({9.0}), finite, finite) ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("multi-dimensional truncation is rejected") {
        synth::ClassDensity c = gaussian(vec({0.0, 0.0}), vec({1.0, 1.0}), 2.0);
        std::vector<bool> no{false, false};
        CHECK_THROWS_AS(
            synth::interval_probability(c, 2, vec({0.0, 0.0}), vec({1.0, 1.0}), no, no),
            MixpropError);
    }
    SUBCASE("discrete atoms use half-open cells") {
        Matrix locs(3, 1);
        locs << 1.0, 2.0, 3.0;
        synth::ClassDensity c = atoms(locs, vec({0.2, 0.3, 0.5}), 0.0);
        // [1, 2) catches the first atom only; [1, 3) the first two
        CHECK(synth::interval_probability(c, 1, vec({1.0}), vec({2.0}), finite, finite) == 0.2);
        CHECK(synth::interval_probability(c, 1, vec({1.0}), vec({3.0}), finite, finite) == 0.5);
        // an infinite upper side catches the boundary atom as well
        CHECK(synth::interval_probability(c, 1, vec({2.0}), vec({3.0}), finite, inf) == 0.8);
    }
    SUBCASE("jittered atoms are an exact Gaussian mixture") {
        Matrix locs(2, 1);
        locs << 0.0, 4.0;
        synth::ClassDensity c = atoms(locs, vec({0.25, 0.75}), 0.3);
        double p = synth::interval_probability(c, 1, vec({-1.0}), vec({1.0}), finite, finite);
        double expected = 0.25 * phi_interval(0.0, 0.3, -1.0, 1.0) +
                          0.75 * phi_interval(4.0, 0.3, -1.0, 1.0);
        CHECK(p == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("make_synthetic_trial realizes exact composition") {
    synth::SyntheticSpec spec;
    spec.dim = 1;
    spec.proportions = vec({0.3, 0.7});
    // widely separated classes so rows can be attributed by sign
    spec.classes.push_back(gaussian(vec({-20.0}), vec({1.0})));
    spec.classes.push_back(gaussian(vec({20.0}), vec({1.0})));

    auto trial = synth::make_synthetic_trial(spec, {50, 60}, 200, false, 9);
    CHECK(trial.train_per_class.size() == 2);
    CHECK(trial.train_per_class[0].rows() == 50);
    CHECK(trial.train_per_class[1].rows() == 60);
    CHECK(trial.class_count == 2);
    Index left = 0;
    for (Index i = 0; i < trial.test_features.rows(); ++i) left += trial.test_features(i, 0) < 0;
    CHECK(left == 60);  // 0.3 * 200
    CHECK(trial.test_features.rows() == 200);
    CHECK((trial.true_proportions - spec.proportions).cwiseAbs().maxCoeff() == 0.0);

    SUBCASE("determinism") {
        auto again = synth::make_synthetic_trial(spec, {50, 60}, 200, false, 9);
        CHECK((again.test_features - trial.test_features).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("unobserved last class") {
        auto hidden = synth::make_synthetic_trial(spec, {50, 60}, 200, true, 9);
        CHECK(hidden.train_per_class.size() == 1);
        CHECK(hidden.last_class_unobserved());
        CHECK(hidden.observed_classes == std::vector<int>{1});
    }
}
