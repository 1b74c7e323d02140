#pragma once

#include <cstdint>
#include <vector>

#include "mixprop/common.hpp"
#include "mixprop/dataio.hpp"

namespace mixprop::synth {

/// Diagonal Gaussian, optionally conditioned on the standardized ball
/// sum_k ((x_k - mean_k)/stddev_k)^2 <= radius^2 so that its support is
/// bounded (needed to build distributions where each class "sticks out").
struct GaussianComponent {
    Vector mean;
    Vector stddev;
    double weight = 1.0;
    double truncate_radius = 0.0;  // 0 disables truncation
};

/// Class-conditional distribution: either a mixture of diagonal Gaussians or
/// a weighted atom set.  Atoms with jitter > 0 become a Gaussian mixture with
/// per-dimension bandwidth `atom_jitter` (a smooth embedding of a discrete
/// distribution); with jitter 0 they stay point masses.
struct ClassDensity {
    std::vector<GaussianComponent> components;
    Matrix atom_locations;  // rows are atoms
    Vector atom_masses;
    double atom_jitter = 0.0;

    bool uses_atoms() const { return atom_masses.size() > 0; }
    bool discrete() const { return uses_atoms() && atom_jitter == 0.0; }
};

/// Full test-distribution specification: class conditionals plus mixing
/// proportions.  Ground truth for oracles is computed from this.
struct SyntheticSpec {
    std::vector<ClassDensity> classes;
    Vector proportions;  // length = classes.size(), on the simplex
    Index dim = 1;
};

void validate_spec(const SyntheticSpec& spec);

/// n iid draws (rows); deterministic given seed.
Matrix sample_class(const ClassDensity& c, Index dim, Index n, std::uint64_t seed);

/// Density at x; for a discrete class this is the mass of the atom at x
/// (0 if x matches no atom).
double class_density(const ClassDensity& c, Index dim, const Vector& x);

/// Exact probability of the product interval [lo, hi) per dimension;
/// `lo_inf` / `hi_inf` extend a side to infinity.  Truncated components
/// support d = 1 only (interval intersect ball stays an interval there).
double interval_probability(const ClassDensity& c, Index dim, const Vector& lo, const Vector& hi,
                            const std::vector<bool>& lo_inf, const std::vector<bool>& hi_inf);

/// Draws a CpeTrial from a SyntheticSpec: per-class training sets plus a test
/// set realizing largest-remainder counts of spec.proportions exactly.
dataio::CpeTrial make_synthetic_trial(const SyntheticSpec& spec,
                                      const std::vector<Index>& train_sizes, Index test_size,
                                      bool unobserved_last, std::uint64_t seed);

}  // namespace mixprop::synth
