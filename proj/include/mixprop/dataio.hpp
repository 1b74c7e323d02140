#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mixprop/common.hpp"

namespace mixprop::dataio {

/// Labeled dataset: rows are instances, labels are class ids in 1..class_count.
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    int class_count = 0;

    Index rows() const { return features.rows(); }
    Index cols() const { return features.cols(); }
    /// Number of instances carrying label c (c in 1..class_count).
    Index count_of(int c) const;
};

/// One class-proportion-estimation problem instance: per-class training
/// samples plus an unlabeled test sample with known (hidden) composition.
struct CpeTrial {
    std::vector<Matrix> train_per_class;  // class_count entries, or class_count-1 if last unobserved
    Matrix test_features;
    Vector true_proportions;  // length class_count, on the simplex
    std::vector<int> observed_classes;
    int class_count = 0;
    std::uint64_t seed = 0;

    bool last_class_unobserved() const {
        return static_cast<int>(train_per_class.size()) == class_count - 1;
    }
};

/// Per-column affine transform x -> (x - mean) / scale.
struct ColumnTransform {
    Vector mean;
    Vector scale;

    Matrix apply(const Matrix& x) const;
};

/// Loads a headered CSV with one integer `label` column (values >= 1) and
/// numeric feature columns.  Row order is preserved.
Dataset load_csv(const std::string& path);

/// Loads the sparse `<label> <index>:<value> ...` classification format with
/// 1-based indices.  Absent indices are zero; dimension is the max index seen.
Dataset load_sparse(const std::string& path);

/// Centers and scales every column to mean 0 / unit (population) standard
/// deviation.  Constant columns map to 0 and record scale 1.
std::pair<Dataset, ColumnTransform> standardize(const Dataset& d);

/// Apportions `total` into integer counts proportional to `props` using
/// largest-remainder rounding; remainder ties go to the lower index.
std::vector<Index> largest_remainder_counts(const Vector& props, Index total);

/// Draws a trial from `d`: per-class training sets of the requested sizes and
/// a test set realizing round(test_size * pi_i) counts exactly, all sampled
/// without replacement and fully determined by `seed`.  With
/// `unobserved_last`, the last class' training set is omitted.
CpeTrial make_cpe_trial(const Dataset& d, const Vector& target_props,
                        const std::vector<Index>& train_sizes, Index test_size,
                        bool unobserved_last, std::uint64_t seed);

/// Standardizes a trial using pooled training data only; the same transform
/// is applied to the test features.
CpeTrial standardize_trial(const CpeTrial& t);

}  // namespace mixprop::dataio
