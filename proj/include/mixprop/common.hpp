#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mixprop {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Thrown on contract violations (bad arguments, malformed files, degenerate
// inputs the caller must handle).
class MixpropError : public std::runtime_error {
  public:
    explicit MixpropError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mixprop
