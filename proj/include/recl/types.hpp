#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace recl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;
using Index = Eigen::Index;

/// Violation of an input contract (malformed file, inconsistent data,
/// missing required model). Maps to CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure (non-convergence, rank deficiency discovered while
/// solving). Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace recl
