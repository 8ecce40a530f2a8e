#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace optresp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecMap = Eigen::Map<Vec>;
using ConstVecMap = Eigen::Map<const Vec>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

// Error hierarchy. The CLI maps ConfigError to exit code 2 and NumericalError
// (and subclasses) to exit code 3.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergedOrbitError : public NumericalError {
 public:
  DivergedOrbitError(std::size_t step, const std::string& what)
      : NumericalError("orbit diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class DegenerateFrameError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Stable and unstable bundles have (numerically) collapsed onto each other.
class TangencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SolverFailureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class CapabilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Every coefficient of the response table is zero, so no optimal direction exists.
class NullResponseError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace optresp
