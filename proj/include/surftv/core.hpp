#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace surftv {

using Vec3 = Eigen::Vector3d;

/// Row-major dense field: one row per mesh entity (triangle or edge), one
/// column per label.
using LabelMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A logarithm or transport was requested between (numerically) antipodal
/// points on the sphere.
class AntipodalError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver hit its iteration or backtracking budget.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed mesh or mesh file.
class MeshError : public Error {
 public:
  using Error::Error;
};

/// Armijo backtracking constants shared by every line search.
struct ArmijoParams {
  double sufficientDecrease = 1e-4;
  double backtrackFactor = 0.5;
  double initialStep = 1.0;
  int maxHalvings = 60;
};

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace surftv
