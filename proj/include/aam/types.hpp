#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace aam {

// Generalized coordinates are chi = [p; q; alpha] with p in R^3, q = (roll,
// pitch, yaw) and alpha the N joint angles of the planar arm.
template <int N>
inline constexpr int kDof = 6 + N;

template <int N>
using VecD = Eigen::Matrix<double, kDof<N>, 1>;
template <int N>
using MatD = Eigen::Matrix<double, kDof<N>, kDof<N>>;
template <int N>
using VecN = Eigen::Matrix<double, N, 1>;
template <int N>
using Mat3N = Eigen::Matrix<double, 3, N>;

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDeg = kPi / 180.0;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pitch too close to +-pi/2 for the Z-Y-X parameterization.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Impedance gains with no admissible Phi, or otherwise invalid.
class GainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite measurement, empty window, trace too short and similar.
class InputError : public Error {
 public:
  using Error::Error;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace aam
