#pragma once

#include "aam/types.hpp"

#include <array>
#include <cmath>

namespace aam {

inline constexpr double kPitchGuard = 1e-6;

namespace detail {

template <typename S>
using Mat3T = Eigen::Matrix<S, 3, 3>;

template <typename S>
Mat3T<S> rot_x(const S& a) {
  using std::cos;
  using std::sin;
  Mat3T<S> r;
  r << S(1), S(0), S(0), S(0), cos(a), -sin(a), S(0), sin(a), cos(a);
  return r;
}

template <typename S>
Mat3T<S> rot_y(const S& a) {
  using std::cos;
  using std::sin;
  Mat3T<S> r;
  r << cos(a), S(0), sin(a), S(0), S(1), S(0), -sin(a), S(0), cos(a);
  return r;
}

template <typename S>
Mat3T<S> rot_z(const S& a) {
  using std::cos;
  using std::sin;
  Mat3T<S> r;
  r << cos(a), -sin(a), S(0), sin(a), cos(a), S(0), S(0), S(0), S(1);
  return r;
}

// d/da of the elementary rotations.
template <typename S>
Mat3T<S> drot_x(const S& a) {
  using std::cos;
  using std::sin;
  Mat3T<S> r;
  r << S(0), S(0), S(0), S(0), -sin(a), -cos(a), S(0), cos(a), -sin(a);
  return r;
}

template <typename S>
Mat3T<S> drot_y(const S& a) {
  using std::cos;
  using std::sin;
  Mat3T<S> r;
  r << -sin(a), S(0), cos(a), S(0), S(0), S(0), -cos(a), S(0), -sin(a);
  return r;
}

template <typename S>
Mat3T<S> drot_z(const S& a) {
  using std::cos;
  using std::sin;
  Mat3T<S> r;
  r << -sin(a), -cos(a), S(0), cos(a), -sin(a), S(0), S(0), S(0), S(0);
  return r;
}

}  // namespace detail

inline void check_pitch(double pitch) {
  if (!(std::abs(pitch) < kPi / 2 - kPitchGuard)) {
    throw SingularityError("pitch " + std::to_string(pitch) +
                           " rad is at the Z-Y-X Euler singularity");
  }
}

/// R_B^W = Rz(yaw) * Ry(pitch) * Rx(roll).
template <typename S>
detail::Mat3T<S> rotation_matrix_t(const Eigen::Matrix<S, 3, 1>& q) {
  return detail::rot_z(q(2)) * detail::rot_y(q(1)) * detail::rot_x(q(0));
}

/// Checked double version; throws SingularityError near |pitch| = pi/2.
inline Mat3 rotation_matrix(const Vec3& q) {
  check_pitch(q(1));
  return rotation_matrix_t<double>(q);
}

/// Partial derivatives of R_B^W with respect to roll, pitch and yaw.
template <typename S>
std::array<detail::Mat3T<S>, 3> rotation_partials(const Eigen::Matrix<S, 3, 1>& q) {
  using namespace detail;
  const auto rx = rot_x(q(0));
  const auto ry = rot_y(q(1));
  const auto rz = rot_z(q(2));
  return {rz * ry * drot_x(q(0)), rz * drot_y(q(1)) * rx, drot_z(q(2)) * ry * rx};
}

/// Maps Euler rates to body-frame angular velocity: omega_B = W(q) * qdot.
template <typename S>
detail::Mat3T<S> euler_rate_map(const Eigen::Matrix<S, 3, 1>& q) {
  using std::cos;
  using std::sin;
  const S sr = sin(q(0)), cr = cos(q(0));
  const S sp = sin(q(1)), cp = cos(q(1));
  detail::Mat3T<S> w;
  w << S(1), S(0), -sp, S(0), cr, sr * cp, S(0), -sr, cr * cp;
  return w;
}

}  // namespace aam
