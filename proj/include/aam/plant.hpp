#pragma once

// Euler-Lagrange model of a quadrotor carrying a planar N-link arm.
//
//   M(chi) chi_dd + C(chi, chi_d) chi_d + g(chi) + d(t) = tau + tau_ext
//
// The arm is mounted below the base and moves in the body x-z plane; joint
// axes are parallel to the body y axis. Link i points along
// u(beta_i) = (sin beta_i, 0, -cos beta_i) with beta_i = alpha_1 + ... +
// alpha_i, so alpha = 0 is an arm hanging straight down. Euler rates are used
// directly as generalized velocities; the rate-to-body-rate map is folded into
// M. C is built from the Christoffel symbols of M, so Mdot - 2C is skew.

#include "aam/integrators.hpp"
#include "aam/rotation.hpp"
#include "aam/types.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

namespace aam {

struct LinkParams {
  double mass = 0.0;        // kg
  double length = 0.0;      // m, joint to next joint
  double com_offset = 0.0;  // m, joint to link centre of mass
  double inertia = 0.0;     // kg m^2, isotropic about the centre of mass
  double armature = 0.0;    // kg m^2, gear-reflected rotor inertia on the joint axis
};

/// Bounded disturbance d(t) = constant + amplitude * sin(2 pi f t).
template <int N>
struct Disturbance {
  VecD<N> constant = VecD<N>::Zero();
  VecD<N> amplitude = VecD<N>::Zero();
  double frequency_hz = 0.0;

  VecD<N> operator()(double t) const {
    if (amplitude.isZero(0.0)) return constant;
    return constant + amplitude * std::sin(2.0 * kPi * frequency_hz * t);
  }
  double bound() const { return constant.norm() + amplitude.norm(); }
};

/// Ground-truth plant parameters. Controllers never read these directly.
template <int N>
struct PlantParameters {
  double base_mass = 2.6;
  Vec3 base_inertia{0.03, 0.03, 0.05};
  std::array<LinkParams, N> links{};
  Vec3 mount_offset{0.0, 0.0, -0.08};
  double gravity = 9.81;
  double payload_mass = 0.0;
  Disturbance<N> disturbance{};

  PlantParameters() {
    for (int i = 0; i < N; ++i) {
      // Stand-in values; the real arm parameters are not published.
      links[i] = i == 0 ? LinkParams{0.18, 0.2, 0.1, 8e-4, 0.02} : LinkParams{0.12, 0.2, 0.1, 5e-4, 0.02};
    }
  }

  double total_mass() const {
    double m = base_mass + payload_mass;
    for (const auto& l : links) m += l.mass;
    return m;
  }

  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
    };
    positive(base_mass, "base mass");
    for (int k = 0; k < 3; ++k) positive(base_inertia(k), "base inertia");
    for (const auto& l : links) {
      positive(l.mass, "link mass");
      positive(l.length, "link length");
      positive(l.com_offset, "link com offset");
      positive(l.inertia, "link inertia");
      if (!(l.armature >= 0.0)) throw ConfigError("joint armature must be non-negative");
    }
    if (!(payload_mass >= 0.0)) throw ConfigError("payload mass must be non-negative");
    if (!(gravity >= 0.0)) throw ConfigError("gravity must be non-negative");
    if (!mount_offset.allFinite()) throw ConfigError("mount offset must be finite");
  }
};

/// chi, chi_dot and (optionally filled) chi_ddot.
template <int N>
struct GeneralizedState {
  VecD<N> pos = VecD<N>::Zero();
  VecD<N> vel = VecD<N>::Zero();
  VecD<N> acc = VecD<N>::Zero();

  Vec3 p() const { return pos.template head<3>(); }
  Vec3 q() const { return pos.template segment<3>(3); }
  VecN<N> alpha() const { return pos.template tail<N>(); }

  void validate() const {
    if (!pos.allFinite() || !vel.allFinite() || !acc.allFinite()) {
      throw InputError("generalized state has non-finite entries");
    }
    check_pitch(pos(4));
  }
};

/// tau = [0_3; 0_3; J_alpha^T F] for an end-effector force F (world frame).
template <int N>
VecD<N> joint_space_force(const Mat3N<N>& j_alpha, const Vec3& force) {
  VecD<N> out = VecD<N>::Zero();
  out.template tail<N>() = j_alpha.transpose() * force;
  return out;
}

namespace detail {

template <typename S>
using Vec3T = Eigen::Matrix<S, 3, 1>;

// Body-frame arm geometry and its derivatives with respect to alpha.
template <typename S, int N>
struct ArmGeometry {
  std::array<Vec3T<S>, N> com;
  std::array<Eigen::Matrix<S, 3, N>, N> dcom;
  Vec3T<S> ee;
  Eigen::Matrix<S, 3, N> dee;
};

template <typename S, int N>
ArmGeometry<S, N> arm_geometry(const Eigen::Matrix<S, N, 1>& alpha, const PlantParameters<N>& params) {
  using std::cos;
  using std::sin;
  std::array<Vec3T<S>, N> dir, ddir;
  S beta = S(0);
  for (int i = 0; i < N; ++i) {
    beta = beta + alpha(i);
    dir[i] << sin(beta), S(0), -cos(beta);
    ddir[i] << cos(beta), S(0), sin(beta);
  }
  ArmGeometry<S, N> g;
  Vec3T<S> joint = params.mount_offset.template cast<S>();
  for (int i = 0; i < N; ++i) {
    const auto& link = params.links[i];
    g.com[i] = joint + dir[i] * link.com_offset;
    g.dcom[i].setZero();
    for (int k = 0; k <= i; ++k) {
      Vec3T<S> col = ddir[i] * link.com_offset;
      for (int j = k; j < i; ++j) col += ddir[j] * params.links[j].length;
      g.dcom[i].col(k) = col;
    }
    joint = joint + dir[i] * link.length;
  }
  g.ee = joint;
  for (int k = 0; k < N; ++k) {
    Vec3T<S> col = Vec3T<S>::Zero();
    for (int j = k; j < N; ++j) col += ddir[j] * params.links[j].length;
    g.dee.col(k) = col;
  }
  return g;
}

// Linear-velocity Jacobian of a point fixed at body position r(alpha).
template <typename S, int N>
Eigen::Matrix<S, 3, kDof<N>> point_jacobian(const Mat3T<S>& rot, const std::array<Mat3T<S>, 3>& drot,
                                             const Vec3T<S>& r, const Eigen::Matrix<S, 3, N>& dr) {
  Eigen::Matrix<S, 3, kDof<N>> jac;
  jac.template leftCols<3>().setIdentity();
  for (int k = 0; k < 3; ++k) jac.col(3 + k) = drot[k] * r;
  jac.template rightCols<N>() = rot * dr;
  return jac;
}

}  // namespace detail

/// Mass matrix for any scalar type (double or an autodiff scalar).
template <typename S, int N>
Eigen::Matrix<S, kDof<N>, kDof<N>> mass_matrix_t(const Eigen::Matrix<S, 3, 1>& q,
                                                  const Eigen::Matrix<S, N, 1>& alpha,
                                                  const PlantParameters<N>& params) {
  using MatS = Eigen::Matrix<S, kDof<N>, kDof<N>>;
  const auto rot = rotation_matrix_t<S>(q);
  const auto drot = rotation_partials<S>(q);
  const auto w = euler_rate_map<S>(q);
  const auto arm = detail::arm_geometry<S, N>(alpha, params);

  MatS m = MatS::Zero();
  m.template topLeftCorner<3, 3>().diagonal().setConstant(S(params.base_mass));
  m.template block<3, 3>(3, 3) = w.transpose() * params.base_inertia.template cast<S>().asDiagonal() * w;

  auto add_point = [&](double mass, const detail::Vec3T<S>& r, const Eigen::Matrix<S, 3, N>& dr) {
    const auto jac = detail::point_jacobian<S, N>(rot, drot, r, dr);
    m.noalias() += (jac.transpose() * jac) * S(mass);
  };

  for (int i = 0; i < N; ++i) {
    const auto& link = params.links[i];
    add_point(link.mass, arm.com[i], arm.dcom[i]);
    // Link angular velocity in the body frame: W qdot - (alpha_1 + .. + alpha_i) e_y.
    Eigen::Matrix<S, 3, kDof<N>> jw = Eigen::Matrix<S, 3, kDof<N>>::Zero();
    jw.template block<3, 3>(0, 3) = w;
    for (int k = 0; k <= i; ++k) jw(1, 6 + k) = S(-1);
    m.noalias() += (jw.transpose() * jw) * S(link.inertia);
    m(6 + i, 6 + i) += S(link.armature);
  }
  if (params.payload_mass > 0.0) add_point(params.payload_mass, arm.ee, arm.dee);
  return m;
}

template <int N>
MatD<N> mass_matrix(const GeneralizedState<N>& state, const PlantParameters<N>& params) {
  return mass_matrix_t<double, N>(state.q(), state.alpha(), params);
}

/// Partial derivatives dM/dchi_k for k = 3 .. 5+N (M does not depend on p).
template <int N>
std::array<MatD<N>, 3 + N> mass_matrix_partials(const GeneralizedState<N>& state,
                                                 const PlantParameters<N>& params) {
  constexpr int K = 3 + N;
  using Deriv = Eigen::Matrix<double, K, 1>;
  using AD = Eigen::AutoDiffScalar<Deriv>;
  Eigen::Matrix<AD, 3, 1> q;
  Eigen::Matrix<AD, N, 1> alpha;
  for (int k = 0; k < 3; ++k) q(k) = AD(state.pos(3 + k), K, k);
  for (int k = 0; k < N; ++k) alpha(k) = AD(state.pos(6 + k), K, 3 + k);
  const auto m = mass_matrix_t<AD, N>(q, alpha, params);
  std::array<MatD<N>, K> out;
  for (int k = 0; k < K; ++k) {
    for (int r = 0; r < kDof<N>; ++r) {
      for (int c = r; c < kDof<N>; ++c) {
        out[k](r, c) = out[k](c, r) = m(r, c).derivatives()(k);
      }
    }
  }
  return out;
}

/// Christoffel-symbol Coriolis matrix evaluated at state.pos, state.vel.
template <int N>
MatD<N> coriolis_matrix(const GeneralizedState<N>& state, const PlantParameters<N>& params) {
  const auto dm = mass_matrix_partials(state, params);
  MatD<N> mdot = MatD<N>::Zero();
  // a.col(j) = (dM/dchi_j) chi_dot
  MatD<N> a = MatD<N>::Zero();
  for (int k = 0; k < 3 + N; ++k) {
    mdot += dm[k] * state.vel(3 + k);
    a.col(3 + k) = dm[k] * state.vel;
  }
  return 0.5 * (mdot + a - a.transpose());
}

/// Body-frame positions of every point mass together with its mass.
template <int N>
std::array<std::pair<double, Vec3>, N + 2> mass_points(const GeneralizedState<N>& state,
                                                       const PlantParameters<N>& params) {
  const auto arm = detail::arm_geometry<double, N>(state.alpha(), params);
  std::array<std::pair<double, Vec3>, N + 2> pts;
  pts[0] = {params.base_mass, Vec3::Zero()};
  for (int i = 0; i < N; ++i) pts[1 + i] = {params.links[i].mass, arm.com[i]};
  pts[N + 1] = {params.payload_mass, arm.ee};
  return pts;
}

/// Gradient of the potential energy; enters on the left-hand side of the model.
template <int N>
VecD<N> gravity_vector(const GeneralizedState<N>& state, const PlantParameters<N>& params) {
  VecD<N> g = VecD<N>::Zero();
  if (params.gravity == 0.0) return g;
  const Vec3 q = state.q();
  const auto rot = rotation_matrix_t<double>(q);
  const auto drot = rotation_partials<double>(q);
  const auto arm = detail::arm_geometry<double, N>(state.alpha(), params);
  auto add_point = [&](double mass, const Vec3& r, const Mat3N<N>& dr) {
    if (mass == 0.0) return;
    const auto jac = detail::point_jacobian<double, N>(rot, drot, r, dr);
    g += (params.gravity * mass) * jac.row(2).transpose();
  };
  add_point(params.base_mass, Vec3::Zero(), Mat3N<N>::Zero());
  for (int i = 0; i < N; ++i) add_point(params.links[i].mass, arm.com[i], arm.dcom[i]);
  add_point(params.payload_mass, arm.ee, arm.dee);
  return g;
}

template <int N>
double potential_energy(const GeneralizedState<N>& state, const PlantParameters<N>& params) {
  const Mat3 rot = rotation_matrix_t<double>(state.q());
  double u = 0.0;
  for (const auto& [mass, r] : mass_points(state, params)) {
    u += mass * params.gravity * (state.p() + rot * r)(2);
  }
  return u;
}

template <int N>
double kinetic_energy(const GeneralizedState<N>& state, const PlantParameters<N>& params) {
  return 0.5 * state.vel.dot(mass_matrix(state, params) * state.vel);
}

/// End-effector position in the world frame.
template <int N>
Vec3 end_effector_position(const GeneralizedState<N>& state, const PlantParameters<N>& params) {
  const auto arm = detail::arm_geometry<double, N>(state.alpha(), params);
  return state.p() + rotation_matrix_t<double>(state.q()) * arm.ee;
}

/// J_alpha: joint rates to end-effector linear velocity, resolved in the world frame.
/// Kinematic only, so controllers may use it.
template <int N>
Mat3N<N> manipulator_jacobian(const GeneralizedState<N>& state, const PlantParameters<N>& params) {
  const auto arm = detail::arm_geometry<double, N>(state.alpha(), params);
  return rotation_matrix_t<double>(state.q()) * arm.dee;
}

/// chi_ddot = M^-1 (tau + J^T F_ext - C chi_dot - g - d(t)).
template <int N>
VecD<N> forward_dynamics(const GeneralizedState<N>& state, const VecD<N>& tau, const Vec3& f_ext, double t,
                         const PlantParameters<N>& params) {
  const MatD<N> m = mass_matrix(state, params);
  const VecD<N> rhs = tau + joint_space_force<N>(manipulator_jacobian(state, params), f_ext) -
                      coriolis_matrix(state, params) * state.vel - gravity_vector(state, params) -
                      params.disturbance(t);
  const Eigen::LLT<MatD<N>> llt(m);
  if (llt.info() != Eigen::Success) throw Error("mass matrix is not positive definite");
  return llt.solve(rhs);
}

/// One RK4 step of the plant under constant torque and end-effector force.
template <int N>
GeneralizedState<N> plant_step(const GeneralizedState<N>& state, const VecD<N>& tau, const Vec3& f_ext, double t,
                               double h, const PlantParameters<N>& params) {
  constexpr int D = kDof<N>;
  using X = Eigen::Matrix<double, 2 * D, 1>;
  auto rhs = [&](double tt, const X& y) -> X {
    GeneralizedState<N> s;
    s.pos = y.template head<D>();
    s.vel = y.template tail<D>();
    X dy;
    dy << s.vel, forward_dynamics(s, tau, f_ext, tt, params);
    return dy;
  };
  X x;
  x << state.pos, state.vel;
  x = rk4_step(rhs, t, x, h);
  GeneralizedState<N> out;
  out.pos = x.template head<D>();
  out.vel = x.template tail<D>();
  return out;
}

/// Random configuration inside the envelope the scenarios visit.
template <int N, typename Rng>
GeneralizedState<N> sample_state(Rng& rng, double max_tilt = 0.6, double max_rate = 2.0) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  GeneralizedState<N> s;
  for (int k = 0; k < 3; ++k) s.pos(k) = 2.0 * unit(rng);
  s.pos(3) = max_tilt * unit(rng);
  s.pos(4) = max_tilt * unit(rng);
  s.pos(5) = kPi * unit(rng);
  for (int k = 0; k < N; ++k) s.pos(6 + k) = kPi * unit(rng);
  for (int k = 0; k < kDof<N>; ++k) s.vel(k) = max_rate * unit(rng);
  return s;
}

/// Extreme eigenvalues of M over a random sample of configurations.
template <int N>
std::pair<double, double> mass_eigen_bounds(const PlantParameters<N>& params, int samples, unsigned seed = 7) {
  std::mt19937_64 rng(seed);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (int i = 0; i < samples; ++i) {
    const auto s = sample_state<N>(rng);
    const Eigen::SelfAdjointEigenSolver<MatD<N>> es(mass_matrix(s, params), Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues()(0));
    hi = std::max(hi, es.eigenvalues()(kDof<N> - 1));
  }
  return {lo, hi};
}

}  // namespace aam
