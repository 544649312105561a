#pragma once

// Adaptive impedance controller.
//
//   s      = e_d + Phi e - gamma
//   gamma' = Md^-1 (e_tau - (Kd - Md Phi) gamma)
//   rho    = H0 + H1 |xi| + H2 |xi|^2 + H3 |chi_dd| + zeta
//   dtau   = -rho s / |s|       (|s| >= varpi)
//          = -rho s / varpi     (|s| <  varpi)
//   tau    = -Lambda s - tau_d + dtau + Md (chi_dd_d - Phi e_d) - (Kd - Md Phi) gamma
//
//   Hi'    = |s| |xi|^i - nu_i Hi          (i = 0, 1, 2)
//   H3'    = |s| |chi_dd| - nu_3 H3
//   zeta'  = 0                                                  (|s| >= varpi)
//          = -(1 + (H3 |chi_dd| + sum_i Hi |xi|^i) |s|) zeta + eps (|s| <  varpi)
//
// With this gamma law and torque, Delta_I = Md s' + (Kd - Md Phi) s holds
// identically and the closed loop reads Md s' = -Lambda s + dtau - E, where E
// lumps every model term the controller does not know.

#include "aam/impedance.hpp"
#include "aam/integrators.hpp"
#include "aam/plant.hpp"
#include "aam/types.hpp"

#include <array>
#include <cmath>

namespace aam {

template <int N>
struct AdaptiveState {
  VecD<N> gamma = VecD<N>::Constant(1e-3);
  std::array<double, 4> h{0.01, 0.01, 0.01, 0.01};
  double zeta = 0.1;
  VecD<N> s = VecD<N>::Zero();
  double rho = 0.0;
  // Last sensed e_tau, used to extrapolate e_tau across the control period.
  VecD<N> e_tau = VecD<N>::Zero();
  bool has_e_tau = false;

  void check() const {
    for (double v : h) {
      if (!(v >= 0.0)) throw Error("adaptive estimate became negative");
    }
    if (!(zeta > 0.0)) throw Error("auxiliary gain zeta became non-positive");
  }
};

template <int N>
struct ReferenceSignal {
  VecD<N> pos = VecD<N>::Zero();
  VecD<N> vel = VecD<N>::Zero();
  VecD<N> acc = VecD<N>::Zero();
};

/// What the controller gets to see at a control instant.
template <int N>
struct Measurement {
  GeneralizedState<N> state;  // chi, chi_dot and chi_ddot
  Vec3 f_ext = Vec3::Zero();  // sensed end-effector force, world frame
  Mat3N<N> j_alpha = Mat3N<N>::Zero();
};

template <int N>
VecD<N> auxiliary_error(const VecD<N>& e, const VecD<N>& e_dot, const VecD<N>& gamma, const VecD<N>& phi) {
  return e_dot + phi.cwiseProduct(e) - gamma;
}

template <int N>
VecD<N> gamma_derivative(const VecD<N>& gamma, const VecD<N>& e_tau, const ControllerGains<N>& g) {
  return (e_tau - g.residual_damping().cwiseProduct(gamma)).cwiseQuotient(g.md);
}

template <int N>
double robust_gain_rho(const AdaptiveState<N>& a, double xi_norm, double acc_norm) {
  return a.h[0] + a.h[1] * xi_norm + a.h[2] * xi_norm * xi_norm + a.h[3] * acc_norm + a.zeta;
}

/// Boundary-layer robust term, entering the torque with the stabilizing sign.
template <int N>
VecD<N> robust_term(const VecD<N>& s, double rho, double boundary) {
  const double ns = s.norm();
  if (ns >= boundary) return (-rho / ns) * s;
  return (-rho / boundary) * s;
}

struct AdaptiveRates {
  std::array<double, 4> h_dot{};
  double zeta_dot = 0.0;
};

template <int N>
AdaptiveRates adaptive_derivatives(const AdaptiveState<N>& a, double s_norm, double xi_norm, double acc_norm,
                                   const ControllerGains<N>& g) {
  AdaptiveRates r;
  double weighted = a.h[3] * acc_norm;
  double xi_pow = 1.0;
  for (int i = 0; i < 3; ++i) {
    r.h_dot[i] = s_norm * xi_pow - g.nu[i] * a.h[i];
    weighted += a.h[i] * xi_pow;
    xi_pow *= xi_norm;
  }
  r.h_dot[3] = s_norm * acc_norm - g.nu[3] * a.h[3];
  r.zeta_dot = s_norm >= g.boundary ? 0.0 : -(1.0 + weighted * s_norm) * a.zeta + g.epsilon;
  return r;
}

/// e_tau = tau_ext - tau_d restricted to the arm joints.
template <int N>
VecD<N> torque_deviation(const Mat3N<N>& j_alpha, const Vec3& f_ext, const Vec3& f_desired) {
  return joint_space_force<N>(j_alpha, f_ext - f_desired);
}

template <int N>
struct ControlTerms {
  VecD<N> tau;
  VecD<N> s;
  VecD<N> dtau;
  double rho = 0.0;
};

/// Control torque at one instant for a given adaptive state.
template <int N>
ControlTerms<N> control_torque(const Measurement<N>& meas, const ReferenceSignal<N>& ref, const AdaptiveState<N>& a,
                               const ControllerGains<N>& g, const Vec3& f_desired = Vec3::Zero()) {
  const VecD<N> e = meas.state.pos - ref.pos;
  const VecD<N> e_dot = meas.state.vel - ref.vel;
  const double xi = std::sqrt(e.squaredNorm() + e_dot.squaredNorm());
  const VecD<N> tau_d = joint_space_force<N>(meas.j_alpha, f_desired);

  ControlTerms<N> out;
  out.s = auxiliary_error<N>(e, e_dot, a.gamma, g.phi);
  out.rho = robust_gain_rho(a, xi, meas.state.acc.norm());
  out.dtau = robust_term<N>(out.s, out.rho, g.boundary);
  out.tau = -g.lambda.cwiseProduct(out.s) - tau_d + out.dtau +
            g.md.cwiseProduct(ref.acc - g.phi.cwiseProduct(e_dot)) - g.residual_damping().cwiseProduct(a.gamma);
  return out;
}

template <int N>
struct ControllerOutput {
  VecD<N> tau;
  AdaptiveState<N> next;
  ControlTerms<N> terms;
  VecD<N> e_tau;
};

/// Computes the torque for this instant, then advances gamma, H_i and zeta by
/// one RK4 step of length dt. Measurements are held over the step; e_tau is
/// extrapolated linearly from the previous call.
template <int N>
ControllerOutput<N> controller_step(const AdaptiveState<N>& state, const Measurement<N>& meas,
                                    const ReferenceSignal<N>& ref, const ControllerGains<N>& g, double dt,
                                    const Vec3& f_desired = Vec3::Zero()) {
  if (!(dt > 0.0)) throw InputError("controller step needs dt > 0");
  if (!meas.state.pos.allFinite() || !meas.state.vel.allFinite() || !meas.state.acc.allFinite() ||
      !meas.f_ext.allFinite() || !meas.j_alpha.allFinite()) {
    throw InputError("non-finite measurement");
  }
  constexpr int D = kDof<N>;
  ControllerOutput<N> out;
  out.terms = control_torque(meas, ref, state, g, f_desired);
  out.tau = out.terms.tau;
  out.e_tau = torque_deviation<N>(meas.j_alpha, meas.f_ext, f_desired);

  const VecD<N> e = meas.state.pos - ref.pos;
  const VecD<N> e_dot = meas.state.vel - ref.vel;
  const double xi = std::sqrt(e.squaredNorm() + e_dot.squaredNorm());
  const double acc = meas.state.acc.norm();
  const VecD<N> slope = state.has_e_tau ? VecD<N>((out.e_tau - state.e_tau) / dt) : VecD<N>::Zero();

  // y = [gamma; H0..H3; zeta]
  using Y = Eigen::Matrix<double, D + 5, 1>;
  Y y;
  y << state.gamma, state.h[0], state.h[1], state.h[2], state.h[3], state.zeta;
  auto rhs = [&](double h, const Y& yy) -> Y {
    AdaptiveState<N> a;
    a.gamma = yy.template head<D>();
    a.h = {yy(D), yy(D + 1), yy(D + 2), yy(D + 3)};
    a.zeta = yy(D + 4);
    const VecD<N> s = auxiliary_error<N>(e, e_dot, a.gamma, g.phi);
    const auto rates = adaptive_derivatives(a, s.norm(), xi, acc, g);
    Y dy;
    dy << gamma_derivative<N>(a.gamma, VecD<N>(out.e_tau + h * slope), g), rates.h_dot[0], rates.h_dot[1],
        rates.h_dot[2], rates.h_dot[3], rates.zeta_dot;
    return dy;
  };
  const Y next = rk4_step(rhs, 0.0, y, dt);

  out.next.gamma = next.template head<D>();
  out.next.h = {next(D), next(D + 1), next(D + 2), next(D + 3)};
  out.next.zeta = next(D + 4);
  out.next.s = out.terms.s;
  out.next.rho = out.terms.rho;
  out.next.e_tau = out.e_tau;
  out.next.has_e_tau = true;
  out.next.check();
  return out;
}

}  // namespace aam
