#pragma once

// Target impedance  Md e_dd + Kd e_d + Kp e = e_tau  and the gain conditions
// that the auxiliary error s = e_d + Phi e - gamma relies on:
//   (a) Md^-1 Kd - Phi > 0
//   (b) (Kd - Md Phi) Phi = Kp
// All gain matrices are diagonal and stored as vectors.

#include "aam/integrators.hpp"
#include "aam/types.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace aam {

template <int N>
struct ControllerGains {
  VecD<N> md = VecD<N>::Ones();
  VecD<N> kd = VecD<N>::Ones();
  VecD<N> kp = VecD<N>::Zero();
  VecD<N> phi = VecD<N>::Zero();
  VecD<N> lambda = VecD<N>::Ones();
  double boundary = 0.1;  // varpi
  std::array<double, 4> nu{10.0, 10.0, 10.0, 10.0};
  double epsilon = 1e-4;

  /// Kd - Md Phi, the damping left on s.
  VecD<N> residual_damping() const { return kd - md.cwiseProduct(phi); }
};

/// Design parameters of the experimental vehicle (N = 2 is the published arm;
/// other N replicate the arm channel values).
template <int N>
ControllerGains<N> reference_gains() {
  ControllerGains<N> g;
  for (int i = 0; i < kDof<N>; ++i) {
    if (i < 3) {
      g.md(i) = 1.0;
      g.kd(i) = 40.0;
      g.kp(i) = 144.0;
      g.phi(i) = 4.0;
      g.lambda(i) = i == 2 ? 2.0 : 1.5;
    } else if (i < 6) {
      g.md(i) = 0.015;
      g.kd(i) = 0.75;
      g.kp(i) = 2.115;
      g.phi(i) = 3.0;
      g.lambda(i) = i == 5 ? 2.5 : 3.5;
    } else {
      g.md(i) = 0.1;
      g.kd(i) = 0.7;
      g.kp(i) = 1.225;
      g.phi(i) = 3.5;
      g.lambda(i) = 1.0;
    }
  }
  g.boundary = 0.1;
  g.nu = {10.0, 10.0, 10.0, 10.0};
  g.epsilon = 1e-4;
  return g;
}

// Relative slack on a negative discriminant that is treated as a double root.
inline constexpr double kDiscriminantSlack = 1e-12;

/// Smaller root of Md Phi^2 - Kd Phi + Kp = 0, channel by channel.
/// Throws GainError naming the channel when no real root exists.
template <int N>
VecD<N> derive_phi(const VecD<N>& md, const VecD<N>& kd, const VecD<N>& kp) {
  VecD<N> phi;
  for (int i = 0; i < kDof<N>; ++i) {
    if (!(md(i) > 0.0) || !(kd(i) > 0.0) || !(kp(i) >= 0.0)) {
      throw GainError("channel " + std::to_string(i) + ": Md, Kd must be positive and Kp non-negative");
    }
    double disc = kd(i) * kd(i) - 4.0 * md(i) * kp(i);
    if (disc < 0.0) {
      if (disc < -kDiscriminantSlack * kd(i) * kd(i)) {
        std::ostringstream msg;
        msg << "channel " << i << ": Kd^2 - 4 Md Kp = " << disc << " < 0, no real Phi";
        throw GainError(msg.str());
      }
      disc = 0.0;
    }
    // 2 Kp / (Kd + sqrt(disc)) equals (Kd - sqrt(disc)) / (2 Md) without cancellation.
    phi(i) = 2.0 * kp(i) / (kd(i) + std::sqrt(disc));
  }
  return phi;
}

struct GainChannelReport {
  double residual = 0.0;  // |(Kd - Md Phi) Phi - Kp|
  double margin = 0.0;    // Kd / Md - Phi
  bool positive = true;
  bool gain_condition = true;  // (b)
  bool margin_ok = true;       // (a)
  bool canonical_root = true;
  bool zero_stiffness = false;
};

template <int N>
struct GainReport {
  std::array<GainChannelReport, kDof<N>> channels{};
  bool scalars_ok = true;
  bool pass = true;
  double max_residual = 0.0;
  std::vector<std::string> failures;
  std::vector<std::string> warnings;

  std::string text() const {
    std::ostringstream os;
    os << "channel  residual(b)      margin(a)   status\n";
    for (int i = 0; i < kDof<N>; ++i) {
      const auto& c = channels[i];
      os.width(7);
      os << i << "  ";
      os.width(11);
      os << c.residual << "  ";
      os.width(13);
      os << c.margin << "   " << (c.positive && c.gain_condition && c.margin_ok ? "ok" : "FAIL");
      if (!c.canonical_root) os << " (larger root)";
      if (c.zero_stiffness) os << " (zero stiffness)";
      os << '\n';
    }
    for (const auto& f : failures) os << "error: " << f << '\n';
    for (const auto& w : warnings) os << "warning: " << w << '\n';
    os << (pass ? "PASS" : "FAIL") << " max residual " << max_residual << '\n';
    return os.str();
  }

  /// One `key=value` record per line.
  std::string records() const {
    std::ostringstream os;
    os.precision(17);
    os << "pass=" << (pass ? 1 : 0) << '\n' << "max_residual=" << max_residual << '\n';
    for (int i = 0; i < kDof<N>; ++i) {
      const auto& c = channels[i];
      os << "channel." << i << ".residual=" << c.residual << '\n'
         << "channel." << i << ".margin=" << c.margin << '\n'
         << "channel." << i << ".ok=" << (c.positive && c.gain_condition && c.margin_ok ? 1 : 0) << '\n';
    }
    return os.str();
  }
};

inline constexpr double kGainResidualTol = 1e-9;

template <int N>
GainReport<N> validate_gains(const ControllerGains<N>& g) {
  GainReport<N> rep;
  auto fail = [&rep](std::string msg) {
    rep.pass = false;
    rep.failures.push_back(std::move(msg));
  };
  for (int i = 0; i < kDof<N>; ++i) {
    auto& c = rep.channels[i];
    const std::string tag = "channel " + std::to_string(i);
    c.positive = g.md(i) > 0.0 && g.kd(i) > 0.0 && g.lambda(i) > 0.0 && g.kp(i) >= 0.0 && g.phi(i) >= 0.0 &&
                 std::isfinite(g.md(i) + g.kd(i) + g.kp(i) + g.phi(i) + g.lambda(i));
    if (!c.positive) {
      fail(tag + ": Md, Kd, Lambda must be positive and Kp, Phi non-negative");
      continue;
    }
    c.residual = std::abs((g.kd(i) - g.md(i) * g.phi(i)) * g.phi(i) - g.kp(i));
    c.margin = g.kd(i) / g.md(i) - g.phi(i);
    c.gain_condition = c.residual <= kGainResidualTol * std::max(1.0, g.kp(i));
    c.margin_ok = c.margin > 0.0;
    rep.max_residual = std::max(rep.max_residual, c.residual);
    if (!c.gain_condition) fail(tag + ": (Kd - Md Phi) Phi != Kp, residual " + std::to_string(c.residual));
    if (!c.margin_ok) fail(tag + ": Kd/Md - Phi = " + std::to_string(c.margin) + " is not positive");
    if (c.gain_condition) {
      // Flag the larger quadratic root; it satisfies (b) but leaves less damping on s.
      const double disc = std::max(0.0, g.kd(i) * g.kd(i) - 4.0 * g.md(i) * g.kp(i));
      const double small_root = 2.0 * g.kp(i) / (g.kd(i) + std::sqrt(disc));
      c.canonical_root = std::abs(g.phi(i) - small_root) <= 1e-9 * std::max(1.0, small_root);
      if (!c.canonical_root) rep.warnings.push_back(tag + ": Phi is the larger root");
    }
    c.zero_stiffness = g.kp(i) == 0.0;
    if (c.zero_stiffness) rep.warnings.push_back(tag + ": zero stiffness");
  }
  rep.scalars_ok = g.boundary > 0.0 && g.epsilon > 0.0;
  for (double nu : g.nu) rep.scalars_ok = rep.scalars_ok && nu > 0.0;
  if (!rep.scalars_ok) fail("boundary layer, leakage rates and epsilon must be positive");
  return rep;
}

template <int N>
struct TrackingErrors {
  VecD<N> e = VecD<N>::Zero();
  VecD<N> e_dot = VecD<N>::Zero();
  std::optional<VecD<N>> e_ddot;

  /// xi = [e; e_dot]
  Eigen::Matrix<double, 2 * kDof<N>, 1> xi() const {
    Eigen::Matrix<double, 2 * kDof<N>, 1> x;
    x << e, e_dot;
    return x;
  }
  double xi_norm() const { return std::sqrt(e.squaredNorm() + e_dot.squaredNorm()); }
};

/// Delta_I = Md e_dd + Kd e_d + Kp e - e_tau.
template <int N>
VecD<N> impedance_error(const TrackingErrors<N>& err, const VecD<N>& e_tau, const ControllerGains<N>& g) {
  if (!err.e_ddot) throw InputError("impedance error needs the error acceleration");
  return g.md.cwiseProduct(*err.e_ddot) + g.kd.cwiseProduct(err.e_dot) + g.kp.cwiseProduct(err.e) - e_tau;
}

template <int N>
struct ImpedanceSample {
  double t = 0.0;
  VecD<N> e;
  VecD<N> e_dot;
  VecD<N> e_ddot;
};

/// Integrates the target impedance with RK4 from (e0, e_dot0) under e_tau(t).
/// Used as a reference generator for how the closed loop should respond.
template <int N>
std::vector<ImpedanceSample<N>> target_response(const VecD<N>& e0, const VecD<N>& e_dot0,
                                                const std::function<VecD<N>(double)>& e_tau,
                                                const ControllerGains<N>& g, double horizon, double dt) {
  if (!(dt > 0.0) || !(horizon >= 0.0)) throw InputError("target_response needs dt > 0 and horizon >= 0");
  using State = Eigen::Matrix<double, 2 * kDof<N>, 1>;
  auto accel = [&](double t, const VecD<N>& e, const VecD<N>& ed) -> VecD<N> {
    return (e_tau(t) - g.kd.cwiseProduct(ed) - g.kp.cwiseProduct(e)).cwiseQuotient(g.md);
  };
  auto rhs = [&](double t, const State& y) -> State {
    State dy;
    dy << y.template tail<kDof<N>>(), accel(t, y.template head<kDof<N>>(), y.template tail<kDof<N>>());
    return dy;
  };
  const auto steps = static_cast<long>(std::llround(horizon / dt));
  std::vector<ImpedanceSample<N>> out;
  out.reserve(steps + 1);
  State y;
  y << e0, e_dot0;
  for (long k = 0;; ++k) {
    const double t = k * dt;
    ImpedanceSample<N> s{t, y.template head<kDof<N>>(), y.template tail<kDof<N>>(), {}};
    s.e_ddot = accel(t, s.e, s.e_dot);
    out.push_back(s);
    if (k == steps) break;
    y = rk4_step(rhs, t, y, dt);
  }
  return out;
}

}  // namespace aam
