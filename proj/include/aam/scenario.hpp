#pragma once

// Closed-loop simulation of the payload-catch scenario.
//
// The plant is integrated with RK4 at plant_dt; the controller runs every
// control_dt and its torque is held in between. The catch adds the payload
// mass to the plant and applies a half-sine impact force at the end effector.

#include "aam/adaptive.hpp"
#include "aam/baselines.hpp"
#include "aam/impedance.hpp"
#include "aam/integrators.hpp"
#include "aam/plant.hpp"
#include "aam/trajectory.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace aam {

struct CatchEvent {
  double time = 6.5;
  double mass = 0.1;
  Vec3 incoming_velocity{0.0, 0.0, -2.0};
  double window = 0.05;  // impact duration
};

/// Contact force produced by a catch.
///
/// The payload mass joins the plant at t0, but the net takes its weight up
/// gradually: over the window, weight * ramp(t) is transmitted and the rest is
/// still carried by the incoming payload. `applied` is the extra end-effector
/// force seen by the plant, `sensed` what the wrist sensor reads.
struct ImpactProfile {
  double t0 = 0.0;
  double window = 0.05;
  Vec3 impulse = Vec3::Zero();  // m * v_in
  Vec3 weight = Vec3::Zero();   // carried payload weight once caught

  Vec3 mean_force() const { return impulse / window; }

  /// Raised-cosine weight transfer, 0 before t0 and 1 after the window.
  double ramp(double t) const {
    const double u = (t - t0) / window;
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return 0.5 * (1.0 - std::cos(kPi * u));
  }

  /// Half-sine momentum transfer; integrates to `impulse`.
  Vec3 impact(double t) const {
    const double u = (t - t0) / window;
    if (u <= 0.0 || u >= 1.0) return Vec3::Zero();
    return (0.5 * kPi * std::sin(kPi * u)) * mean_force();
  }

  Vec3 applied(double t) const {
    if (t <= t0) return Vec3::Zero();
    return impact(t) + (ramp(t) - 1.0) * weight;
  }

  Vec3 sensed(double t) const { return impact(t) + ramp(t) * weight; }
};

/// Adds the payload to the end effector and returns the contact profile.
template <int N>
std::pair<PlantParameters<N>, ImpactProfile> apply_catch_event(const PlantParameters<N>& params,
                                                               const CatchEvent& event, double t) {
  if (!(event.mass >= 0.0)) throw ConfigError("payload mass must be non-negative");
  if (!(event.window > 0.0)) throw ConfigError("impact window must be positive");
  ImpactProfile profile;
  profile.t0 = t;
  profile.window = event.window;
  if (event.mass == 0.0) return {params, profile};
  PlantParameters<N> out = params;
  out.payload_mass += event.mass;
  profile.impulse = event.mass * event.incoming_velocity;
  profile.weight = Vec3(0.0, 0.0, -event.mass * params.gravity);
  return {out, profile};
}

enum class ActuationMode { Ideal, Underactuated };

template <int N>
struct Actuation {
  VecD<N> applied;
  double deficit = 0.0;  // |f_des - applied translational force|
};

/// Ideal: pass-through. Underactuated: the translational force is projected
/// onto the body z axis (total thrust); attitude and arm channels pass.
template <int N>
Actuation<N> actuation_map(const VecD<N>& tau, const Vec3& q, ActuationMode mode) {
  Actuation<N> out{tau, 0.0};
  if (mode == ActuationMode::Ideal) return out;
  const Vec3 b3 = rotation_matrix_t<double>(q).col(2);
  const Vec3 f = tau.template head<3>();
  const double thrust = b3.dot(f);
  out.applied.template head<3>() = thrust * b3;
  out.deficit = (f - thrust * b3).norm();
  return out;
}

/// Gaussian sensor noise; off unless enabled.
struct NoiseSpec {
  bool enabled = false;
  std::uint64_t seed = 1;
  double position = 0.0;
  double velocity = 0.0;
  double acceleration = 0.0;
  double force = 0.0;
};

template <int N>
struct ScenarioConfig {
  double horizon = 20.0;
  double plant_dt = 1e-4;
  double control_dt = 1e-4;
  Vec3 start_position{-1.0, 0.0, 0.0};
  double start_yaw = 0.0;
  VecN<N> start_arm = VecN<N>::Zero();  // rad
  // Knots after t = 0 per channel, (time, value) in SI units; the start pose
  // is the implicit first knot. Empty means hold the start value.
  std::array<std::vector<std::pair<double, double>>, kDof<N>> waypoints{};
  CatchEvent catch_event{};
  ActuationMode mode = ActuationMode::Ideal;
  NoiseSpec noise{};
  double divergence_speed = 50.0;  // |chi_dot| bound
  double force_filter = 0.005;     // time constant of the sensed-force low-pass, s; 0 disables
  double accel_filter = 0.02;      // same for the measured chi_ddot

  VecD<N> start_pose() const {
    VecD<N> x = VecD<N>::Zero();
    x.template head<3>() = start_position;
    x(5) = start_yaw;
    x.template tail<N>() = start_arm;
    return x;
  }

  long control_steps() const { return std::lround(horizon / control_dt); }
  long substeps() const { return std::lround(control_dt / plant_dt); }

  void validate() const {
    if (!(horizon > 0.0) || !(plant_dt > 0.0) || !(control_dt > 0.0)) {
      throw ConfigError("horizon and time steps must be positive");
    }
    const double ratio = control_dt / plant_dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio || std::round(ratio) < 1.0) {
      throw ConfigError("control dt must be an integer multiple of plant dt");
    }
    if (std::abs(horizon / control_dt - std::round(horizon / control_dt)) > 1e-6) {
      throw ConfigError("horizon must be a whole number of control periods");
    }
    if (!(catch_event.time >= 0.0 && catch_event.time < horizon)) throw ConfigError("catch time outside horizon");
    if (!(catch_event.mass >= 0.0)) throw ConfigError("payload mass must be non-negative");
    if (!(catch_event.window > 0.0)) throw ConfigError("impact window must be positive");
    if (!(divergence_speed > 0.0)) throw ConfigError("divergence bound must be positive");
    if (!(force_filter >= 0.0) || !(accel_filter >= 0.0)) {
      throw ConfigError("filter time constants must be non-negative");
    }
    if (!start_position.allFinite() || !std::isfinite(start_yaw) || !start_arm.allFinite()) {
      throw ConfigError("start pose must be finite");
    }
    for (const auto& channel : waypoints) {
      double last = 0.0;
      for (const auto& [t, v] : channel) {
        if (!(t > last) || !std::isfinite(v)) throw ConfigError("waypoint times must be increasing and positive");
        last = t;
      }
    }
  }

  ReferenceTrajectory<N> reference() const {
    ReferenceTrajectory<N> ref;
    const VecD<N> x0 = start_pose();
    for (int i = 0; i < kDof<N>; ++i) {
      if (waypoints[i].empty()) {
        ref.channels[i] = QuinticTrajectory::constant(x0(i), 0.0, horizon);
        continue;
      }
      std::vector<double> ts{0.0};
      std::vector<double> vs{x0(i)};
      for (const auto& [t, v] : waypoints[i]) {
        ts.push_back(t);
        vs.push_back(v);
      }
      ref.channels[i] = QuinticTrajectory(std::move(ts), std::move(vs));
    }
    return ref;
  }
};

/// The demonstration: take off at (-1, 0), climb to 1 m, fly to (1, 0) and
/// back, unfold the arm for the catch at (0, 0) and fold it afterwards.
template <int N>
ScenarioConfig<N> default_scenario() {
  ScenarioConfig<N> sc;
  sc.waypoints[0] = {{2.0, -1.0}, {11.0, 1.0}, {12.0, 1.0}, {17.0, -1.0}};
  sc.waypoints[2] = {{2.0, 1.0}};
  const std::array<double, 2> folded{165.0, 140.0};
  const std::array<double, 2> open{110.0, -20.0};
  for (int k = 0; k < N; ++k) {
    const int c = k < 2 ? k : 1;
    sc.start_arm(k) = folded[c] * kDeg;
    sc.waypoints[6 + k] = {{3.0, folded[c] * kDeg}, {5.5, open[c] * kDeg}, {14.0, open[c] * kDeg},
                           {17.0, folded[c] * kDeg}};
  }
  return sc;
}

enum class ControllerKind { Proposed, Csc, Psc };

inline std::string controller_name(ControllerKind k) {
  switch (k) {
    case ControllerKind::Proposed:
      return "proposed";
    case ControllerKind::Csc:
      return "csc";
    case ControllerKind::Psc:
      return "psc";
  }
  return "?";
}

inline ControllerKind parse_controller(const std::string& s) {
  if (s == "proposed") return ControllerKind::Proposed;
  if (s == "csc") return ControllerKind::Csc;
  if (s == "psc") return ControllerKind::Psc;
  throw ConfigError("unknown controller '" + s + "'");
}

template <int N>
struct ControllerSetup {
  ControllerKind kind = ControllerKind::Proposed;
  ControllerGains<N> gains = reference_gains<N>();
  AdaptiveState<N> initial{};
  Vec3 f_desired = Vec3::Zero();
  // Payload-free model used by the baselines and by the gravity trim.
  PlantParameters<N> nominal{};
  // Adds g_nominal(chi) to the adaptive torque.
  bool gravity_feedforward = true;
  // Ablation: gamma held at zero.
  bool freeze_gamma = false;
  PscConfig<N> psc{};
};

template <int N>
struct TraceRow {
  double t = 0.0;
  VecD<N> pos, vel, acc;
  VecD<N> ref_pos, ref_vel, ref_acc;
  VecD<N> s, gamma;
  std::array<double, 4> h{};
  double zeta = 0.0;
  double rho = 0.0;
  VecD<N> tau;  // applied, held until the next row
  Vec3 f_ext = Vec3::Zero();
  VecD<N> e_tau;
  VecD<N> delta_i;
  double deficit = 0.0;
  double work = 0.0;  // cumulative actuator work
  bool caught = false;

  VecD<N> e() const { return pos - ref_pos; }
  VecD<N> e_dot() const { return vel - ref_vel; }
};

template <int N>
struct SimTrace {
  std::string controller;
  double dt = 0.0;
  double catch_time = 0.0;
  double payload = 0.0;
  bool diverged = false;
  double diverged_at = std::numeric_limits<double>::quiet_NaN();
  std::vector<TraceRow<N>> rows;

  bool caught() const { return !rows.empty() && rows.back().caught; }
};

namespace detail {

template <int N>
bool state_ok(const VecD<N>& pos, const VecD<N>& vel, double bound) {
  return pos.allFinite() && vel.allFinite() && vel.norm() <= bound &&
         std::abs(pos(4)) < 0.5 * kPi - kPitchGuard;
}

}  // namespace detail

template <int N>
SimTrace<N> simulate(const ScenarioConfig<N>& sc, const PlantParameters<N>& plant, const ControllerSetup<N>& ctl) {
  constexpr int D = kDof<N>;
  sc.validate();
  plant.validate();
  ctl.nominal.validate();
  if (ctl.kind == ControllerKind::Proposed || ctl.kind == ControllerKind::Csc) {
    const auto rep = validate_gains(ctl.gains);
    if (!rep.pass) throw GainError(rep.failures.front());
  }
  CscConfig<N> csc{ctl.nominal, ctl.gains.md, ctl.gains.kd, ctl.gains.kp, ctl.f_desired};
  PscConfig<N> psc = ctl.psc;
  psc.nominal = ctl.nominal;
  psc.f_desired = ctl.f_desired;
  if (ctl.kind == ControllerKind::Csc) csc.validate();
  if (ctl.kind == ControllerKind::Psc) psc.validate();

  const auto reference = sc.reference();
  const long steps = sc.control_steps();
  const long sub = sc.substeps();
  const double dt = sc.control_dt;
  const double h = dt / static_cast<double>(sub);
  const long catch_step = static_cast<long>(std::ceil(sc.catch_event.time / dt - 1e-9));

  SimTrace<N> trace;
  trace.controller = controller_name(ctl.kind);
  trace.dt = dt;
  trace.catch_time = catch_step * dt;
  trace.payload = sc.catch_event.mass;
  trace.rows.reserve(static_cast<std::size_t>(steps));

  PlantParameters<N> params = plant;
  ImpactProfile impact;
  impact.t0 = std::numeric_limits<double>::infinity();
  bool caught = false;

  using X = Eigen::Matrix<double, 2 * D, 1>;
  X x;
  x << reference(0.0).pos, VecD<N>::Zero();
  auto as_state = [](const X& y) {
    GeneralizedState<N> s;
    s.pos = y.template head<D>();
    s.vel = y.template tail<D>();
    return s;
  };

  // Start from trim: the previous torque balances gravity.
  VecD<N> tau_prev = gravity_vector(as_state(x), params);
  Vec3 f_filtered = Vec3::Zero();
  auto lowpass_gain = [dt](double tc) { return tc > 0.0 ? 1.0 - std::exp(-dt / tc) : 1.0; };
  const double force_gain = lowpass_gain(sc.force_filter);
  const double accel_gain = lowpass_gain(sc.accel_filter);
  VecD<N> acc_filtered = VecD<N>::Zero();

  AdaptiveState<N> adaptive = ctl.initial;
  if (ctl.freeze_gamma) adaptive.gamma.setZero();
  PscEstimator estimator;
  double work = 0.0;

  std::mt19937_64 rng(sc.noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto noisy = [&](auto v, double sd) {
    if (sc.noise.enabled && sd > 0.0) {
      for (int i = 0; i < v.size(); ++i) v(i) += sd * normal(rng);
    }
    return v;
  };

  for (long k = 0; k < steps; ++k) {
    const double t = k * dt;
    if (!caught && k == catch_step && sc.catch_event.mass > 0.0) {
      std::tie(params, impact) = apply_catch_event(params, sc.catch_event, t);
      caught = true;
    }

    GeneralizedState<N> truth = as_state(x);
    try {
      truth.acc = forward_dynamics(truth, tau_prev, impact.applied(t), t, params);
    } catch (const Error&) {
      trace.diverged = true;
      trace.diverged_at = t;
      break;
    }
    f_filtered += force_gain * (impact.sensed(t) - f_filtered);
    acc_filtered += accel_gain * (truth.acc - acc_filtered);

    Measurement<N> meas;
    meas.state.pos = noisy(truth.pos, sc.noise.position);
    meas.state.vel = noisy(truth.vel, sc.noise.velocity);
    meas.state.acc = noisy(acc_filtered, sc.noise.acceleration);
    meas.f_ext = noisy(f_filtered, sc.noise.force);
    meas.j_alpha = manipulator_jacobian(meas.state, params);
    const auto ref = reference(t);

    TraceRow<N> row;
    row.t = t;
    row.pos = truth.pos;
    row.vel = truth.vel;
    row.acc = truth.acc;
    row.ref_pos = ref.pos;
    row.ref_vel = ref.vel;
    row.ref_acc = ref.acc;
    row.f_ext = meas.f_ext;
    row.caught = caught;
    row.e_tau = torque_deviation<N>(meas.j_alpha, meas.f_ext, ctl.f_desired);
    row.gamma = VecD<N>::Zero();
    row.s = auxiliary_error<N>(row.e(), row.e_dot(), row.gamma, ctl.gains.phi);

    VecD<N> tau_cmd;
    switch (ctl.kind) {
      case ControllerKind::Proposed: {
        auto out = controller_step(adaptive, meas, ref, ctl.gains, dt, ctl.f_desired);
        tau_cmd = out.tau;
        if (ctl.gravity_feedforward) tau_cmd += gravity_vector(meas.state, ctl.nominal);
        row.s = out.terms.s;
        row.gamma = adaptive.gamma;
        row.h = adaptive.h;
        row.zeta = adaptive.zeta;
        row.rho = out.terms.rho;
        adaptive = out.next;
        if (ctl.freeze_gamma) adaptive.gamma.setZero();
        break;
      }
      case ControllerKind::Csc:
        tau_cmd = csc_control(meas, ref, csc);
        break;
      case ControllerKind::Psc: {
        auto out = psc_control(meas, ref, psc, estimator);
        tau_cmd = out.tau;
        estimator = out.next;
        break;
      }
    }

    const auto act = actuation_map<N>(tau_cmd, meas.state.q(), sc.mode);
    row.tau = act.applied;
    row.deficit = act.deficit;
    TrackingErrors<N> err{row.e(), row.e_dot(), VecD<N>(truth.acc - ref.acc)};
    row.delta_i = impedance_error(err, row.e_tau, ctl.gains);

    const VecD<N> tau = act.applied;
    auto rhs = [&](double tt, const X& y) -> X {
      X dy;
      dy << y.template tail<D>(), forward_dynamics(as_state(y), tau, impact.applied(tt), tt, params);
      return dy;
    };
    const VecD<N> vel_before = x.template tail<D>();
    bool failed = false;
    try {
      for (long j = 0; j < sub; ++j) x = rk4_step(rhs, t + j * h, x, h);
    } catch (const Error&) {
      failed = true;
    }
    if (!failed) work += tau.dot(0.5 * (vel_before + x.template tail<D>())) * dt;
    row.work = work;
    trace.rows.push_back(std::move(row));
    if (failed || !detail::state_ok<N>(x.template head<D>(), x.template tail<D>(), sc.divergence_speed)) {
      trace.diverged = true;
      trace.diverged_at = t + dt;
      break;
    }
    tau_prev = tau;
  }
  return trace;
}

}  // namespace aam
