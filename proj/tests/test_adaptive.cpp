#include "aam/adaptive.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace aam;

namespace {

constexpr int N = 2;

VecD<N> random_vec(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  VecD<N> v;
  for (int i = 0; i < kDof<N>; ++i) v(i) = nd(rng);
  return v;
}

AdaptiveState<N> zero_estimates(double zeta) {
  AdaptiveState<N> a;
  a.gamma.setZero();
  a.h = {0.0, 0.0, 0.0, 0.0};
  a.zeta = zeta;
  return a;
}

}  // namespace

TEST(AuxiliaryError, Cases) {
  const auto g = reference_gains<N>();
  EXPECT_TRUE(auxiliary_error<N>(VecD<N>::Zero(), VecD<N>::Zero(), VecD<N>::Zero(), g.phi).isZero(0.0));
  std::mt19937_64 rng(1);
  const VecD<N> e = random_vec(rng), ed = random_vec(rng);
  const VecD<N> gamma = ed + g.phi.cwiseProduct(e);
  EXPECT_LT(auxiliary_error<N>(e, ed, gamma, g.phi).cwiseAbs().maxCoeff(), 1e-15);
  const VecD<N> s = auxiliary_error<N>(VecD<N>::Unit(0), VecD<N>::Zero(), VecD<N>::Zero(), g.phi);
  EXPECT_EQ(s, VecD<N>(4.0 * VecD<N>::Unit(0)));
}

TEST(GammaDerivative, Cases) {
  const auto g = reference_gains<N>();
  EXPECT_TRUE(gamma_derivative<N>(VecD<N>::Zero(), VecD<N>::Zero(), g).isZero(0.0));
  EXPECT_DOUBLE_EQ(gamma_derivative<N>(VecD<N>::Unit(0), VecD<N>::Zero(), g)(0), -36.0);
}

TEST(GammaDerivative, ConstantTorqueEquilibrium) {
  const auto g = reference_gains<N>();
  const VecD<N> e_tau = VecD<N>::LinSpaced(-1.0, 2.0);
  VecD<N> gamma = VecD<N>::Zero();
  const double h = 1e-3;
  for (int k = 0; k < 20000; ++k) {
    gamma = rk4_step([&](double, const VecD<N>& y) { return gamma_derivative<N>(y, e_tau, g); }, k * h, gamma, h);
  }
  EXPECT_LT((gamma - e_tau.cwiseQuotient(g.residual_damping())).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(RobustGain, Cases) {
  EXPECT_DOUBLE_EQ(robust_gain_rho(zero_estimates(0.1), 0.0, 0.0), 0.1);
  auto a = zero_estimates(0.0);
  a.h = {1.0, 1.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(robust_gain_rho(a, 2.0, 3.0), 10.0);
}

TEST(RobustGain, MonotoneInEveryArgument) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    auto a = zero_estimates(u(rng));
    for (auto& h : a.h) h = u(rng);
    const double xi = u(rng), acc = u(rng);
    const double base = robust_gain_rho(a, xi, acc);
    EXPECT_GE(robust_gain_rho(a, xi + 0.1, acc), base);
    EXPECT_GE(robust_gain_rho(a, xi, acc + 0.1), base);
    for (int i = 0; i < 4; ++i) {
      auto b = a;
      b.h[i] += 0.1;
      EXPECT_GE(robust_gain_rho(b, xi, acc), base);
    }
    auto c = a;
    c.zeta += 0.1;
    EXPECT_GT(robust_gain_rho(c, xi, acc), base);
  }
}

TEST(RobustTerm, Cases) {
  EXPECT_TRUE(robust_term<N>(VecD<N>::Zero(), 2.0, 0.1).isZero(0.0));
  const VecD<N> outside = 0.2 * VecD<N>::Unit(3);
  EXPECT_LT((robust_term<N>(outside, 2.0, 0.1) + 10.0 * outside).norm(), 1e-14);
  const VecD<N> inside = 0.05 * VecD<N>::Unit(3);
  EXPECT_LT((robust_term<N>(inside, 2.0, 0.1) + 20.0 * inside).norm(), 1e-14);
  EXPECT_NEAR(robust_term<N>(inside, 2.0, 0.1).norm(), 1.0, 1e-14);
}

TEST(RobustTerm, ContinuousAtBoundaryAndDissipative) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    VecD<N> s = random_vec(rng);
    const double rho = std::abs(random_vec(rng)(0));
    const VecD<N> out = robust_term<N>(s, rho, 0.1);
    EXPECT_LE(s.dot(out), 0.0);
    EXPECT_LE(out.norm(), rho * (1 + 1e-14));
    s *= 0.1 / s.norm();
    const VecD<N> inside = (-rho / 0.1) * s;
    EXPECT_LT((robust_term<N>(s, rho, 0.1) - inside).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(AdaptiveDerivatives, InsideBoundaryLayer) {
  const auto g = reference_gains<N>();
  auto a = zero_estimates(0.1);
  a.h = {0.01, 0.01, 0.01, 0.01};
  const auto r = adaptive_derivatives(a, 0.0, 0.0, 0.0, g);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(r.h_dot[i], -0.1);
  EXPECT_DOUBLE_EQ(r.zeta_dot, -0.1 + g.epsilon);
}

TEST(AdaptiveDerivatives, OutsideBoundaryLayer) {
  const auto g = reference_gains<N>();
  auto a = zero_estimates(0.1);
  a.h = {0.01, 0.01, 0.01, 0.01};
  const auto r = adaptive_derivatives(a, 1.0, 2.0, 0.0, g);
  EXPECT_DOUBLE_EQ(r.h_dot[2], 3.9);
  EXPECT_DOUBLE_EQ(r.zeta_dot, 0.0);
}

TEST(AdaptiveDerivatives, EstimatesCannotCrossZero) {
  const auto g = reference_gains<N>();
  auto a = zero_estimates(0.1);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    const auto r = adaptive_derivatives(a, u(rng), u(rng), u(rng), g);
    for (double hd : r.h_dot) EXPECT_GE(hd, 0.0);
  }
}

TEST(ControlTorque, ZeroEverythingGivesZero) {
  const auto g = reference_gains<N>();
  Measurement<N> meas;
  const auto out = control_torque(meas, ReferenceSignal<N>{}, zero_estimates(0.0), g);
  EXPECT_TRUE(out.tau.isZero(0.0));
}

TEST(ControlTorque, PerfectTrackingFeedsReferenceAcceleration) {
  const auto g = reference_gains<N>();
  std::mt19937_64 rng(5);
  ReferenceSignal<N> ref{random_vec(rng), random_vec(rng), random_vec(rng)};
  Measurement<N> meas;
  meas.state.pos = ref.pos;
  meas.state.vel = ref.vel;
  meas.j_alpha = Mat3N<N>::Random();
  const Vec3 fd(0.3, -0.1, 0.5);
  auto a = zero_estimates(0.1);
  a.gamma.setZero();
  const auto out = control_torque(meas, ref, a, g, fd);
  const VecD<N> expected = g.md.cwiseProduct(ref.acc) - joint_space_force<N>(meas.j_alpha, fd);
  EXPECT_LT((out.tau - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ControlTorque, ClosedLoopReducesToLumpedForm) {
  // With the true chi_dd from the plant, Md s' = -Lambda s + dtau - E where
  // E = (M - Md) chi_dd + C chi_d + g + d.
  const auto g = reference_gains<N>();
  PlantParameters<N> p;
  p.payload_mass = 0.2;
  p.disturbance.constant = VecD<N>::Constant(0.05);
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    Measurement<N> meas;
    meas.state = sample_state<N>(rng);
    meas.state.acc = random_vec(rng);
    meas.j_alpha = manipulator_jacobian(meas.state, p);
    meas.f_ext = Vec3(0.2, -0.4, -1.0);
    ReferenceSignal<N> ref{meas.state.pos + 0.1 * random_vec(rng), random_vec(rng), random_vec(rng)};
    auto a = zero_estimates(0.1);
    a.gamma = 0.1 * random_vec(rng);
    a.h = {0.3, 0.2, 0.1, 0.05};
    const Vec3 f_des(0.0, 0.0, -0.5);
    const auto terms = control_torque(meas, ref, a, g, f_des);
    const VecD<N> acc = forward_dynamics(meas.state, terms.tau, meas.f_ext, 0.0, p);
    const VecD<N> e_tau = torque_deviation<N>(meas.j_alpha, meas.f_ext, f_des);
    const VecD<N> e_dot = meas.state.vel - ref.vel;
    const VecD<N> s_dot = (acc - ref.acc) + g.phi.cwiseProduct(e_dot) - gamma_derivative<N>(a.gamma, e_tau, g);
    const VecD<N> lumped = (mass_matrix(meas.state, p) - MatD<N>(g.md.asDiagonal())) * acc +
                           coriolis_matrix(meas.state, p) * meas.state.vel + gravity_vector(meas.state, p) +
                           p.disturbance(0.0);
    const VecD<N> residual = g.md.cwiseProduct(s_dot) + g.lambda.cwiseProduct(terms.s) - terms.dtau + lumped;
    EXPECT_LT(residual.cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(ControllerStep, Deterministic) {
  const auto g = reference_gains<N>();
  std::mt19937_64 rng(7);
  Measurement<N> meas;
  meas.state.pos = random_vec(rng);
  meas.state.vel = random_vec(rng);
  meas.state.acc = random_vec(rng);
  const ReferenceSignal<N> ref{};
  const auto a = controller_step(AdaptiveState<N>{}, meas, ref, g, 1e-3);
  const auto b = controller_step(AdaptiveState<N>{}, meas, ref, g, 1e-3);
  EXPECT_EQ(a.tau, b.tau);
  EXPECT_EQ(a.next.gamma, b.next.gamma);
  EXPECT_EQ(a.next.h, b.next.h);
  EXPECT_EQ(a.next.zeta, b.next.zeta);
}

TEST(ControllerStep, RejectsNonFiniteMeasurement) {
  Measurement<N> meas;
  meas.state.vel(2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(controller_step(AdaptiveState<N>{}, meas, ReferenceSignal<N>{}, reference_gains<N>(), 1e-3),
               InputError);
  EXPECT_THROW(controller_step(AdaptiveState<N>{}, Measurement<N>{}, ReferenceSignal<N>{}, reference_gains<N>(), 0.0),
               InputError);
}

TEST(ControllerStep, FourthOrderInTheStep) {
  const auto g = reference_gains<N>();
  Measurement<N> meas;
  meas.state.pos = VecD<N>::Constant(0.3);
  meas.state.vel = VecD<N>::Constant(0.2);
  meas.state.acc = VecD<N>::Constant(0.1);
  meas.j_alpha = Mat3N<N>::Ones();
  meas.f_ext = Vec3(0.0, 0.0, -0.5);
  const ReferenceSignal<N> ref{};
  auto run = [&](double dt) {
    AdaptiveState<N> a;
    const long steps = std::lround(0.2 / dt);
    for (long k = 0; k < steps; ++k) a = controller_step(a, meas, ref, g, dt).next;
    Eigen::Matrix<double, kDof<N> + 5, 1> y;
    y << a.gamma, a.h[0], a.h[1], a.h[2], a.h[3], a.zeta;
    return y;
  };
  const auto ref_y = run(1e-5);
  const double e1 = (run(1e-2) - ref_y).norm();
  const double e2 = (run(5e-3) - ref_y).norm();
  EXPECT_GT(e1 / e2, 10.0) << e1 << " " << e2;
}

TEST(ControllerStep, SettlesWithZeroErrorAndNoContact) {
  const auto g = reference_gains<N>();
  const Measurement<N> meas;
  AdaptiveState<N> a;
  ControllerOutput<N> out;
  for (int k = 0; k < 20000; ++k) {
    out = controller_step(a, meas, ReferenceSignal<N>{}, g, 1e-3);
    a = out.next;
    for (double h : a.h) ASSERT_GE(h, 0.0);
    ASSERT_GT(a.zeta, 0.0);
  }
  for (double h : a.h) EXPECT_LT(h, 1e-12);
  EXPECT_NEAR(a.zeta, g.epsilon, 1e-9);
  EXPECT_LT(a.gamma.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(out.tau.cwiseAbs().maxCoeff(), 1e-9);
}
