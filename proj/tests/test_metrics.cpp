#include "aam/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace aam;

namespace {

constexpr int N = 2;

SimTrace<N> flat_trace(std::size_t n, double dt, const VecD<N>& err) {
  SimTrace<N> tr;
  tr.controller = "proposed";
  tr.dt = dt;
  for (std::size_t k = 0; k < n; ++k) {
    TraceRow<N> r;
    r.t = k * dt;
    r.ref_pos = VecD<N>::Zero();
    r.ref_vel = VecD<N>::Zero();
    r.ref_acc = VecD<N>::Zero();
    r.pos = err;
    r.vel = VecD<N>::Zero();
    r.acc = VecD<N>::Zero();
    r.s = VecD<N>::Zero();
    r.gamma = VecD<N>::Zero();
    r.tau = VecD<N>::Zero();
    r.e_tau = VecD<N>::Zero();
    r.delta_i = VecD<N>::Zero();
    r.zeta = 0.1;
    tr.rows.push_back(r);
  }
  return tr;
}

/// Smooth errors with gamma integrated by its own law, so the identity holds
/// up to the differencing error.
SimTrace<N> identity_trace(double dt, bool freeze_gamma) {
  const auto g = reference_gains<N>();
  const double horizon = 1.0;
  const long n = std::lround(horizon / dt) + 1;
  auto e_tau = [](double t) {
    VecD<N> v;
    for (int i = 0; i < kDof<N>; ++i) v(i) = std::cos(2.0 * t + 0.3 * i);
    return v;
  };
  SimTrace<N> tr = flat_trace(static_cast<std::size_t>(n), dt, VecD<N>::Zero());
  VecD<N> gamma = VecD<N>::Constant(0.01);
  for (long k = 0; k < n; ++k) {
    const double t = k * dt;
    auto& r = tr.rows[static_cast<std::size_t>(k)];
    for (int i = 0; i < kDof<N>; ++i) {
      r.pos(i) = 0.1 * std::sin(3.0 * t + i);
      r.vel(i) = 0.3 * std::cos(3.0 * t + i);
    }
    r.e_tau = e_tau(t);
    r.gamma = freeze_gamma ? VecD<N>::Zero() : gamma;
    r.s = auxiliary_error<N>(r.e(), r.e_dot(), r.gamma, g.phi);
    // Fine sub-stepping keeps gamma's own integration error negligible.
    const int sub = 10;
    for (int j = 0; j < sub; ++j) {
      const double h = dt / sub;
      gamma = rk4_step([&](double tt, const VecD<N>& y) { return gamma_derivative<N>(y, e_tau(tt), g); }, t + j * h,
                       gamma, h);
    }
  }
  return tr;
}

}  // namespace

TEST(Rms, ConstantErrorBothWindows) {
  VecD<N> e = VecD<N>::Zero();
  e(0) = 0.06;
  e(1) = 0.08;
  const auto row = rms_errors(flat_trace(100, 0.1, e), 5.0);
  EXPECT_NEAR(row.pre_ep, 0.1, 1e-15);
  EXPECT_NEAR(*row.post_ep, 0.1, 1e-15);
  EXPECT_EQ(row.pre_eq, 0.0);
}

TEST(Rms, ZeroErrorGivesZero) {
  const auto row = rms_errors(flat_trace(50, 0.1, VecD<N>::Zero()), 2.0);
  EXPECT_EQ(row.pre_ep, 0.0);
  EXPECT_EQ(*row.post_ep, 0.0);
  EXPECT_EQ(*row.post_eq, 0.0);
}

TEST(Rms, AttitudeInDegrees) {
  VecD<N> e = VecD<N>::Zero();
  e(4) = kDeg;
  EXPECT_NEAR(rms_errors(flat_trace(20, 0.1, e), 1.0).pre_eq, 1.0, 1e-12);
}

TEST(Rms, PostWindowDroppedWhenDivergedEarly) {
  auto tr = flat_trace(100, 0.1, VecD<N>::Ones());
  tr.diverged = true;
  tr.diverged_at = 7.0;
  EXPECT_FALSE(rms_errors(tr, 5.0, 10.0).post_ep.has_value());
  EXPECT_TRUE(rms_errors(tr, 5.0, 6.0).post_ep.has_value());
}

TEST(Rms, EmptyWindowThrows) {
  EXPECT_THROW(rms_errors(flat_trace(10, 0.1, VecD<N>::Zero()), 0.0), InputError);
  EXPECT_THROW(rms_errors(flat_trace(10, 0.1, VecD<N>::Zero()), 5.0), InputError);
}

TEST(Rms, InvariantToSampleOrder) {
  auto tr = flat_trace(200, 0.01, VecD<N>::Zero());
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (auto& r : tr.rows) {
    for (int i = 0; i < kDof<N>; ++i) r.pos(i) = nd(rng);
  }
  const auto a = rms_errors(tr, 1.0);
  auto shuffled = tr;
  std::shuffle(shuffled.rows.begin(), shuffled.rows.begin() + 100, rng);
  std::shuffle(shuffled.rows.begin() + 100, shuffled.rows.end(), rng);
  const auto b = rms_errors(shuffled, 1.0);
  EXPECT_NEAR(a.pre_ep, b.pre_ep, 1e-14);
  EXPECT_NEAR(*a.post_ep, *b.post_ep, 1e-14);
}

TEST(ImpedanceResidual, SmallAndSecondOrder) {
  const auto g = reference_gains<N>();
  const auto coarse = impedance_residual(identity_trace(1e-3, false), g);
  const auto fine = impedance_residual(identity_trace(5e-4, false), g);
  EXPECT_LT(coarse.max, 1e-3);
  EXPECT_NEAR(coarse.max / fine.max, 4.0, 0.4);
}

TEST(ImpedanceResidual, FrozenGammaBreaksIdentity) {
  const auto g = reference_gains<N>();
  EXPECT_GT(impedance_residual(identity_trace(1e-3, true), g).max, 0.1);
}

TEST(ImpedanceResidual, ShortTraceThrows) {
  EXPECT_THROW(impedance_residual(flat_trace(2, 0.1, VecD<N>::Zero()), reference_gains<N>()), InputError);
}

TEST(Oracle, BoundsFollowTheirDefinitions) {
  const PlantParameters<N> p;
  const auto g = reference_gains<N>();
  const auto sc_ref = [] {
    ReferenceTrajectory<N> r;
    r.channels[0] = QuinticTrajectory({0.0, 2.0}, {0.0, 1.0});
    return r;
  }();
  const auto b = estimate_oracle_bounds(p, g, sc_ref, 2.0, static_cast<const PlantParameters<N>*>(nullptr), 300);
  ASSERT_TRUE(b.valid);
  EXPECT_GT(b.m_lo, 0.0);
  EXPECT_GT(b.m_hi, b.m_lo);
  EXPECT_GT(b.c_bar, 0.0);
  EXPECT_GT(b.g_bar, p.total_mass() * p.gravity - 1e-9);
  EXPECT_NEAR(b.ref_speed_max, 1.875 / 2.0, 1e-3);
  EXPECT_DOUBLE_EQ(b.h_star[0], b.g_bar + b.d_bar + b.c_bar * b.ref_speed_max * b.ref_speed_max);
  EXPECT_DOUBLE_EQ(b.h_star[1], 2.0 * b.c_bar * b.ref_speed_max);
  EXPECT_DOUBLE_EQ(b.h_star[2], b.c_bar);
  EXPECT_GT(b.h_star[3], 0.0);
  // Subtracting the exact gravity model leaves nothing.
  EXPECT_LT(estimate_oracle_bounds(p, g, sc_ref, 2.0, &p, 50).g_bar, 1e-12);
}

TEST(Lyapunov, AtEquilibriumItIsOne) {
  auto tr = flat_trace(40, 0.1, VecD<N>::Zero());
  OracleBounds o;
  o.valid = true;
  o.h_star = {0.5, 0.4, 0.3, 0.2};
  for (auto& r : tr.rows) r.h = o.h_star;
  const auto l = lyapunov_series(tr, o, reference_gains<N>());
  for (double v : l.v) EXPECT_DOUBLE_EQ(v, 1.0);
  EXPECT_FALSE(l.violation);
  EXPECT_GT(l.bound, 0.0);
}

TEST(Lyapunov, NonNegativeAndFlagsDivergence) {
  auto tr = flat_trace(40, 0.1, VecD<N>::Zero());
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (auto& r : tr.rows) {
    for (int i = 0; i < kDof<N>; ++i) r.s(i) = nd(rng);
    for (auto& h : r.h) h = std::abs(nd(rng));
  }
  OracleBounds o;
  o.valid = true;
  o.h_star = {1.0, 1.0, 1.0, 1.0};
  const auto l = lyapunov_series(tr, o, reference_gains<N>());
  for (double v : l.v) EXPECT_GE(v, 0.0);
  tr.diverged = true;
  EXPECT_TRUE(lyapunov_series(tr, o, reference_gains<N>()).violation);
  EXPECT_THROW(lyapunov_series(tr, OracleBounds{}, reference_gains<N>()), InputError);
}

TEST(Lyapunov, CountsConditionalDecrease) {
  auto tr = flat_trace(11, 0.1, VecD<N>::Zero());
  for (std::size_t k = 0; k < tr.rows.size(); ++k) tr.rows[k].s(0) = 2.0 - 0.1 * k;
  tr.rows[5].s(0) = 3.0;  // one increase into sample 5
  OracleBounds o;
  o.valid = true;
  const auto l = lyapunov_series(tr, o, reference_gains<N>(), 0.5);
  EXPECT_EQ(l.above, 10);
  EXPECT_EQ(l.decreased, 9);
}

TEST(Compare, TieAndOrder) {
  RmsRow a{"proposed", 0.2, 0.1, 1.0, 0.05, 1.0, false, 7};
  RmsRow b{"psc", 0.2, 0.1, 1.0, 0.05, 1.0, false, 7};
  RmsRow c{"csc", 0.2, 0.1, 1.0, 0.09, 1.0, false, 7};
  auto v = compare({a, b, c});
  ASSERT_EQ(v.size(), 1u);
  EXPECT_TRUE(v[0].ties[0]);
  EXPECT_FALSE(v[0].ties[1]);
  EXPECT_EQ(v[0].order.back(), "csc");
  EXPECT_NEAR(v[0].margins[1], 0.04, 1e-15);
  b.post_ep = 0.07;
  v = compare({c, b, a});
  EXPECT_EQ(v[0].text(), "proposed < psc < csc");
  EXPECT_TRUE(v[0].strictly_ordered({"proposed", "psc", "csc"}));
}

TEST(Compare, DivergedRunsRankLast) {
  RmsRow a{"proposed", 0.3, 0.1, 1.0, 0.5, 1.0, false, 1};
  RmsRow c{"csc", 0.3, 0.1, 1.0, std::nullopt, std::nullopt, true, 1};
  const auto v = compare({c, a});
  EXPECT_EQ(v[0].order, (std::vector<std::string>{"proposed", "csc"}));
  EXPECT_TRUE(std::isnan(v[0].values[1]));
}

TEST(Compare, Preconditions) {
  RmsRow a{"proposed", 0.3, 0.1, 1.0, 0.5, 1.0, false, 1};
  RmsRow b{"psc", 0.3, 0.1, 1.0, 0.5, 1.0, false, 2};
  EXPECT_THROW(compare({a, b}), InputError);
  EXPECT_THROW(compare({a}), InputError);
}

TEST(IncrementRatio, SpikeAgainstMedian) {
  auto tr = flat_trace(101, 0.01, VecD<N>::Zero());
  for (std::size_t k = 0; k < tr.rows.size(); ++k) tr.rows[k].tau(0) = 0.01 * k;
  tr.rows[50].tau(0) += 1.0;
  EXPECT_NEAR(control_increment_ratio(tr), 1.01 / 0.01, 1e-9);
  EXPECT_THROW(control_increment_ratio(flat_trace(1, 0.1, VecD<N>::Zero())), InputError);
}
