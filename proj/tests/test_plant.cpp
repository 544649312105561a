#include "aam/plant.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace aam;

namespace {

constexpr int N = 2;

PlantParameters<N> massless_arm() {
  PlantParameters<N> p;
  for (auto& l : p.links) {
    l.mass = 1e-300;
    l.inertia = 1e-300;
    l.armature = 1.0;  // keeps M invertible without coupling
  }
  return p;
}

GeneralizedState<N> state_at(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_state<N>(rng);
}

}  // namespace

TEST(MassMatrix, SymmetricAndPositiveDefiniteOnSamples) {
  const PlantParameters<N> p;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto s = sample_state<N>(rng);
    const MatD<N> m = mass_matrix(s, p);
    EXPECT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::SelfAdjointEigenSolver<MatD<N>> es(m);
    EXPECT_GT(es.eigenvalues()(0), 0.0);
  }
}

TEST(MassMatrix, DecouplesWithoutArmMass) {
  PlantParameters<N> p;
  for (auto& l : p.links) {
    l.mass = 0.0;
    l.inertia = 0.0;
    l.armature = 0.0;
  }
  const auto m = mass_matrix(state_at(4), p);
  EXPECT_TRUE((m.topLeftCorner<3, 3>().isApprox(p.base_mass * Mat3::Identity(), 1e-15)));
  EXPECT_LT((m.block<6, N>(0, 6).cwiseAbs().maxCoeff()), 1e-15);
}

TEST(MassMatrix, KineticEnergyMatchesPointMassSum) {
  // Translational kinetic energy of every point from finite-difference world velocities.
  PlantParameters<N> p;
  p.base_inertia.setConstant(1e-300);
  for (auto& l : p.links) {
    l.inertia = 0.0;
    l.armature = 0.0;
  }
  p.payload_mass = 0.07;
  const auto s = state_at(9);
  const double h = 1e-6;
  auto world = [&](const GeneralizedState<N>& st) {
    std::vector<Vec3> out;
    const Mat3 r = rotation_matrix(st.q());
    for (const auto& [m, b] : mass_points(st, p)) out.push_back(st.p() + r * b);
    return out;
  };
  auto plus = s, minus = s;
  plus.pos += h * s.vel;
  minus.pos -= h * s.vel;
  const auto wp = world(plus), wm = world(minus);
  const auto pts = mass_points(s, p);
  double t = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) t += 0.5 * pts[i].first * ((wp[i] - wm[i]) / (2 * h)).squaredNorm();
  EXPECT_NEAR(kinetic_energy(s, p), t, 1e-7 * std::max(1.0, t));
}

TEST(Coriolis, ZeroVelocityGivesZero) {
  auto s = state_at(5);
  s.vel.setZero();
  EXPECT_EQ(coriolis_matrix(s, PlantParameters<N>{}).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Coriolis, MdotMinusTwoCIsSkew) {
  const PlantParameters<N> p;
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 200; ++i) {
    const auto s = sample_state<N>(rng);
    const double h = 1e-6;
    auto plus = s, minus = s;
    plus.pos += h * s.vel;
    minus.pos -= h * s.vel;
    const MatD<N> mdot = (mass_matrix(plus, p) - mass_matrix(minus, p)) / (2 * h);
    VecD<N> x;
    for (int k = 0; k < kDof<N>; ++k) x(k) = nd(rng);
    x.normalize();
    EXPECT_LT(std::abs(x.dot((mdot - 2.0 * coriolis_matrix(s, p)) * x)), 1e-5);
  }
}

TEST(Coriolis, LinearInVelocity) {
  const PlantParameters<N> p;
  auto s = state_at(7);
  const MatD<N> c1 = coriolis_matrix(s, p);
  s.vel *= 2.0;
  EXPECT_TRUE(coriolis_matrix(s, p).isApprox(2.0 * c1, 1e-12));
}

TEST(Gravity, ZeroWhenGravityOff) {
  PlantParameters<N> p;
  p.gravity = 0.0;
  EXPECT_TRUE(gravity_vector(state_at(8), p).isZero(0.0));
}

TEST(Gravity, IsGradientOfPotential) {
  PlantParameters<N> p;
  p.payload_mass = 0.2;
  const auto s = state_at(10);
  const VecD<N> g = gravity_vector(s, p);
  for (int k = 0; k < kDof<N>; ++k) {
    const double h = 1e-6;
    auto plus = s, minus = s;
    plus.pos(k) += h;
    minus.pos(k) -= h;
    const double fd = (potential_energy(plus, p) - potential_energy(minus, p)) / (2 * h);
    EXPECT_NEAR(g(k), fd, 1e-6) << "coordinate " << k;
  }
}

TEST(Gravity, VerticalEntryIsTotalWeight) {
  PlantParameters<N> p;
  p.payload_mass = 0.3;
  EXPECT_NEAR(gravity_vector(state_at(11), p)(2), p.total_mass() * p.gravity, 1e-12);
  EXPECT_EQ(gravity_vector(state_at(11), p).head<2>().norm(), 0.0);
}

TEST(Gravity, HangingArmHasNoJointTorque) {
  GeneralizedState<N> s;
  s.pos(5) = 0.8;  // yaw does not matter
  const VecD<N> g = gravity_vector(s, PlantParameters<N>{});
  EXPECT_LT(g.tail<N>().cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Jacobian, ColumnNormsAtFullExtension) {
  const GeneralizedState<N> s;
  const auto j = manipulator_jacobian(s, PlantParameters<N>{});
  EXPECT_NEAR(j.col(0).norm(), 0.4, 1e-15);
  EXPECT_NEAR(j.col(1).norm(), 0.2, 1e-15);
}

TEST(Jacobian, MatchesFiniteDifferenceEndEffectorVelocity) {
  const PlantParameters<N> p;
  auto s = state_at(12);
  s.vel.head<6>().setZero();
  const double h = 1e-6;
  auto plus = s, minus = s;
  plus.pos += h * s.vel;
  minus.pos -= h * s.vel;
  const Vec3 fd = (end_effector_position(plus, p) - end_effector_position(minus, p)) / (2 * h);
  EXPECT_LT((manipulator_jacobian(s, p) * s.vel.tail<N>() - fd).norm(), 1e-6);
}

TEST(Jacobian, ZeroLinkLengthsGiveZero) {
  PlantParameters<N> p;
  for (auto& l : p.links) l.length = 0.0;
  for (auto& l : p.links) l.com_offset = 0.0;
  EXPECT_TRUE(manipulator_jacobian(state_at(13), p).isZero(0.0));
}

TEST(Jacobian, ExternalForceLeavesVehicleEntriesZero) {
  const auto j = manipulator_jacobian(state_at(14), PlantParameters<N>{});
  const VecD<N> tau = joint_space_force<N>(j, Vec3(1.0, -2.0, 3.0));
  EXPECT_EQ(tau.head<6>().cwiseAbs().maxCoeff(), 0.0);
}

TEST(ForwardDynamics, GravityCompensationHolds) {
  const PlantParameters<N> p;
  auto s = state_at(15);
  s.vel.setZero();
  const VecD<N> acc = forward_dynamics(s, gravity_vector(s, p), Vec3::Zero(), 0.0, p);
  EXPECT_LT(acc.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ForwardDynamics, FreeFallWithMasslessArm) {
  const auto p = massless_arm();
  auto s = state_at(16);
  s.vel.setZero();
  const VecD<N> acc = forward_dynamics(s, VecD<N>::Zero(), Vec3::Zero(), 0.0, p);
  EXPECT_NEAR(acc(2), -9.81, 1e-9);
}

TEST(ForwardDynamics, ZeroGravityEnergyIsConserved) {
  PlantParameters<N> p;
  p.gravity = 0.0;
  auto s = state_at(17);
  const double e0 = kinetic_energy(s, p);
  const double h = 1e-4;
  for (int k = 0; k < 100000; ++k) s = plant_step(s, VecD<N>::Zero(), Vec3::Zero(), k * h, h, p);
  EXPECT_LT(std::abs(kinetic_energy(s, p) - e0) / e0, 1e-6);
}

TEST(ForwardDynamics, TotalEnergyIsConservedWithGravity) {
  const PlantParameters<N> p;
  auto s = state_at(18);
  auto energy = [&](const GeneralizedState<N>& st) { return kinetic_energy(st, p) + potential_energy(st, p); };
  const double e0 = energy(s);
  const double h = 1e-4;
  for (int k = 0; k < 10000; ++k) s = plant_step(s, VecD<N>::Zero(), Vec3::Zero(), k * h, h, p);
  EXPECT_LT(std::abs(energy(s) - e0), 1e-8 * std::max(1.0, std::abs(e0)));
}

TEST(PlantParameters, RejectsBadValues) {
  PlantParameters<N> p;
  p.links[0].mass = -1.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = PlantParameters<N>{};
  p.links[1].armature = -0.1;
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_NO_THROW(PlantParameters<N>{}.validate());
}

TEST(MassBounds, EigenvalueBoundsBracketSamples) {
  const PlantParameters<N> p;
  const auto [lo, hi] = mass_eigen_bounds(p, 500);
  EXPECT_GT(lo, 0.0);
  std::mt19937_64 rng(99);
  for (int i = 0; i < 50; ++i) {
    const Eigen::SelfAdjointEigenSolver<MatD<N>> es(mass_matrix(sample_state<N>(rng), p));
    EXPECT_GT(es.eigenvalues()(0), 0.5 * lo);
    EXPECT_LT(es.eigenvalues()(kDof<N> - 1), 2.0 * hi);
  }
}

TEST(PlantOtherSizes, OneAndThreeLinksAreConsistent) {
  std::mt19937_64 rng(20);
  const auto s1 = sample_state<1>(rng);
  const MatD<1> m1 = mass_matrix(s1, PlantParameters<1>{});
  EXPECT_LT((m1 - m1.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  const auto s3 = sample_state<3>(rng);
  const MatD<3> m3 = mass_matrix(s3, PlantParameters<3>{});
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<MatD<3>>(m3).eigenvalues()(0), 0.0);
}
