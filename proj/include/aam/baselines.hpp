#pragma once

// Comparison controllers. Both are minimal archetypes of the two families of
// aerial-manipulator impedance control, not reproductions of specific works.
//
// Complete-system compliance (CSC): computed-torque impedance on the full
// nominal model. Exact when the model is, blind to the payload.
//
// Partitioned-system compliance (PSC): independent PD loops on the vehicle
// with a low-pass payload-mass estimate from the force sensor, and an
// impedance law on the arm joints only. Coupling is ignored.

#include "aam/adaptive.hpp"
#include "aam/impedance.hpp"
#include "aam/plant.hpp"

#include <algorithm>

namespace aam {

template <int N>
struct CscConfig {
  PlantParameters<N> nominal{};
  VecD<N> md = reference_gains<N>().md;
  VecD<N> kd = reference_gains<N>().kd;
  VecD<N> kp = reference_gains<N>().kp;
  Vec3 f_desired = Vec3::Zero();

  void validate() const {
    nominal.validate();
    if ((md.array() <= 0.0).any() || (kd.array() <= 0.0).any() || (kp.array() < 0.0).any()) {
      throw ConfigError("CSC impedance gains must be positive");
    }
  }
};

/// tau = M^ a + C^ chi_d + g^ - tau_ext, a = chi_dd_d - Md^-1 (Kd e_d + Kp e - e_tau).
template <int N>
VecD<N> csc_control(const Measurement<N>& meas, const ReferenceSignal<N>& ref, const CscConfig<N>& cfg) {
  const auto& st = meas.state;
  const VecD<N> e = st.pos - ref.pos;
  const VecD<N> e_dot = st.vel - ref.vel;
  const VecD<N> e_tau = torque_deviation<N>(meas.j_alpha, meas.f_ext, cfg.f_desired);
  const VecD<N> a = ref.acc - (cfg.kd.cwiseProduct(e_dot) + cfg.kp.cwiseProduct(e) - e_tau).cwiseQuotient(cfg.md);
  return mass_matrix(st, cfg.nominal) * a + coriolis_matrix(st, cfg.nominal) * st.vel +
         gravity_vector(st, cfg.nominal) - joint_space_force<N>(meas.j_alpha, meas.f_ext);
}

template <int N>
struct PscConfig {
  PlantParameters<N> nominal{};
  // Vehicle PD gains, normalized by nominal mass / principal inertia.
  Vec3 pos_kp{144.0, 144.0, 144.0};
  Vec3 pos_kd{40.0, 40.0, 40.0};
  Vec3 att_kp{141.0, 141.0, 141.0};
  Vec3 att_kd{50.0, 50.0, 50.0};
  // Arm impedance.
  VecN<N> arm_md = VecN<N>::Constant(0.1);
  VecN<N> arm_kd = VecN<N>::Constant(0.7);
  VecN<N> arm_kp = VecN<N>::Constant(1.225);
  // Payload-mass low-pass: m <- m + filter * (m_meas - m) per control step.
  double filter = 0.02;
  Vec3 gravity_direction{0.0, 0.0, -1.0};
  Vec3 f_desired = Vec3::Zero();

  void validate() const {
    nominal.validate();
    if ((pos_kp.array() <= 0).any() || (pos_kd.array() <= 0).any() || (att_kp.array() <= 0).any() ||
        (att_kd.array() <= 0).any() || (arm_md.array() <= 0).any() || (arm_kd.array() <= 0).any() ||
        (arm_kp.array() < 0).any()) {
      throw ConfigError("PSC gains must be positive");
    }
    if (!(filter > 0.0 && filter <= 1.0)) throw ConfigError("PSC filter constant must lie in (0, 1]");
    if (!(gravity_direction.norm() > 0.0)) throw ConfigError("PSC gravity direction must be non-zero");
  }
};

struct PscEstimator {
  double payload_mass = 0.0;
};

template <int N>
struct PscOutput {
  VecD<N> tau;
  PscEstimator next;
};

/// Quasi-static payload mass implied by a sensed force.
template <int N>
double psc_mass_measurement(const Vec3& f_ext, const PscConfig<N>& cfg) {
  if (cfg.nominal.gravity <= 0.0) return 0.0;
  return std::max(0.0, f_ext.dot(cfg.gravity_direction.normalized()) / cfg.nominal.gravity);
}

template <int N>
PscOutput<N> psc_control(const Measurement<N>& meas, const ReferenceSignal<N>& ref, const PscConfig<N>& cfg,
                         const PscEstimator& est) {
  const auto& st = meas.state;
  const VecD<N> e = st.pos - ref.pos;
  const VecD<N> e_dot = st.vel - ref.vel;

  PscOutput<N> out;
  out.next.payload_mass =
      est.payload_mass + cfg.filter * (psc_mass_measurement<N>(meas.f_ext, cfg) - est.payload_mass);

  PlantParameters<N> model = cfg.nominal;
  model.payload_mass = out.next.payload_mass;
  const double mass = model.total_mass();

  out.tau.setZero();
  const Vec3 acc_p = ref.acc.template head<3>() - cfg.pos_kp.cwiseProduct(e.template head<3>()) -
                     cfg.pos_kd.cwiseProduct(e_dot.template head<3>());
  out.tau.template head<3>() = mass * (acc_p + Vec3(0.0, 0.0, model.gravity));
  const Vec3 acc_q = ref.acc.template segment<3>(3) - cfg.att_kp.cwiseProduct(e.template segment<3>(3)) -
                     cfg.att_kd.cwiseProduct(e_dot.template segment<3>(3));
  out.tau.template segment<3>(3) = model.base_inertia.cwiseProduct(acc_q);

  const VecN<N> e_tau = (meas.j_alpha.transpose() * (meas.f_ext - cfg.f_desired));
  const VecN<N> acc_a =
      ref.acc.template tail<N>() - (cfg.arm_kd.cwiseProduct(e_dot.template tail<N>()) +
                                    cfg.arm_kp.cwiseProduct(e.template tail<N>()) - e_tau)
                                       .cwiseQuotient(cfg.arm_md);
  const MatD<N> m = mass_matrix(st, model);
  out.tau.template tail<N>() =
      m.template bottomRightCorner<N, N>() * acc_a + gravity_vector(st, model).template tail<N>();
  return out;
}

}  // namespace aam
