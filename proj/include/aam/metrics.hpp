#pragma once

// Post-run analysis over a finished trace: RMS tables, the closed-loop
// impedance identity, a Lyapunov monitor and controller ranking.

#include "aam/impedance.hpp"
#include "aam/plant.hpp"
#include "aam/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace aam {

struct RmsRow {
  std::string controller;
  double payload = 0.0;
  double pre_ep = 0.0;  // m
  double pre_eq = 0.0;  // deg
  std::optional<double> post_ep;
  std::optional<double> post_eq;
  bool diverged = false;
  std::uint64_t scenario_hash = 0;
};

/// RMS of |e_p| and |e_q| (degrees) before and after t_catch. Post-catch
/// values are left empty when the run diverged before window_end.
template <int N>
RmsRow rms_errors(const SimTrace<N>& trace, double t_catch, double window_end = -1.0) {
  if (window_end < t_catch) window_end = t_catch;
  RmsRow row;
  row.controller = trace.controller;
  row.payload = trace.payload;
  row.diverged = trace.diverged;
  double pre_p = 0.0, pre_q = 0.0, post_p = 0.0, post_q = 0.0;
  long n_pre = 0, n_post = 0;
  for (const auto& r : trace.rows) {
    const VecD<N> e = r.e();
    const double ep = e.template head<3>().squaredNorm();
    const double eq = e.template segment<3>(3).squaredNorm() / (kDeg * kDeg);
    if (r.t < t_catch) {
      pre_p += ep;
      pre_q += eq;
      ++n_pre;
    } else {
      post_p += ep;
      post_q += eq;
      ++n_post;
    }
  }
  if (n_pre == 0) throw InputError("no samples before the catch time");
  row.pre_ep = std::sqrt(pre_p / n_pre);
  row.pre_eq = std::sqrt(pre_q / n_pre);
  const bool lost = trace.diverged && trace.diverged_at < window_end;
  if (!lost) {
    if (n_post == 0) throw InputError("no samples after the catch time");
    row.post_ep = std::sqrt(post_p / n_post);
    row.post_eq = std::sqrt(post_q / n_post);
  }
  return row;
}

struct ResidualSeries {
  std::vector<double> t;
  std::vector<double> residual;
  double max = 0.0;
  double mean = 0.0;
  double t_max = 0.0;
};

/// Both sides of  Delta_I = Md s' + (Kd - Md Phi) s  with s' and e_dd taken by
/// central differences, and the norm of their difference per interior sample.
template <int N>
ResidualSeries impedance_residual(const SimTrace<N>& trace, const ControllerGains<N>& g) {
  const auto& rows = trace.rows;
  if (rows.size() < 3) throw InputError("trace too short for central differences");
  ResidualSeries out;
  const VecD<N> damping = g.residual_damping();
  double sum = 0.0;
  for (std::size_t k = 1; k + 1 < rows.size(); ++k) {
    const double h2 = rows[k + 1].t - rows[k - 1].t;
    const VecD<N> ds = (rows[k + 1].s - rows[k - 1].s) / h2;
    const VecD<N> dde = (rows[k + 1].e_dot() - rows[k - 1].e_dot()) / h2;
    const auto& r = rows[k];
    const VecD<N> lhs = g.md.cwiseProduct(ds) + damping.cwiseProduct(r.s);
    const VecD<N> rhs = g.md.cwiseProduct(dde) + g.kd.cwiseProduct(r.e_dot()) + g.kp.cwiseProduct(r.e()) - r.e_tau;
    const double v = (lhs - rhs).norm();
    out.t.push_back(r.t);
    out.residual.push_back(v);
    sum += v;
    if (!(v <= out.max)) {
      out.max = v;
      out.t_max = r.t;
    }
  }
  out.mean = sum / static_cast<double>(out.residual.size());
  return out;
}

/// Plant bound constants estimated by sampling the true model. These never
/// reach a controller; they only calibrate the Lyapunov monitor.
struct OracleBounds {
  double m_lo = 0.0;
  double m_hi = 0.0;
  double c_bar = 0.0;
  double g_bar = 0.0;
  double d_bar = 0.0;
  double ref_speed_max = 0.0;  // max |chi_dot_d|
  std::array<double, 4> h_star{};
  bool valid = false;
};

/// `trim`, when given, is the gravity model the controller adds as
/// feedforward; g_bar then bounds what is left of gravity.
template <int N>
OracleBounds estimate_oracle_bounds(const PlantParameters<N>& plant, const ControllerGains<N>& g,
                                    const ReferenceTrajectory<N>& ref, double horizon,
                                    const PlantParameters<N>* trim = nullptr, int samples = 2000,
                                    unsigned seed = 11) {
  OracleBounds b;
  std::mt19937_64 rng(seed);
  b.m_lo = std::numeric_limits<double>::infinity();
  double h3 = 0.0;
  for (int i = 0; i < samples; ++i) {
    const auto s = sample_state<N>(rng);
    const MatD<N> m = mass_matrix(s, plant);
    const Eigen::SelfAdjointEigenSolver<MatD<N>> es(m, Eigen::EigenvaluesOnly);
    b.m_lo = std::min(b.m_lo, es.eigenvalues()(0));
    b.m_hi = std::max(b.m_hi, es.eigenvalues()(kDof<N> - 1));
    const MatD<N> dm = m - MatD<N>(g.md.asDiagonal());
    h3 = std::max(h3, Eigen::JacobiSVD<MatD<N>>(dm).singularValues()(0));
    const double speed = s.vel.norm();
    if (speed > 0.0) {
      const double c = Eigen::JacobiSVD<MatD<N>>(coriolis_matrix(s, plant)).singularValues()(0);
      b.c_bar = std::max(b.c_bar, c / speed);
    }
    VecD<N> grav = gravity_vector(s, plant);
    if (trim) grav -= gravity_vector(s, *trim);
    b.g_bar = std::max(b.g_bar, grav.norm());
  }
  b.d_bar = plant.disturbance.bound();
  const int steps = 2000;
  for (int k = 0; k <= steps; ++k) b.ref_speed_max = std::max(b.ref_speed_max, ref(horizon * k / steps).vel.norm());
  b.h_star = {b.g_bar + b.d_bar + b.c_bar * b.ref_speed_max * b.ref_speed_max, 2.0 * b.c_bar * b.ref_speed_max,
              b.c_bar, h3};
  b.valid = true;
  return b;
}

struct LyapunovSummary {
  std::vector<double> t;
  std::vector<double> v;
  double v0 = 0.0;
  double sup_final_quarter = 0.0;
  double sup = 0.0;
  double zeta_lo = 0.0;
  double zeta_hi = 0.0;
  // Analytic constants of the ultimate bound, from the oracle.
  double varrho = 0.0;
  double delta = 0.0;
  double kappa = 0.0;
  double bound = 0.0;  // B
  // Conditional decrease of s' Md s / 2 above the threshold.
  long above = 0;
  long decreased = 0;
  double decrease_fraction = 1.0;
  bool violation = false;
};

/// V = s'Md s/2 + sum (H_i - H*_i)^2/2 + zeta/zeta_lo along the trace.
template <int N>
LyapunovSummary lyapunov_series(const SimTrace<N>& trace, const OracleBounds& oracle, const ControllerGains<N>& g,
                                double s_threshold = -1.0) {
  if (!oracle.valid) throw InputError("Lyapunov monitor needs oracle bounds");
  if (trace.rows.empty()) throw InputError("empty trace");
  if (s_threshold < 0.0) s_threshold = 2.0 * g.boundary;
  LyapunovSummary out;
  out.zeta_lo = std::numeric_limits<double>::infinity();
  for (const auto& r : trace.rows) {
    out.zeta_lo = std::min(out.zeta_lo, r.zeta);
    out.zeta_hi = std::max(out.zeta_hi, r.zeta);
  }
  const bool zeta_ok = out.zeta_lo > 0.0 && std::isfinite(out.zeta_lo);
  auto kinetic = [&](const VecD<N>& s) { return 0.5 * s.dot(g.md.cwiseProduct(s)); };

  const double t_end = trace.rows.back().t;
  const double t_quarter = trace.rows.front().t + 0.75 * (t_end - trace.rows.front().t);
  bool finite = true;
  for (std::size_t k = 0; k < trace.rows.size(); ++k) {
    const auto& r = trace.rows[k];
    double v = kinetic(r.s);
    for (int i = 0; i < 4; ++i) v += 0.5 * (r.h[i] - oracle.h_star[i]) * (r.h[i] - oracle.h_star[i]);
    v += zeta_ok ? r.zeta / out.zeta_lo : 1.0;
    finite = finite && std::isfinite(v);
    out.t.push_back(r.t);
    out.v.push_back(v);
    out.sup = std::max(out.sup, v);
    if (r.t >= t_quarter) out.sup_final_quarter = std::max(out.sup_final_quarter, v);
    if (k + 1 < trace.rows.size() && r.s.norm() > s_threshold) {
      ++out.above;
      if (kinetic(trace.rows[k + 1].s) < kinetic(r.s)) ++out.decreased;
    }
  }
  out.v0 = out.v.front();
  if (out.above > 0) out.decrease_fraction = static_cast<double>(out.decreased) / static_cast<double>(out.above);

  double nu_min = g.nu[0];
  for (double nu : g.nu) nu_min = std::min(nu_min, nu);
  out.varrho = std::min(g.lambda.minCoeff(), 0.5 * nu_min) / std::max(g.md.maxCoeff(), 0.5);
  double leak = 0.0;
  for (int i = 0; i < 4; ++i) leak += 0.5 * g.nu[i] * oracle.h_star[i] * oracle.h_star[i];
  const double zr = zeta_ok ? out.zeta_hi / out.zeta_lo : 1.0;
  out.delta = out.varrho * zr + leak + (zeta_ok ? g.epsilon / out.zeta_lo : 0.0);
  out.kappa = 0.5 * out.varrho;
  out.bound = out.delta / (out.varrho - out.kappa);
  out.violation = trace.diverged || !finite || !zeta_ok || out.sup_final_quarter > std::max(out.v0, out.bound);
  return out;
}

struct Verdict {
  double payload = 0.0;
  std::vector<std::string> order;  // best first
  std::vector<double> values;      // post-catch |e_p| RMS, NaN when diverged
  std::vector<double> margins;     // values[i + 1] - values[i]
  std::vector<bool> ties;          // order[i] ties order[i + 1]

  /// "a < b = c" style text.
  std::string text() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < order.size(); ++i) {
      os << order[i];
      if (i < ties.size()) os << (ties[i] ? " = " : " < ");
    }
    return os.str();
  }

  /// True when `names` appear in this order, each strictly better than the next.
  bool strictly_ordered(const std::vector<std::string>& names) const {
    std::vector<std::size_t> idx;
    for (const auto& n : names) {
      const auto it = std::find(order.begin(), order.end(), n);
      if (it == order.end()) return false;
      idx.push_back(static_cast<std::size_t>(it - order.begin()));
    }
    for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
      if (idx[i] >= idx[i + 1]) return false;
      for (std::size_t j = idx[i]; j < idx[i + 1]; ++j) {
        if (ties[j]) return false;
      }
    }
    return true;
  }
};

/// Per-payload ranking by post-catch |e_p| RMS. Runs without a post-catch
/// value (diverged) rank last.
inline std::vector<Verdict> compare(const std::vector<RmsRow>& rows, double tie_tol = 1e-12) {
  std::map<double, std::vector<const RmsRow*>> by_payload;
  for (const auto& r : rows) by_payload[r.payload].push_back(&r);
  std::vector<Verdict> out;
  for (auto& [payload, group] : by_payload) {
    if (group.size() < 2) throw InputError("comparison needs at least two controllers per payload");
    for (const auto* r : group) {
      if (r->scenario_hash != group.front()->scenario_hash) {
        throw InputError("runs compared across different scenarios");
      }
    }
    auto key = [](const RmsRow* r) {
      return r->post_ep && !r->diverged ? *r->post_ep : std::numeric_limits<double>::infinity();
    };
    std::stable_sort(group.begin(), group.end(),
                     [&](const RmsRow* a, const RmsRow* b) { return key(a) < key(b); });
    Verdict v;
    v.payload = payload;
    for (std::size_t i = 0; i < group.size(); ++i) {
      const double k = key(group[i]);
      v.order.push_back(group[i]->controller);
      v.values.push_back(std::isfinite(k) ? k : std::numeric_limits<double>::quiet_NaN());
      if (i + 1 < group.size()) {
        const double k2 = key(group[i + 1]);
        const bool both_lost = !std::isfinite(k) && !std::isfinite(k2);
        v.ties.push_back(both_lost || std::abs(k2 - k) <= tie_tol * std::max(1.0, std::abs(k)));
        v.margins.push_back(std::isfinite(k) && std::isfinite(k2) ? k2 - k
                                                                  : std::numeric_limits<double>::quiet_NaN());
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

/// Largest over median per-step change of the applied torque.
template <int N>
double control_increment_ratio(const SimTrace<N>& trace, double t0 = -1.0, double t1 = 1e300) {
  std::vector<double> inc;
  for (std::size_t k = 1; k < trace.rows.size(); ++k) {
    if (trace.rows[k].t < t0 || trace.rows[k].t > t1) continue;
    inc.push_back((trace.rows[k].tau - trace.rows[k - 1].tau).norm());
  }
  if (inc.empty()) throw InputError("no torque increments in range");
  const double mx = *std::max_element(inc.begin(), inc.end());
  auto mid = inc.begin() + static_cast<long>(inc.size() / 2);
  std::nth_element(inc.begin(), mid, inc.end());
  const double median = *mid;
  return median > 0.0 ? mx / median : std::numeric_limits<double>::infinity();
}

}  // namespace aam
