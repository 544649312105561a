#pragma once

// One run end to end: simulate, score, write files.

#include "aam/config.hpp"
#include "aam/io.hpp"
#include "aam/metrics.hpp"
#include "aam/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace aam {

template <int N>
struct RunResult {
  Config config;
  ControllerKind kind = ControllerKind::Proposed;
  SimTrace<N> trace;
  RmsRow rms;
  ResidualSeries residual;
  double increment_ratio = 0.0;
  std::optional<LyapunovSummary> lyapunov;  // adaptive controller only
};

/// Gains and the derived filter are checked before anything runs.
template <int N>
void check_setup(const RunSetup<N>& setup) {
  const auto report = validate_gains(setup.controller.gains);
  if (!report.pass) {
    std::string msg = "gain check failed";
    for (const auto& f : report.failures) msg += "; " + f;
    throw GainError(msg);
  }
  setup.scenario.validate();
  setup.plant.validate();
}

template <int N>
RunResult<N> execute(const Config& cfg, ControllerKind kind) {
  const RunSetup<N> setup = from_config<N>(cfg);
  check_setup(setup);
  RunResult<N> r;
  r.config = cfg;
  r.kind = kind;
  r.trace = simulate(setup.scenario, setup.plant, setup.controller_for(kind));
  const double t_catch = setup.scenario.catch_event.time;
  r.rms = rms_errors(r.trace, t_catch, setup.scenario.horizon);
  r.rms.scenario_hash = cfg.scenario_hash();
  r.residual = impedance_residual(r.trace, setup.controller.gains);
  r.increment_ratio = control_increment_ratio(r.trace);
  if (kind == ControllerKind::Proposed) {
    const PlantParameters<N> trim = setup.nominal_model();
    const OracleBounds oracle =
        estimate_oracle_bounds(setup.plant, setup.controller.gains, setup.scenario.reference(), setup.scenario.horizon,
                               setup.controller.gravity_feedforward ? &trim : nullptr);
    r.lyapunov = lyapunov_series(r.trace, oracle, setup.controller.gains);
  }
  return r;
}

inline nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json finite_json(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

template <int N>
nlohmann::ordered_json summary_json(const RunResult<N>& r) {
  const auto& tr = r.trace;
  nlohmann::ordered_json j;
  j["controller"] = tr.controller;
  j["payload"] = tr.payload;
  j["scenario_hash"] = hash_hex(r.rms.scenario_hash);
  j["steps"] = tr.rows.size();
  j["diverged"] = tr.diverged;
  j["diverged_at"] = finite_json(tr.diverged_at);
  j["caught"] = tr.caught();
  j["rms"] = {{"pre_ep", r.rms.pre_ep},
              {"pre_eq_deg", r.rms.pre_eq},
              {"post_ep", optional_json(r.rms.post_ep)},
              {"post_eq_deg", optional_json(r.rms.post_eq)}};
  j["impedance_residual_max"] = finite_json(r.residual.max);
  j["impedance_residual_t_max"] = finite_json(r.residual.t_max);
  j["increment_ratio"] = finite_json(r.increment_ratio);
  j["actuator_work"] = tr.rows.empty() ? 0.0 : tr.rows.back().work;
  if (r.lyapunov) {
    const auto& l = *r.lyapunov;
    j["lyapunov"] = {{"v0", l.v0},
                     {"sup", finite_json(l.sup)},
                     {"sup_final_quarter", finite_json(l.sup_final_quarter)},
                     {"bound", finite_json(l.bound)},
                     {"decrease_fraction", l.decrease_fraction},
                     {"violation", l.violation}};
  }
  return j;
}

/// Writes trace.csv, run.json and the series/ directory under `dir`.
template <int N>
void write_run(const RunResult<N>& r, const std::filesystem::path& dir) {
  const int decimate = static_cast<int>(detail::get_int(r.config, "output.decimate"));
  write_file_atomic(dir / "trace.csv", trace_csv(r.trace, decimate));
  const auto side = sidecar_json(r.config, controller_name(r.kind), summary_json(r));
  write_file_atomic(dir / "run.json", side.dump(2) + "\n");

  std::vector<double> t, ep, eq, sn, rho, zeta, deficit;
  const auto& rows = r.trace.rows;
  for (std::size_t k = 0; k < rows.size(); k += static_cast<std::size_t>(decimate)) {
    const auto& row = rows[k];
    const VecD<N> e = row.e();
    t.push_back(row.t);
    ep.push_back(e.template head<3>().norm());
    eq.push_back(e.template segment<3>(3).norm() / kDeg);
    sn.push_back(row.s.norm());
    rho.push_back(row.rho);
    zeta.push_back(row.zeta);
    deficit.push_back(row.deficit);
  }
  const auto series = dir / "series";
  write_file_atomic(series / "ep.txt", series_text(t, ep));
  write_file_atomic(series / "eq_deg.txt", series_text(t, eq));
  write_file_atomic(series / "s_norm.txt", series_text(t, sn));
  write_file_atomic(series / "rho.txt", series_text(t, rho));
  write_file_atomic(series / "zeta.txt", series_text(t, zeta));
  write_file_atomic(series / "deficit.txt", series_text(t, deficit));
  std::vector<double> rt, rv;
  for (std::size_t k = 0; k < r.residual.t.size(); k += static_cast<std::size_t>(decimate)) {
    rt.push_back(r.residual.t[k]);
    rv.push_back(r.residual.residual[k]);
  }
  write_file_atomic(series / "residual.txt", series_text(rt, rv));
  if (r.lyapunov) {
    std::vector<double> vt, vv;
    for (std::size_t k = 0; k < r.lyapunov->t.size(); k += static_cast<std::size_t>(decimate)) {
      vt.push_back(r.lyapunov->t[k]);
      vv.push_back(r.lyapunov->v[k]);
    }
    write_file_atomic(series / "V.txt", series_text(vt, vv));
  }
}

/// Tables shared by run and sweep: rms.txt, rms.csv and, with more than one
/// controller per payload, verdicts.json.
inline void write_tables(const std::vector<RmsRow>& rows, const std::filesystem::path& dir) {
  write_file_atomic(dir / "rms.txt", rms_table_text(rows));
  write_file_atomic(dir / "rms.csv", rms_table_csv(rows));
  std::map<double, int> per_payload;
  for (const auto& r : rows) ++per_payload[r.payload];
  bool comparable = !per_payload.empty();
  for (const auto& [p, n] : per_payload) comparable = comparable && n >= 2;
  if (comparable) write_file_atomic(dir / "verdicts.json", verdicts_json(compare(rows)).dump(2) + "\n");
}

}  // namespace aam
