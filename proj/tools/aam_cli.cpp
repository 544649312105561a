// aam: validate a config, run one scenario, or sweep payloads.
//
// Exit codes: 0 success (a diverged run still counts), 1 bad input or usage,
// 2 gain check failure.

#include "aam/aam.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Options {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = "out";
  std::string controller;
  std::vector<std::string> overrides;
  std::vector<double> payloads{0.1, 0.2, 0.3};
  std::optional<double> dt;
  std::optional<std::string> mode;
  std::optional<long> seed;
};

std::vector<aam::ControllerKind> controllers(const std::string& name) {
  using aam::ControllerKind;
  if (name == "all") return {ControllerKind::Proposed, ControllerKind::Csc, ControllerKind::Psc};
  return {aam::parse_controller(name)};
}

template <int N>
aam::LoadedConfig resolve(const Options& o) {
  aam::LoadedConfig lc = aam::load_config<N>(o.config);
  for (const auto& ov : o.overrides) lc.config.apply_override(ov);
  if (o.dt) {
    lc.config.set("scenario.plant_dt", aam::format_double(*o.dt));
    lc.config.set("scenario.control_dt", aam::format_double(*o.dt));
  }
  if (o.mode) lc.config.set("scenario.mode", *o.mode);
  if (o.seed) {
    lc.config.set("noise.seed", std::to_string(*o.seed));
    lc.config.set("noise.enabled", "true");
  }
  return lc;
}

/// --controller, else the one recorded in a sidecar, else the adaptive one.
std::string pick_controller(const Options& o, const aam::LoadedConfig& lc) {
  if (!o.controller.empty()) return o.controller;
  if (lc.controller) return *lc.controller;
  return "proposed";
}

void print_run_line(const aam::RmsRow& r, bool diverged, double at) {
  std::printf("%-9s payload %.3f  pre |e_p| %.4f  post |e_p| ", r.controller.c_str(), r.payload, r.pre_ep);
  if (r.post_ep) {
    std::printf("%.4f", *r.post_ep);
  } else {
    std::printf("-");
  }
  if (diverged) std::printf("  diverged at %.4f s", at);
  std::printf("\n");
}

template <int N>
int cmd_validate(const Options& o) {
  const auto lc = resolve<N>(o);
  const auto setup = aam::from_config<N>(lc.config);
  aam::check_setup(setup);
  const auto report = aam::validate_gains(setup.controller.gains);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << lc.config.text();
  std::cout << "\n; config_hash = " << aam::hash_hex(lc.config.hash()) << "\n";
  std::cout << "; scenario_hash = " << aam::hash_hex(lc.config.scenario_hash()) << "\n";
  return 0;
}

template <int N>
int cmd_run(const Options& o) {
  const auto lc = resolve<N>(o);
  const auto kinds = controllers(pick_controller(o, lc));
  // Fail on bad gains before spending time on any run.
  aam::check_setup(aam::from_config<N>(lc.config));
  std::vector<aam::RmsRow> rows;
  for (auto kind : kinds) {
    const auto r = aam::execute<N>(lc.config, kind);
    aam::write_run(r, o.out / aam::controller_name(kind));
    print_run_line(r.rms, r.trace.diverged, r.trace.diverged_at);
    rows.push_back(r.rms);
  }
  aam::write_tables(rows, o.out);
  aam::write_file_atomic(o.out / "config.ini", lc.config.text());
  std::cout << "wrote " << o.out.string() << "\n";
  return 0;
}

template <int N>
int cmd_sweep(const Options& o) {
  const auto lc = resolve<N>(o);
  const auto kinds = controllers(o.controller.empty() ? "all" : o.controller);
  aam::check_setup(aam::from_config<N>(lc.config));
  std::vector<aam::RmsRow> rows;
  std::vector<std::string> names;
  for (auto kind : kinds) names.push_back(aam::controller_name(kind));
  for (double payload : o.payloads) {
    aam::Config cfg = lc.config;
    cfg.set("catch.mass", aam::format_double(payload));
    char tag[32];
    std::snprintf(tag, sizeof tag, "m%.3f", payload);
    for (auto kind : kinds) {
      const auto r = aam::execute<N>(cfg, kind);
      aam::write_run(r, o.out / tag / aam::controller_name(kind));
      print_run_line(r.rms, r.trace.diverged, r.trace.diverged_at);
      rows.push_back(r.rms);
    }
  }
  aam::write_tables(rows, o.out);
  const std::string matrix = aam::sweep_matrix_text(rows, o.payloads, names);
  aam::write_file_atomic(o.out / "sweep.txt", matrix);
  std::cout << "\n" << matrix;
  if (kinds.size() >= 2) {
    for (const auto& v : aam::compare(rows)) std::printf("payload %.3f: %s\n", v.payload, v.text().c_str());
  }
  return 0;
}

template <int N>
int dispatch(const std::string& cmd, const Options& o) {
  if (cmd == "validate") return cmd_validate<N>(o);
  if (cmd == "run") return cmd_run<N>(o);
  return cmd_sweep<N>(o);
}

/// Arm size from --override, else the config file, else 2.
int arm_links(const Options& o) {
  int links = o.config ? aam::peek_links(*o.config) : 2;
  for (const auto& ov : o.overrides) {
    const auto eq = ov.find('=');
    if (eq != std::string::npos && aam::trim(ov.substr(0, eq)) == "plant.links") {
      links = static_cast<int>(aam::parse_double("plant.links", ov.substr(eq + 1)));
    }
  }
  return links;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aerial manipulator catch simulation"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "INI file or a run.json sidecar")->check(CLI::ExistingFile);
    sub->add_option("-O,--override", o.overrides, "section.key=value, repeatable");
    sub->add_option("--dt", o.dt, "plant and control step [s]")->check(CLI::PositiveNumber);
    sub->add_option("--mode", o.mode, "actuation mode")->check(CLI::IsMember({"ideal", "underactuated"}));
    sub->add_option("--seed", o.seed, "enable sensor noise with this seed")->check(CLI::NonNegativeNumber);
  };
  auto* validate = app.add_subcommand("validate", "check a config and print it in canonical form");
  common(validate);
  auto* run = app.add_subcommand("run", "simulate one scenario");
  common(run);
  run->add_option("-o,--out", o.out, "output directory");
  run->add_option("--controller", o.controller, "proposed, csc, psc or all")
      ->check(CLI::IsMember({"proposed", "csc", "psc", "all"}));
  auto* sweep = app.add_subcommand("sweep", "run every controller over a list of payload masses");
  common(sweep);
  sweep->add_option("-o,--out", o.out, "output directory");
  sweep->add_option("--controller", o.controller, "proposed, csc, psc or all (default)")
      ->check(CLI::IsMember({"proposed", "csc", "psc", "all"}));
  sweep->add_option("--payloads", o.payloads, "payload masses [kg]")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    switch (arm_links(o)) {
      case 1:
        return dispatch<1>(cmd, o);
      case 2:
        return dispatch<2>(cmd, o);
      case 3:
        return dispatch<3>(cmd, o);
      default:
        std::cerr << "error: plant.links must be 1, 2 or 3\n";
        return 1;
    }
  } catch (const aam::GainError& e) {
    std::cerr << "gain error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
