#pragma once

// Files written by a run: trace CSV, JSON sidecar, report tables and
// two-column series. Every file is written to a temporary name and renamed.

#include "aam/config.hpp"
#include "aam/metrics.hpp"
#include "aam/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef AAM_VERSION
#define AAM_VERSION "unknown"
#endif

namespace aam {

inline constexpr const char* kVersion = AAM_VERSION;

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw InputError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Column names of the trace CSV, in order.
template <int N>
std::vector<std::string> trace_columns() {
  constexpr int D = kDof<N>;
  std::vector<std::string> cols{"t"};
  auto block = [&](const std::string& prefix, const std::string& suffix) {
    for (int i = 0; i < D; ++i) cols.push_back(prefix + channel_name<N>(i) + suffix);
  };
  block("", "");
  block("", "_dot");
  block("", "_ddot");
  block("", "_ref");
  block("", "_ref_dot");
  block("", "_ref_ddot");
  block("e_", "");
  block("e_", "_dot");
  block("s_", "");
  block("gamma_", "");
  for (int i = 0; i < 4; ++i) cols.push_back("H" + std::to_string(i));
  cols.insert(cols.end(), {"zeta", "rho"});
  block("tau_", "");
  cols.insert(cols.end(), {"fext_x", "fext_y", "fext_z"});
  block("etau_", "");
  block("dI_", "");
  cols.insert(cols.end(), {"deficit", "work", "caught"});
  return cols;
}

/// One row per `decimate` control periods; the final row is always kept.
template <int N>
std::string trace_csv(const SimTrace<N>& trace, int decimate = 1) {
  std::string out;
  const auto cols = trace_columns<N>();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += cols[i];
  }
  out += '\n';
  auto put = [&out](double v) {
    out += ',';
    out += format_double(v);
  };
  auto put_vec = [&](const auto& v) {
    for (int i = 0; i < v.size(); ++i) put(v(i));
  };
  const std::size_t n = trace.rows.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (k % static_cast<std::size_t>(decimate) != 0 && k + 1 != n) continue;
    const auto& r = trace.rows[k];
    out += format_double(r.t);
    put_vec(r.pos);
    put_vec(r.vel);
    put_vec(r.acc);
    put_vec(r.ref_pos);
    put_vec(r.ref_vel);
    put_vec(r.ref_acc);
    put_vec(r.e());
    put_vec(r.e_dot());
    put_vec(r.s);
    put_vec(r.gamma);
    for (double h : r.h) put(h);
    put(r.zeta);
    put(r.rho);
    put_vec(r.tau);
    put_vec(r.f_ext);
    put_vec(r.e_tau);
    put_vec(r.delta_i);
    put(r.deficit);
    put(r.work);
    out += r.caught ? ",1\n" : ",0\n";
  }
  return out;
}

/// Sidecar with the full resolved config; loading it reproduces the run.
inline nlohmann::ordered_json sidecar_json(const Config& cfg, const std::string& controller,
                                           const nlohmann::ordered_json& summary) {
  nlohmann::ordered_json j;
  j["version"] = kVersion;
  j["config_hash"] = hash_hex(cfg.hash());
  j["controller"] = controller;
  nlohmann::ordered_json conf = nlohmann::ordered_json::object();
  for (const auto& [key, value] : cfg.entries()) {
    const auto dot = key.find('.');
    conf[key.substr(0, dot)][key.substr(dot + 1)] = value;
  }
  j["config"] = conf;
  j["summary"] = summary;
  return j;
}

struct LoadedConfig {
  Config config;
  std::optional<std::string> controller;  // set when loaded from a sidecar
};

inline void merge_sidecar(Config& cfg, const nlohmann::ordered_json& j) {
  if (!j.contains("config") || !j["config"].is_object()) throw ConfigError("sidecar has no config object");
  for (const auto& [section, body] : j["config"].items()) {
    if (!body.is_object()) throw ConfigError("sidecar section '" + section + "' is not an object");
    for (const auto& [key, value] : body.items()) {
      if (!value.is_string()) throw ConfigError("sidecar value " + section + "." + key + " is not a string");
      cfg.set(section + "." + key, value.get<std::string>());
    }
  }
}

/// Number of links a config file asks for, 2 when it does not say.
inline int peek_links(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (path.extension() == ".json") {
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(text);
      return std::stoi(j.at("config").at("plant").at("links").get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  std::istringstream in(text);
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(path.string() + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  const auto links = pt.get_optional<std::string>("plant.links");
  if (!links) return 2;
  return static_cast<int>(parse_double("plant.links", *links));
}

/// Defaults overlaid with an INI file or a run sidecar (.json).
template <int N>
LoadedConfig load_config(const std::optional<std::filesystem::path>& path) {
  LoadedConfig out{default_config<N>(), std::nullopt};
  if (!path) return out;
  if (path->extension() == ".json") {
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(read_file(*path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path->string() + ": " + e.what());
    }
    merge_sidecar(out.config, j);
    if (j.contains("controller") && j["controller"].is_string()) out.controller = j["controller"].get<std::string>();
  } else {
    out.config.merge_ini_file(path->string());
  }
  return out;
}

/// Table of pre/post RMS, one row per run.
inline std::string rms_table_text(const std::vector<RmsRow>& rows) {
  std::ostringstream os;
  auto cell = [&os](const std::optional<double>& v) {
    char buf[32];
    if (v) {
      std::snprintf(buf, sizeof buf, "%10.4f", *v);
    } else {
      std::snprintf(buf, sizeof buf, "%10s", "-");
    }
    os << buf;
  };
  os << "controller  payload   pre |e_p|  pre |e_q|  post |e_p| post |e_q|  status\n";
  for (const auto& r : rows) {
    char head[40];
    std::snprintf(head, sizeof head, "%-10s %7.3f ", r.controller.c_str(), r.payload);
    os << head;
    cell(r.pre_ep);
    os << ' ';
    cell(r.pre_eq);
    os << ' ';
    cell(r.post_ep);
    os << ' ';
    cell(r.post_eq);
    os << "  " << (r.diverged ? "diverged" : "ok") << '\n';
  }
  return os.str();
}

inline std::string rms_table_csv(const std::vector<RmsRow>& rows) {
  std::string out = "controller,payload,pre_ep,pre_eq_deg,post_ep,post_eq_deg,diverged,scenario_hash\n";
  for (const auto& r : rows) {
    out += r.controller + "," + format_double(r.payload) + "," + format_double(r.pre_ep) + "," +
           format_double(r.pre_eq) + "," + (r.post_ep ? format_double(*r.post_ep) : "") + "," +
           (r.post_eq ? format_double(*r.post_eq) : "") + "," + (r.diverged ? "1" : "0") + "," +
           hash_hex(r.scenario_hash) + "\n";
  }
  return out;
}

/// Controllers x payloads matrix of post-catch |e_p| RMS, pre-catch in brackets.
inline std::string sweep_matrix_text(const std::vector<RmsRow>& rows, const std::vector<double>& payloads,
                                     const std::vector<std::string>& controllers) {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-9s", "payload");
  os << buf;
  for (const auto& c : controllers) {
    std::snprintf(buf, sizeof buf, " | %-23s", (c + " pre / post").c_str());
    os << buf;
  }
  os << '\n';
  for (double p : payloads) {
    std::snprintf(buf, sizeof buf, "%-9.3f", p);
    os << buf;
    for (const auto& c : controllers) {
      const RmsRow* hit = nullptr;
      for (const auto& r : rows) {
        if (r.payload == p && r.controller == c) hit = &r;
      }
      if (!hit) {
        std::snprintf(buf, sizeof buf, " | %-23s", "n/a");
      } else if (!hit->post_ep) {
        std::snprintf(buf, sizeof buf, " | %8.4f / %-12s", hit->pre_ep, "diverged");
      } else {
        std::snprintf(buf, sizeof buf, " | %8.4f / %-8.4f%s", hit->pre_ep, *hit->post_ep,
                      hit->diverged ? " (div)" : "      ");
      }
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json verdicts_json(const std::vector<Verdict>& verdicts) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& v : verdicts) {
    nlohmann::ordered_json j;
    j["payload"] = v.payload;
    j["verdict"] = v.text();
    j["order"] = v.order;
    nlohmann::ordered_json values = nlohmann::ordered_json::array();
    for (double x : v.values) values.push_back(std::isfinite(x) ? nlohmann::ordered_json(x) : nullptr);
    j["post_ep_rms"] = values;
    nlohmann::ordered_json margins = nlohmann::ordered_json::array();
    for (double x : v.margins) margins.push_back(std::isfinite(x) ? nlohmann::ordered_json(x) : nullptr);
    j["margins"] = margins;
    j["ties"] = v.ties;
    out.push_back(j);
  }
  return out;
}

/// "t value" lines.
inline std::string series_text(const std::vector<double>& t, const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < t.size() && i < v.size(); ++i) {
    out += format_double(t[i]);
    out += ' ';
    out += format_double(v[i]);
    out += '\n';
  }
  return out;
}

}  // namespace aam
