#pragma once

// Run configuration as a flat, ordered table of `section.key = value`
// strings. Defaults come from the C++ structs; a file or overrides may only
// replace keys that already exist. Values print with 17 significant digits so
// a serialized config reproduces the run exactly.

#include "aam/adaptive.hpp"
#include "aam/baselines.hpp"
#include "aam/impedance.hpp"
#include "aam/plant.hpp"
#include "aam/scenario.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace aam {

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

inline double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + text + "' is not a number");
  }
  if (used != t.size()) throw ConfigError(key + ": '" + text + "' is not a number");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(key + ": '" + text + "' is not a boolean");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split(text, ',')) out.push_back(parse_double(key, item));
  return out;
}

inline std::string format_list(const double* v, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += ", ";
    out += format_double(v[i]);
  }
  return out;
}

template <typename Derived>
std::string format_vec(const Eigen::MatrixBase<Derived>& v) {
  const Eigen::Matrix<double, Eigen::Dynamic, 1> d = v;
  return format_list(d.data(), static_cast<int>(d.size()));
}

class Config {
 public:
  bool has(const std::string& key) const { return index_.count(key) != 0; }

  const std::string& get(const std::string& key) const {
    const auto it = index_.find(key);
    if (it == index_.end()) throw ConfigError("unknown config key '" + key + "'");
    return entries_[it->second].second;
  }

  /// Replaces an existing key.
  void set(const std::string& key, const std::string& value) {
    const auto it = index_.find(key);
    if (it == index_.end()) throw ConfigError("unknown config key '" + key + "'");
    entries_[it->second].second = trim(value);
  }

  /// Adds a key; used while building defaults.
  void add(const std::string& key, const std::string& value) {
    if (has(key)) throw ConfigError("duplicate config key '" + key + "'");
    if (key.find('.') == std::string::npos) throw ConfigError("config key '" + key + "' has no section");
    index_[key] = entries_.size();
    entries_.emplace_back(key, value);
  }

  /// `section.key=value`
  void apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
  }

  /// Overlays an INI document; every key must already exist.
  void merge_ini(std::istream& in, const std::string& source = "config") {
    boost::property_tree::ptree pt;
    try {
      boost::property_tree::read_ini(in, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    for (const auto& [section, body] : pt) {
      if (body.empty() && !body.data().empty()) throw ConfigError(source + ": key '" + section + "' outside a section");
      for (const auto& [key, value] : body) set(section + "." + key, value.data());
    }
  }

  void merge_ini_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    merge_ini(in, path);
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  /// Canonical INI text; sections in first-seen order.
  std::string text() const {
    std::ostringstream os;
    std::string current;
    for (const auto& [key, value] : entries_) {
      const auto dot = key.find('.');
      const std::string section = key.substr(0, dot);
      if (section != current) {
        if (!current.empty()) os << '\n';
        os << '[' << section << "]\n";
        current = section;
      }
      os << key.substr(dot + 1) << " = " << value << '\n';
    }
    return os.str();
  }

  /// FNV-1a over the canonical text.
  std::uint64_t hash() const { return fnv1a(text()); }

  /// Hash of the listed sections only.
  std::uint64_t hash(const std::vector<std::string>& sections) const {
    std::string buf;
    for (const auto& [key, value] : entries_) {
      const std::string section = key.substr(0, key.find('.'));
      if (std::find(sections.begin(), sections.end(), section) == sections.end()) continue;
      buf += key + '=' + value + '\n';
    }
    return fnv1a(buf);
  }

  /// Hash of what the plant and the task are, independent of the controller.
  std::uint64_t scenario_hash() const { return hash({"plant", "scenario", "trajectory", "catch", "noise"}); }

 private:
  static std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }

  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

inline std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Everything a run needs except the controller choice.
template <int N>
struct RunSetup {
  PlantParameters<N> plant{};
  ScenarioConfig<N> scenario = default_scenario<N>();
  ControllerSetup<N> controller{};
  double nominal_mass_scale = 1.0;
  double nominal_inertia_scale = 1.0;
  int output_decimate = 10;

  /// The model the baselines and the gravity trim believe in.
  PlantParameters<N> nominal_model() const {
    PlantParameters<N> m = plant;
    m.payload_mass = 0.0;
    m.disturbance = {};
    m.base_mass *= nominal_mass_scale;
    m.base_inertia *= nominal_inertia_scale;
    for (auto& l : m.links) {
      l.mass *= nominal_mass_scale;
      l.inertia *= nominal_inertia_scale;
      l.armature *= nominal_inertia_scale;
    }
    return m;
  }

  ControllerSetup<N> controller_for(ControllerKind kind) const {
    ControllerSetup<N> c = controller;
    c.kind = kind;
    c.nominal = nominal_model();
    return c;
  }
};

inline const char* kChannelNames[] = {"x", "y", "z", "roll", "pitch", "yaw"};

template <int N>
std::string channel_name(int i) {
  if (i < 6) return kChannelNames[i];
  return "alpha" + std::to_string(i - 5);
}

namespace detail {

// Attitude and joint channels are written in degrees.
inline bool angular_channel(int i) { return i >= 3; }

inline std::string format_knots(const std::vector<std::pair<double, double>>& knots, double scale) {
  std::string out;
  for (std::size_t k = 0; k < knots.size(); ++k) {
    if (k) out += ", ";
    out += format_double(knots[k].first) + ":" + format_double(knots[k].second / scale);
  }
  return out;
}

inline std::vector<std::pair<double, double>> parse_knots(const std::string& key, const std::string& text,
                                                          double scale) {
  std::vector<std::pair<double, double>> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split(text, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) throw ConfigError(key + ": waypoint '" + item + "' is not time:value");
    out.emplace_back(parse_double(key, parts[0]), parse_double(key, parts[1]) * scale);
  }
  return out;
}

inline std::string mode_name(ActuationMode m) { return m == ActuationMode::Ideal ? "ideal" : "underactuated"; }

inline ActuationMode parse_mode(const std::string& key, const std::string& s) {
  const std::string t = trim(s);
  if (t == "ideal") return ActuationMode::Ideal;
  if (t == "underactuated") return ActuationMode::Underactuated;
  throw ConfigError(key + ": mode must be ideal or underactuated");
}

}  // namespace detail

template <int N>
Config to_config(const RunSetup<N>& s) {
  constexpr int D = kDof<N>;
  Config c;
  const auto& p = s.plant;
  VecN<N> lm, ll, lc, li, la;
  for (int i = 0; i < N; ++i) {
    lm(i) = p.links[i].mass;
    ll(i) = p.links[i].length;
    lc(i) = p.links[i].com_offset;
    li(i) = p.links[i].inertia;
    la(i) = p.links[i].armature;
  }
  c.add("plant.links", std::to_string(N));
  c.add("plant.base_mass", format_double(p.base_mass));
  c.add("plant.base_inertia", format_vec(p.base_inertia));
  c.add("plant.mount_offset", format_vec(p.mount_offset));
  c.add("plant.gravity", format_double(p.gravity));
  c.add("plant.payload_mass", format_double(p.payload_mass));
  c.add("plant.link_mass", format_vec(lm));
  c.add("plant.link_length", format_vec(ll));
  c.add("plant.link_com", format_vec(lc));
  c.add("plant.link_inertia", format_vec(li));
  c.add("plant.joint_armature", format_vec(la));
  c.add("plant.disturbance_constant", format_vec(p.disturbance.constant));
  c.add("plant.disturbance_amplitude", format_vec(p.disturbance.amplitude));
  c.add("plant.disturbance_frequency", format_double(p.disturbance.frequency_hz));

  const auto& ctl = s.controller;
  const auto& g = ctl.gains;
  c.add("gains.md", format_vec(g.md));
  c.add("gains.kd", format_vec(g.kd));
  c.add("gains.kp", format_vec(g.kp));
  c.add("gains.phi", format_vec(g.phi));
  c.add("gains.lambda", format_vec(g.lambda));
  c.add("gains.boundary", format_double(g.boundary));
  c.add("gains.nu", format_list(g.nu.data(), 4));
  c.add("gains.epsilon", format_double(g.epsilon));
  c.add("gains.h0", format_list(ctl.initial.h.data(), 4));
  c.add("gains.zeta0", format_double(ctl.initial.zeta));
  c.add("gains.gamma0", format_vec(ctl.initial.gamma));
  c.add("gains.force_desired", format_vec(ctl.f_desired));
  c.add("gains.gravity_feedforward", ctl.gravity_feedforward ? "true" : "false");
  c.add("gains.freeze_gamma", ctl.freeze_gamma ? "true" : "false");

  const auto& sc = s.scenario;
  c.add("scenario.horizon", format_double(sc.horizon));
  c.add("scenario.plant_dt", format_double(sc.plant_dt));
  c.add("scenario.control_dt", format_double(sc.control_dt));
  c.add("scenario.start", format_vec(sc.start_position) + ", " + format_double(sc.start_yaw / kDeg));
  c.add("scenario.arm0", format_vec(VecN<N>(sc.start_arm / kDeg)));
  c.add("scenario.mode", detail::mode_name(sc.mode));
  c.add("scenario.divergence_speed", format_double(sc.divergence_speed));
  c.add("scenario.force_filter", format_double(sc.force_filter));
  c.add("scenario.accel_filter", format_double(sc.accel_filter));
  for (int i = 0; i < D; ++i) {
    c.add("trajectory." + channel_name<N>(i),
          detail::format_knots(sc.waypoints[i], detail::angular_channel(i) ? kDeg : 1.0));
  }
  c.add("catch.time", format_double(sc.catch_event.time));
  c.add("catch.mass", format_double(sc.catch_event.mass));
  c.add("catch.velocity", format_vec(sc.catch_event.incoming_velocity));
  c.add("catch.window", format_double(sc.catch_event.window));
  c.add("noise.enabled", sc.noise.enabled ? "true" : "false");
  c.add("noise.seed", std::to_string(sc.noise.seed));
  c.add("noise.position", format_double(sc.noise.position));
  c.add("noise.velocity", format_double(sc.noise.velocity));
  c.add("noise.acceleration", format_double(sc.noise.acceleration));
  c.add("noise.force", format_double(sc.noise.force));

  c.add("nominal.mass_scale", format_double(s.nominal_mass_scale));
  c.add("nominal.inertia_scale", format_double(s.nominal_inertia_scale));

  const auto& psc = ctl.psc;
  c.add("psc.pos_kp", format_vec(psc.pos_kp));
  c.add("psc.pos_kd", format_vec(psc.pos_kd));
  c.add("psc.att_kp", format_vec(psc.att_kp));
  c.add("psc.att_kd", format_vec(psc.att_kd));
  c.add("psc.arm_md", format_vec(psc.arm_md));
  c.add("psc.arm_kd", format_vec(psc.arm_kd));
  c.add("psc.arm_kp", format_vec(psc.arm_kp));
  c.add("psc.filter", format_double(psc.filter));
  c.add("psc.gravity_direction", format_vec(psc.gravity_direction));

  c.add("output.decimate", std::to_string(s.output_decimate));
  return c;
}

template <int N>
Config default_config() {
  return to_config(RunSetup<N>{});
}

namespace detail {

template <int Rows>
Eigen::Matrix<double, Rows, 1> get_vec(const Config& c, const std::string& key) {
  const auto v = parse_list(key, c.get(key));
  if (static_cast<int>(v.size()) != Rows) {
    throw ConfigError(key + ": expected " + std::to_string(Rows) + " values, got " + std::to_string(v.size()));
  }
  return Eigen::Map<const Eigen::Matrix<double, Rows, 1>>(v.data());
}

inline double get_double(const Config& c, const std::string& key) { return parse_double(key, c.get(key)); }

inline long get_int(const Config& c, const std::string& key) {
  const double v = get_double(c, key);
  if (v != std::floor(v)) throw ConfigError(key + ": expected an integer");
  return static_cast<long>(v);
}

}  // namespace detail

/// Reads the link count a config asks for.
inline int config_links(const Config& c) { return static_cast<int>(detail::get_int(c, "plant.links")); }

template <int N>
RunSetup<N> from_config(const Config& c) {
  using detail::get_double;
  using detail::get_vec;
  constexpr int D = kDof<N>;
  if (config_links(c) != N) throw ConfigError("plant.links does not match the arm model");
  RunSetup<N> s;
  auto& p = s.plant;
  p.base_mass = get_double(c, "plant.base_mass");
  p.base_inertia = get_vec<3>(c, "plant.base_inertia");
  p.mount_offset = get_vec<3>(c, "plant.mount_offset");
  p.gravity = get_double(c, "plant.gravity");
  p.payload_mass = get_double(c, "plant.payload_mass");
  const VecN<N> lm = get_vec<N>(c, "plant.link_mass");
  const VecN<N> ll = get_vec<N>(c, "plant.link_length");
  const VecN<N> lc = get_vec<N>(c, "plant.link_com");
  const VecN<N> li = get_vec<N>(c, "plant.link_inertia");
  const VecN<N> la = get_vec<N>(c, "plant.joint_armature");
  for (int i = 0; i < N; ++i) p.links[i] = {lm(i), ll(i), lc(i), li(i), la(i)};
  p.disturbance.constant = get_vec<D>(c, "plant.disturbance_constant");
  p.disturbance.amplitude = get_vec<D>(c, "plant.disturbance_amplitude");
  p.disturbance.frequency_hz = get_double(c, "plant.disturbance_frequency");
  p.validate();

  auto& ctl = s.controller;
  auto& g = ctl.gains;
  g.md = get_vec<D>(c, "gains.md");
  g.kd = get_vec<D>(c, "gains.kd");
  g.kp = get_vec<D>(c, "gains.kp");
  if (trim(c.get("gains.phi")) == "auto") {
    g.phi = derive_phi<N>(g.md, g.kd, g.kp);
  } else {
    g.phi = get_vec<D>(c, "gains.phi");
  }
  g.lambda = get_vec<D>(c, "gains.lambda");
  g.boundary = get_double(c, "gains.boundary");
  const Eigen::Vector4d nu = get_vec<4>(c, "gains.nu");
  g.nu = {nu(0), nu(1), nu(2), nu(3)};
  g.epsilon = get_double(c, "gains.epsilon");
  const Eigen::Vector4d h0 = get_vec<4>(c, "gains.h0");
  ctl.initial.h = {h0(0), h0(1), h0(2), h0(3)};
  ctl.initial.zeta = get_double(c, "gains.zeta0");
  ctl.initial.gamma = get_vec<D>(c, "gains.gamma0");
  ctl.f_desired = get_vec<3>(c, "gains.force_desired");
  ctl.gravity_feedforward = parse_bool("gains.gravity_feedforward", c.get("gains.gravity_feedforward"));
  ctl.freeze_gamma = parse_bool("gains.freeze_gamma", c.get("gains.freeze_gamma"));
  for (double v : ctl.initial.h) {
    if (!(v >= 0.0)) throw ConfigError("gains.h0: initial estimates must be non-negative");
  }
  if (!(ctl.initial.zeta > 0.0)) throw ConfigError("gains.zeta0 must be positive");

  auto& sc = s.scenario;
  sc.horizon = get_double(c, "scenario.horizon");
  sc.plant_dt = get_double(c, "scenario.plant_dt");
  sc.control_dt = get_double(c, "scenario.control_dt");
  const Eigen::Vector4d start = get_vec<4>(c, "scenario.start");
  sc.start_position = start.head<3>();
  sc.start_yaw = start(3) * kDeg;
  sc.start_arm = get_vec<N>(c, "scenario.arm0") * kDeg;
  sc.mode = detail::parse_mode("scenario.mode", c.get("scenario.mode"));
  sc.divergence_speed = get_double(c, "scenario.divergence_speed");
  sc.force_filter = get_double(c, "scenario.force_filter");
  sc.accel_filter = get_double(c, "scenario.accel_filter");
  for (int i = 0; i < D; ++i) {
    const std::string key = "trajectory." + channel_name<N>(i);
    sc.waypoints[i] = detail::parse_knots(key, c.get(key), detail::angular_channel(i) ? kDeg : 1.0);
  }
  sc.catch_event.time = get_double(c, "catch.time");
  sc.catch_event.mass = get_double(c, "catch.mass");
  sc.catch_event.incoming_velocity = get_vec<3>(c, "catch.velocity");
  sc.catch_event.window = get_double(c, "catch.window");
  sc.noise.enabled = parse_bool("noise.enabled", c.get("noise.enabled"));
  const long seed = detail::get_int(c, "noise.seed");
  if (seed < 0) throw ConfigError("noise.seed must be non-negative");
  sc.noise.seed = static_cast<std::uint64_t>(seed);
  sc.noise.position = get_double(c, "noise.position");
  sc.noise.velocity = get_double(c, "noise.velocity");
  sc.noise.acceleration = get_double(c, "noise.acceleration");
  sc.noise.force = get_double(c, "noise.force");
  sc.validate();

  s.nominal_mass_scale = get_double(c, "nominal.mass_scale");
  s.nominal_inertia_scale = get_double(c, "nominal.inertia_scale");
  if (!(s.nominal_mass_scale > 0.0) || !(s.nominal_inertia_scale > 0.0)) {
    throw ConfigError("nominal scales must be positive");
  }

  auto& psc = ctl.psc;
  psc.pos_kp = get_vec<3>(c, "psc.pos_kp");
  psc.pos_kd = get_vec<3>(c, "psc.pos_kd");
  psc.att_kp = get_vec<3>(c, "psc.att_kp");
  psc.att_kd = get_vec<3>(c, "psc.att_kd");
  psc.arm_md = get_vec<N>(c, "psc.arm_md");
  psc.arm_kd = get_vec<N>(c, "psc.arm_kd");
  psc.arm_kp = get_vec<N>(c, "psc.arm_kp");
  psc.filter = get_double(c, "psc.filter");
  psc.gravity_direction = get_vec<3>(c, "psc.gravity_direction");

  s.output_decimate = static_cast<int>(detail::get_int(c, "output.decimate"));
  if (s.output_decimate < 1) throw ConfigError("output.decimate must be at least 1");
  s.controller.nominal = s.nominal_model();
  s.controller.psc.nominal = s.controller.nominal;
  s.controller.psc.validate();
  return s;
}

}  // namespace aam
