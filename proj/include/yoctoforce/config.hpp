#pragma once

// Run configuration: a flat "block.key = value" text format with strict,
// typo-rejecting parsing, canonical serialization (stable across runs, used
// for the config hash in output metadata), and builders that turn the raw
// keyed values into validated physics objects with field-named diagnostics.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "yoctoforce/constants.hpp"
#include "yoctoforce/synth.hpp"
#include "yoctoforce/types.hpp"

namespace yf {

namespace detail_config {

inline std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  const std::size_t a = s.find_first_not_of(ws);
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(ws);
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw std::invalid_argument("config key '" + key + "': cannot parse '" + v +
                                "' as a number");
  return x;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw std::invalid_argument("config key '" + key + "': cannot parse '" + v +
                                "' as an integer");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config key '" + key + "': cannot parse '" + v +
                              "' as a boolean (use true/false)");
}

inline std::vector<double> parse_list(const std::string& key,
                                      const std::string& v) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss(v);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty())
      throw std::invalid_argument("config key '" + key +
                                  "': empty entry in list '" + v + "'");
    out.push_back(parse_double(key, item));
  }
  if (out.empty())
    throw std::invalid_argument("config key '" + key + "': empty list");
  return out;
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? "," : "") + fmt(v[i]);
  return s;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

} // namespace detail_config

// All tunable inputs with their defaults: a 110 kHz / 3 kHz collective mode
// of 1200 Rb-87 atoms at nu = 1.2 read out by an 11%-efficient heterodyne
// chain, probed in 1 ms windows, driven through a weakly modulated static
// force, with a three-line anharmonic ladder split by the trap recoil.
struct RunConfig {
  // oscillator.*
  double oscillator_omega_m_hz = 110e3;
  double oscillator_gamma_hz = 3e3;
  double oscillator_nu = 1.2;
  double oscillator_n_atoms = 1200.0;
  double oscillator_m_atom_kg = m_rb87;
  // measurement.*
  double measurement_epsilon_det = 0.11;
  bool measurement_heterodyne = true;
  double measurement_cooperativity = 2.0;
  double measurement_kappa_hz = 1.82e6;
  double measurement_p_lo_w = 1e-3;
  double measurement_probe_wavelength_m = 780e-9;
  double measurement_tau_s = 1e-3;
  // drive.*
  double drive_f_static_per_atom_n = 6.2e-21;
  double drive_mod_index = 2.5e-3;
  double drive_offset_hz = 0.0;
  double drive_phase_rad = 0.0;
  // ladder.*  (splitting <= 0 means "auto": the trap-recoil splitting)
  long long ladder_n_peaks = 3;
  double ladder_splitting_hz = 0.0;
  std::vector<double> ladder_level_fractions = {0.97, 0.02, 0.01};
  std::vector<double> ladder_coupling_scale = {1.0, 1.0, 1.0};
  double ladder_trap_wavelength_m = 850e-9;
  // grid.*
  double grid_half_span_hz = 20e3;
  // sweep.*
  long long sweep_points = 16;
  double sweep_c_min = 0.1;
  double sweep_c_max = 20.0;
  // phase.*
  std::vector<double> phase_c_points = {0.2, 1.9, 14.0};
  double phase_confidence = 0.5;
  // synthesis.*
  long long synthesis_n_reps = 150;
  std::uint64_t synthesis_seed = 20260817ull;
  // output.*
  std::string output_dir = "out";

  bool seed_explicit = false;  // true if the parsed text set synthesis.seed

  void set(const std::string& key, const std::string& value) {
    using namespace detail_config;
    if (key == "oscillator.omega_m_hz") oscillator_omega_m_hz = parse_double(key, value);
    else if (key == "oscillator.gamma_hz") oscillator_gamma_hz = parse_double(key, value);
    else if (key == "oscillator.nu") oscillator_nu = parse_double(key, value);
    else if (key == "oscillator.n_atoms") oscillator_n_atoms = parse_double(key, value);
    else if (key == "oscillator.m_atom_kg") oscillator_m_atom_kg = parse_double(key, value);
    else if (key == "measurement.epsilon_det") measurement_epsilon_det = parse_double(key, value);
    else if (key == "measurement.heterodyne") measurement_heterodyne = parse_bool(key, value);
    else if (key == "measurement.cooperativity") measurement_cooperativity = parse_double(key, value);
    else if (key == "measurement.kappa_hz") measurement_kappa_hz = parse_double(key, value);
    else if (key == "measurement.p_lo_w") measurement_p_lo_w = parse_double(key, value);
    else if (key == "measurement.probe_wavelength_m") measurement_probe_wavelength_m = parse_double(key, value);
    else if (key == "measurement.tau_s") measurement_tau_s = parse_double(key, value);
    else if (key == "drive.f_static_per_atom_n") drive_f_static_per_atom_n = parse_double(key, value);
    else if (key == "drive.mod_index") drive_mod_index = parse_double(key, value);
    else if (key == "drive.offset_hz") drive_offset_hz = parse_double(key, value);
    else if (key == "drive.phase_rad") drive_phase_rad = parse_double(key, value);
    else if (key == "ladder.n_peaks") ladder_n_peaks = parse_int(key, value);
    else if (key == "ladder.splitting_hz") ladder_splitting_hz = (value == "auto") ? 0.0 : parse_double(key, value);
    else if (key == "ladder.level_fractions") ladder_level_fractions = parse_list(key, value);
    else if (key == "ladder.coupling_scale") ladder_coupling_scale = parse_list(key, value);
    else if (key == "ladder.trap_wavelength_m") ladder_trap_wavelength_m = parse_double(key, value);
    else if (key == "grid.half_span_hz") grid_half_span_hz = parse_double(key, value);
    else if (key == "sweep.points") sweep_points = parse_int(key, value);
    else if (key == "sweep.c_min") sweep_c_min = parse_double(key, value);
    else if (key == "sweep.c_max") sweep_c_max = parse_double(key, value);
    else if (key == "phase.c_points") phase_c_points = parse_list(key, value);
    else if (key == "phase.confidence") phase_confidence = parse_double(key, value);
    else if (key == "synthesis.n_reps") synthesis_n_reps = parse_int(key, value);
    else if (key == "synthesis.seed") {
      const long long s = parse_int(key, value);
      if (s < 0)
        throw std::invalid_argument("config key 'synthesis.seed': must be >= 0");
      synthesis_seed = static_cast<std::uint64_t>(s);
      seed_explicit = true;
    } else if (key == "output.dir") {
      if (value.empty())
        throw std::invalid_argument("config key 'output.dir': must not be empty");
      output_dir = value;
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }

  static RunConfig parse_text(const std::string& text) {
    using namespace detail_config;
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": expected 'key = value', got '" + line + "'");
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
      throw std::runtime_error("cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
  }

  // Canonical text form: every key, fixed order, 12 significant digits.
  // Stable input for the config hash and round-trippable through parse_text.
  std::string to_text() const {
    using namespace detail_config;
    std::string s;
    auto kv = [&](const std::string& k, const std::string& v) {
      s += k + " = " + v + "\n";
    };
    kv("drive.f_static_per_atom_n", fmt(drive_f_static_per_atom_n));
    kv("drive.mod_index", fmt(drive_mod_index));
    kv("drive.offset_hz", fmt(drive_offset_hz));
    kv("drive.phase_rad", fmt(drive_phase_rad));
    kv("grid.half_span_hz", fmt(grid_half_span_hz));
    kv("ladder.coupling_scale", fmt_list(ladder_coupling_scale));
    kv("ladder.level_fractions", fmt_list(ladder_level_fractions));
    kv("ladder.n_peaks", std::to_string(ladder_n_peaks));
    kv("ladder.splitting_hz",
       ladder_splitting_hz <= 0.0 ? "auto" : fmt(ladder_splitting_hz));
    kv("ladder.trap_wavelength_m", fmt(ladder_trap_wavelength_m));
    kv("measurement.cooperativity", fmt(measurement_cooperativity));
    kv("measurement.epsilon_det", fmt(measurement_epsilon_det));
    kv("measurement.heterodyne", measurement_heterodyne ? "true" : "false");
    kv("measurement.kappa_hz", fmt(measurement_kappa_hz));
    kv("measurement.p_lo_w", fmt(measurement_p_lo_w));
    kv("measurement.probe_wavelength_m", fmt(measurement_probe_wavelength_m));
    kv("measurement.tau_s", fmt(measurement_tau_s));
    kv("oscillator.gamma_hz", fmt(oscillator_gamma_hz));
    kv("oscillator.m_atom_kg", fmt(oscillator_m_atom_kg));
    kv("oscillator.n_atoms", fmt(oscillator_n_atoms));
    kv("oscillator.nu", fmt(oscillator_nu));
    kv("oscillator.omega_m_hz", fmt(oscillator_omega_m_hz));
    kv("output.dir", output_dir);
    kv("phase.c_points", fmt_list(phase_c_points));
    kv("phase.confidence", fmt(phase_confidence));
    kv("sweep.c_max", fmt(sweep_c_max));
    kv("sweep.c_min", fmt(sweep_c_min));
    kv("sweep.points", std::to_string(sweep_points));
    kv("synthesis.n_reps", std::to_string(synthesis_n_reps));
    kv("synthesis.seed", std::to_string(synthesis_seed));
    return s;
  }

  std::string config_hash() const {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(detail_config::fnv1a(to_text())));
    return buf;
  }

  // Builders: raw keyed values -> validated physics objects. Validation
  // failures are rethrown with the offending config block named.
  MechanicalOscillator oscillator() const {
    try {
      return MechanicalOscillator::from_atoms(
          oscillator_n_atoms, oscillator_m_atom_kg,
          two_pi * oscillator_omega_m_hz, two_pi * oscillator_gamma_hz,
          oscillator_nu);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("invalid configuration [oscillator.*]: " +
                                  std::string(e.what()));
    }
  }

  MeasurementConfig measurement() const {
    try {
      return MeasurementConfig::make(
          measurement_epsilon_det, measurement_heterodyne,
          measurement_cooperativity, two_pi * measurement_kappa_hz,
          measurement_p_lo_w,
          two_pi * c_light / measurement_probe_wavelength_m, measurement_tau_s);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("invalid configuration [measurement.*]: " +
                                  std::string(e.what()));
    }
  }

  DriveConfig drive(const MechanicalOscillator& osc) const {
    try {
      return DriveConfig::make(osc.n_atoms, drive_f_static_per_atom_n,
                               drive_mod_index,
                               osc.omega_m + two_pi * drive_offset_hz,
                               drive_phase_rad);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("invalid configuration [drive.*]: " +
                                  std::string(e.what()));
    }
  }

  synth::AnharmonicLadder ladder() const {
    try {
      synth::AnharmonicLadder l;
      l.n_peaks = static_cast<int>(ladder_n_peaks);
      l.splitting = ladder_splitting_hz <= 0.0
                        ? recoil_splitting(two_pi / ladder_trap_wavelength_m,
                                           oscillator_m_atom_kg)
                        : two_pi * ladder_splitting_hz;
      if (l.n_peaks == 1) l.splitting = 0.0;
      l.level_fractions = ladder_level_fractions;
      l.coupling_scale = ladder_coupling_scale;
      l.validate();
      return l;
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("invalid configuration [ladder.*]: " +
                                  std::string(e.what()));
    }
  }

  std::vector<double> grid(const MechanicalOscillator& osc,
                           const MeasurementConfig& meas) const {
    try {
      return make_grid(osc.omega_m, two_pi * grid_half_span_hz, meas.omega_bw);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("invalid configuration [grid.*]: " +
                                  std::string(e.what()));
    }
  }

  // Sweep grid of true cooperativities, log-spaced inclusive of both ends.
  std::vector<double> sweep_grid() const {
    detail::require(sweep_points >= 2 && sweep_points <= 4096,
                    "invalid configuration [sweep.*]: sweep points must be in "
                    "[2, 4096] (got " + std::to_string(sweep_points) + ")");
    detail::require(sweep_c_min > 0.0 && sweep_c_max > sweep_c_min,
                    "invalid configuration [sweep.*]: need 0 < c_min < c_max");
    std::vector<double> c(static_cast<std::size_t>(sweep_points));
    const double la = std::log(sweep_c_min), lb = std::log(sweep_c_max);
    for (std::size_t i = 0; i < c.size(); ++i)
      c[i] = std::exp(la + (lb - la) * static_cast<double>(i) /
                               static_cast<double>(sweep_points - 1));
    return c;
  }
};

} // namespace yf
