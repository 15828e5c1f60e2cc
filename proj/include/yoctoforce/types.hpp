#pragma once

// Core value types: the mechanical oscillator, the measurement chain, the
// coherent drive, and uniform-grid spectra. All angular frequencies are rad/s
// internally; file formats convert to Hz at the boundary.

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "yoctoforce/constants.hpp"

namespace yf {

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

} // namespace detail

// A scalar estimate with a one-sigma uncertainty.
struct ValueWithError {
  double value = 0.0;
  double error = 0.0;
};

// A collective mechanical mode of n_atoms trapped atoms. The collective mass
// is exactly n_atoms * m_atom; zero-point scales follow from (mass, omega_m).
struct MechanicalOscillator {
  double mass = 0.0;     // collective mass [kg], == n_atoms * m_atom
  double omega_m = 0.0;  // mechanical resonance [rad/s]
  double gamma = 0.0;    // full damping linewidth [rad/s]
  double nu = 0.0;       // thermal phonon occupation (>= 0)
  double n_atoms = 0.0;  // atom count (>= 1)
  double m_atom = 0.0;   // single-atom mass [kg]

  static MechanicalOscillator from_atoms(double n_atoms, double m_atom,
                                         double omega_m, double gamma,
                                         double nu) {
    detail::require(n_atoms >= 1.0,
                    "oscillator n_atoms must be >= 1 (got " + detail::num(n_atoms) + ")");
    detail::require(m_atom > 0.0,
                    "oscillator m_atom must be > 0 (got " + detail::num(m_atom) + ")");
    detail::require(omega_m > 0.0,
                    "oscillator omega_m must be > 0 (got " + detail::num(omega_m) + ")");
    detail::require(gamma > 0.0,
                    "oscillator gamma must be > 0 (got " + detail::num(gamma) + ")");
    detail::require(nu >= 0.0,
                    "oscillator nu must be >= 0 (got " + detail::num(nu) + ")");
    MechanicalOscillator o;
    o.n_atoms = n_atoms;
    o.m_atom = m_atom;
    o.mass = n_atoms * m_atom;
    o.omega_m = omega_m;
    o.gamma = gamma;
    o.nu = nu;
    return o;
  }

  // Same oscillator but with the collective mass stated directly (the atom
  // mass is back-computed so mass == n_atoms * m_atom still holds exactly).
  static MechanicalOscillator from_mass(double mass, double n_atoms,
                                        double omega_m, double gamma,
                                        double nu) {
    detail::require(mass > 0.0,
                    "oscillator mass must be > 0 (got " + detail::num(mass) + ")");
    detail::require(n_atoms >= 1.0,
                    "oscillator n_atoms must be >= 1 (got " + detail::num(n_atoms) + ")");
    return from_atoms(n_atoms, mass / n_atoms, omega_m, gamma, nu);
  }

  // Zero-point momentum and position scales of the collective mode.
  double p_ho_sq() const { return mass * hbar * omega_m / 2.0; }
  double p_ho() const { return std::sqrt(p_ho_sq()); }
  double z_ho() const { return std::sqrt(hbar / (2.0 * mass * omega_m)); }

  // Non-fatal modelling caveats (the closed forms assume a high-Q mode).
  std::vector<std::string> warnings() const {
    std::vector<std::string> w;
    if (gamma >= omega_m / 10.0)
      w.push_back("oscillator gamma = " + detail::num(gamma) +
                  " rad/s is not small against omega_m/10 = " +
                  detail::num(omega_m / 10.0) +
                  " rad/s; the narrow-line spectral model degrades");
    return w;
  }
};

// Detection chain parameters. epsilon_eff is the quantum efficiency that
// enters the sensitivity formulas: for heterodyne readout half the detected
// efficiency (one of the two quadrature sidebands carries signal).
struct MeasurementConfig {
  double epsilon_det = 0.0;    // detected quantum efficiency, in (0, 1]
  bool heterodyne = true;      // heterodyne (true) vs homodyne (false) readout
  double epsilon_eff = 0.0;    // effective efficiency: det/2 if heterodyne
  double cooperativity = 0.0;  // optomechanical measurement strength C_om >= 0
  double kappa = 0.0;          // cavity linewidth parameter [rad/s]
  double s_sn = 0.0;           // shot-noise power spectral density [W^2/Hz]
  double omega_bw = 0.0;       // analysis bin spacing 2*pi/tau [rad/s]
  double tau = 0.0;            // measurement duration per repetition [s]
  double p_lo = 0.0;           // local-oscillator power [W]
  double omega_0 = 0.0;        // probe optical angular frequency [rad/s]

  static MeasurementConfig make(double epsilon_det, bool heterodyne,
                                double cooperativity, double kappa,
                                double p_lo, double omega_0, double tau) {
    detail::require(epsilon_det > 0.0 && epsilon_det <= 1.0,
                    "measurement epsilon_det must be in (0, 1] (got " +
                        detail::num(epsilon_det) + ")");
    detail::require(cooperativity >= 0.0,
                    "measurement cooperativity must be >= 0 (got " +
                        detail::num(cooperativity) + ")");
    detail::require(kappa > 0.0,
                    "measurement kappa must be > 0 (got " + detail::num(kappa) + ")");
    detail::require(p_lo > 0.0,
                    "measurement p_lo must be > 0 (got " + detail::num(p_lo) + ")");
    detail::require(omega_0 > 0.0,
                    "measurement omega_0 must be > 0 (got " + detail::num(omega_0) + ")");
    detail::require(tau > 0.0,
                    "measurement tau must be > 0 (got " + detail::num(tau) + ")");
    MeasurementConfig m;
    m.epsilon_det = epsilon_det;
    m.heterodyne = heterodyne;
    m.epsilon_eff = heterodyne ? epsilon_det / 2.0 : epsilon_det;
    m.cooperativity = cooperativity;
    m.kappa = kappa;
    m.p_lo = p_lo;
    m.omega_0 = omega_0;
    m.tau = tau;
    m.s_sn = p_lo * hbar * omega_0;  // shot-noise PSD of the detected power
    m.omega_bw = two_pi / tau;
    return m;
  }

  MeasurementConfig with_cooperativity(double c) const {
    detail::require(c >= 0.0,
                    "measurement cooperativity must be >= 0 (got " + detail::num(c) + ")");
    MeasurementConfig m = *this;
    m.cooperativity = c;
    return m;
  }
};

// A sinusoidal force drive applied in common mode to all atoms. The total
// amplitude is n_atoms * f_static_per_atom * mod_index: a static per-atom
// force whose projection is modulated at omega_d with a small index.
struct DriveConfig {
  double f_static_per_atom = 0.0;  // static force per atom [N]
  double mod_index = 0.0;          // dimensionless modulation index (>= 0)
  double omega_d = 0.0;            // drive angular frequency [rad/s]
  double f0 = 0.0;                 // total drive amplitude [N]
  double phase = 0.0;              // drive phase origin [rad]

  static DriveConfig make(double n_atoms, double f_static_per_atom,
                          double mod_index, double omega_d, double phase = 0.0) {
    detail::require(n_atoms >= 1.0,
                    "drive n_atoms must be >= 1 (got " + detail::num(n_atoms) + ")");
    detail::require(f_static_per_atom >= 0.0,
                    "drive f_static_per_atom must be >= 0 (got " +
                        detail::num(f_static_per_atom) + ")");
    detail::require(mod_index >= 0.0,
                    "drive mod_index must be >= 0 (got " + detail::num(mod_index) + ")");
    detail::require(omega_d > 0.0,
                    "drive omega_d must be > 0 (got " + detail::num(omega_d) + ")");
    DriveConfig d;
    d.f_static_per_atom = f_static_per_atom;
    d.mod_index = mod_index;
    d.omega_d = omega_d;
    d.f0 = n_atoms * f_static_per_atom * mod_index;
    d.phase = phase;
    return d;
  }
};

namespace detail {

// Validate that freqs is a strictly increasing uniform grid; returns spacing.
inline double check_uniform_grid(const std::vector<double>& freqs) {
  require(freqs.size() >= 2, "spectrum grid needs at least 2 bins (got " +
                                 std::to_string(freqs.size()) + ")");
  const double df = freqs[1] - freqs[0];
  require(df > 0.0, "spectrum grid must be strictly increasing");
  for (std::size_t i = 1; i < freqs.size(); ++i) {
    const double step = freqs[i] - freqs[i - 1];
    require(std::abs(step - df) <= 1e-9 * df,
            "spectrum grid must be uniform (bin " + std::to_string(i) +
                " spacing deviates)");
  }
  return df;
}

// Index of the grid bin nearest to omega; throws if omega falls outside the
// grid by more than half a bin.
inline std::size_t nearest_bin(const std::vector<double>& freqs, double omega) {
  const double df = check_uniform_grid(freqs);
  const double x = (omega - freqs.front()) / df;
  const long long i = std::llround(x);
  require(i >= 0 && i < static_cast<long long>(freqs.size()) &&
              std::abs(omega - freqs[static_cast<std::size_t>(i)]) <= 0.5 * df * (1.0 + 1e-9),
          "frequency " + num(omega) + " rad/s has no bin on the grid");
  return static_cast<std::size_t>(i);
}

} // namespace detail

// A complex-valued spectrum (demodulated quadrature pairs per bin) on a
// uniform angular-frequency grid. n_avg counts the repetitions averaged in.
struct ComplexSpectrum {
  std::vector<double> freqs;                // rad/s, uniform ascending
  std::vector<std::complex<double>> values; // units declared by the producer
  int n_avg = 1;

  double spacing() const { return detail::check_uniform_grid(freqs); }

  void validate() const {
    detail::check_uniform_grid(freqs);
    detail::require(values.size() == freqs.size(),
                    "spectrum has " + std::to_string(values.size()) +
                        " values for " + std::to_string(freqs.size()) + " bins");
    detail::require(n_avg >= 1, "spectrum n_avg must be >= 1");
    for (const auto& v : values)
      detail::require(std::isfinite(v.real()) && std::isfinite(v.imag()),
                      "spectrum contains non-finite values");
  }

  std::size_t nearest_bin(double omega) const {
    return detail::nearest_bin(freqs, omega);
  }
};

// A real, non-negative power spectral density on a uniform grid.
struct PowerSpectrum {
  std::vector<double> freqs;  // rad/s, uniform ascending
  std::vector<double> values; // PSD per bin, >= 0
  int n_avg = 1;

  double spacing() const { return detail::check_uniform_grid(freqs); }

  void validate() const {
    detail::check_uniform_grid(freqs);
    detail::require(values.size() == freqs.size(),
                    "spectrum has " + std::to_string(values.size()) +
                        " values for " + std::to_string(freqs.size()) + " bins");
    detail::require(n_avg >= 1, "spectrum n_avg must be >= 1");
    for (double v : values)
      detail::require(std::isfinite(v) && v >= 0.0,
                      "power spectrum values must be finite and >= 0");
  }

  std::size_t nearest_bin(double omega) const {
    return detail::nearest_bin(freqs, omega);
  }
};

// Symmetric uniform grid: center + k*spacing for k in [-n_half, n_half],
// covering at least +/- half_span (n_half = ceil(half_span/spacing)).
inline std::vector<double> make_grid(double center, double half_span,
                                     double spacing) {
  detail::require(spacing > 0.0, "grid spacing must be > 0");
  detail::require(half_span >= spacing,
                  "grid half_span must be >= spacing (got " +
                      detail::num(half_span) + " vs " + detail::num(spacing) + ")");
  const long long n_half =
      static_cast<long long>(std::ceil(half_span / spacing - 1e-12));
  std::vector<double> freqs;
  freqs.reserve(static_cast<std::size_t>(2 * n_half + 1));
  for (long long k = -n_half; k <= n_half; ++k)
    freqs.push_back(center + static_cast<double>(k) * spacing);
  return freqs;
}

} // namespace yf
