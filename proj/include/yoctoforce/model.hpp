#pragma once

// Closed-form sensitivity model for cavity-optomechanical force sensing:
// mechanical susceptibility, heterodyne photocurrent spectra, the
// transduction from force to detected power, and the force-sensitivity
// budget with its shot-noise / backaction trade-off.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "yoctoforce/constants.hpp"
#include "yoctoforce/types.hpp"

namespace yf {

// --- line-shape helpers ----------------------------------------------------

// Unit-height Lorentzian in detuning delta = omega - omega_k with full width
// gamma: L = (gamma/2)^2 / (delta^2 + (gamma/2)^2).
inline double line_shape(double delta, double gamma) {
  const double g = gamma / 2.0;
  return g * g / (delta * delta + g * g);
}

// Unit-peak complex line response h(delta) = (gamma/2) / (delta + i*gamma/2):
// |h| = sqrt(line_shape), arg(h) = -atan2(gamma/2, delta), continuous in
// (-pi, 0) with -90 deg exactly on resonance. The driven response of one
// mode is proportional to h up to a real amplitude and the drive phase.
inline std::complex<double> line_response(double delta, double gamma) {
  const double g = gamma / 2.0;
  return g / std::complex<double>(delta, g);
}

// Phase of the driven response relative to the drive [rad], in (-pi, 0).
inline double response_phase(double delta, double gamma) {
  return -std::atan2(gamma / 2.0, delta);
}

// --- mechanics -------------------------------------------------------------

// Mechanical susceptibility near resonance (rotating-wave form):
// chi(omega) = 1 / (2 m omega_m [-(omega - omega_m) - i gamma/2])  [m/N].
inline std::complex<double> susceptibility(const MechanicalOscillator& osc,
                                           double omega) {
  const double delta = omega - osc.omega_m;
  const std::complex<double> denom =
      2.0 * osc.mass * osc.omega_m * std::complex<double>(-delta, -osc.gamma / 2.0);
  return 1.0 / denom;
}

// --- sensitivity budget ----------------------------------------------------

// Force-noise power spectral density [N^2/Hz]:
//   S_FF(omega) = 2 gamma p_HO^2 [ ((omega-omega_m)^2 + (gamma/2)^2)
//                                   / (4 eps C (gamma/2)^2)
//                                 + (2 nu + 1) + C ]
// i.e. measurement imprecision (inversely proportional to the cooperativity
// C), thermal + zero-point force noise, and backaction (proportional to C).
inline double force_sensitivity(const MechanicalOscillator& osc,
                                const MeasurementConfig& meas, double omega) {
  const double c = meas.cooperativity;
  if (c <= 0.0)
    throw std::invalid_argument(
        "force_sensitivity: cooperativity = " + detail::num(c) +
        "; the shot-noise term is undefined without optomechanical coupling");
  const double delta = omega - osc.omega_m;
  const double g = osc.gamma / 2.0;
  const double imprecision =
      (delta * delta + g * g) / (4.0 * meas.epsilon_eff * c * g * g);
  return 2.0 * osc.gamma * osc.p_ho_sq() * (imprecision + (2.0 * osc.nu + 1.0) + c);
}

// Standard quantum limit of the budget: S_SQL = 4 gamma p_HO^2, the
// on-resonance floor at unit efficiency, zero thermal occupation, and the
// ideal cooperativity.
inline double sql_sensitivity(const MechanicalOscillator& osc) {
  return 4.0 * osc.gamma * osc.p_ho_sq();
}

// Cooperativity minimizing the on-resonance budget: C_opt = 1 / (2 sqrt(eps)).
inline double optimal_cooperativity(double epsilon_eff) {
  detail::require(epsilon_eff > 0.0 && epsilon_eff <= 1.0,
                  "optimal_cooperativity: epsilon_eff must be in (0, 1] (got " +
                      detail::num(epsilon_eff) + ")");
  return 1.0 / (2.0 * std::sqrt(epsilon_eff));
}

// On-resonance budget at the optimal cooperativity:
// S_min = 2 gamma p_HO^2 [ 1/sqrt(eps) + (2 nu + 1) ].
// nu is passed explicitly (rather than read from osc) so efficiency/thermal
// what-ifs can be evaluated against one oscillator.
inline double min_sensitivity(const MechanicalOscillator& osc,
                              double epsilon_eff, double nu) {
  detail::require(epsilon_eff > 0.0 && epsilon_eff <= 1.0,
                  "min_sensitivity: epsilon_eff must be in (0, 1] (got " +
                      detail::num(epsilon_eff) + ")");
  detail::require(nu >= 0.0, "min_sensitivity: nu must be >= 0");
  return 2.0 * osc.gamma * osc.p_ho_sq() *
         (1.0 / std::sqrt(epsilon_eff) + (2.0 * nu + 1.0));
}

// Acceleration-equivalent amplitude spectral density [g/sqrt(Hz)] for a
// force PSD acting on the collective mass.
inline double acceleration_scale(double s_ff, double mass) {
  detail::require(s_ff >= 0.0 && mass > 0.0,
                  "acceleration_scale: s_ff must be >= 0 and mass > 0");
  return std::sqrt(s_ff) / (mass * g_standard);
}

// --- detected spectra ------------------------------------------------------

// Dimensionless photon spectrum in the phase-modulation sideband inside the
// cavity, at analysis frequency omega (measured from the beat carrier):
//   n_pm(omega) = 2 C (2 nu + C + 1) L(omega - omega_m) * k^2/(k^2 + omega^2)
// where L is the unit Lorentzian of the mechanical line and the last factor
// is the cavity filter (→ 1 for omega well inside the cavity linewidth).
inline double photon_spectrum_pm(const MechanicalOscillator& osc,
                                 const MeasurementConfig& meas, double omega) {
  const double c = meas.cooperativity;
  const double k2 = meas.kappa * meas.kappa;
  return 2.0 * c * (2.0 * osc.nu + c + 1.0) *
         line_shape(omega - osc.omega_m, osc.gamma) * k2 / (k2 + omega * omega);
}

// Cavity-filter handling for the detected PSD: the resolved-sideband form
// (canonical here; assumes omega_m well inside the cavity linewidth) or the
// full form retaining the kappa^2/(kappa^2 + omega^2) rolloff.
enum class CavityFilter { resolved_sideband, full };

// Heterodyne photocurrent PSD in the phase-modulation quadrature [W^2/Hz]:
//   S_het(omega) = S_SN/2 * [ 1 + 4 eps C (2 nu + C + 1)
//                                 m^2 omega_m^2 gamma^2 |chi(omega)|^2 ]
// The bracket's second term equals 4 eps C (2 nu + C + 1) L(omega-omega_m),
// a Lorentzian peak of the mechanical line on the shot-noise floor S_SN/2.
inline double heterodyne_psd_pm(const MechanicalOscillator& osc,
                                const MeasurementConfig& meas, double omega,
                                CavityFilter filter = CavityFilter::resolved_sideband) {
  const double c = meas.cooperativity;
  double peak = 4.0 * meas.epsilon_eff * c * (2.0 * osc.nu + c + 1.0) *
                line_shape(omega - osc.omega_m, osc.gamma);
  if (filter == CavityFilter::full) {
    const double k2 = meas.kappa * meas.kappa;
    peak *= k2 / (k2 + omega * omega);
  }
  return meas.s_sn / 2.0 * (1.0 + peak);
}

// Transduction from force to detected power in the PM quadrature [W/N]:
//   T_sig(omega) = sqrt(eps S_SN C gamma / z_HO^2) * |chi(omega)|
// On resonance |chi| = 1/(m omega_m gamma), so T_sig(omega_m) =
// sqrt(eps S_SN C gamma) / (z_HO m omega_m gamma).
inline double transduction(const MechanicalOscillator& osc,
                           const MeasurementConfig& meas, double omega) {
  const double c = meas.cooperativity;
  detail::require(c >= 0.0, "transduction: cooperativity must be >= 0");
  return std::sqrt(meas.epsilon_eff * meas.s_sn * c * osc.gamma) / osc.z_ho() *
         std::abs(susceptibility(osc, omega));
}

// --- estimation bounds and inversions --------------------------------------

// Quantum Cramer-Rao-style bound on the phase-space uncertainty product for
// a measurement of duration tau:
//   <dZ1><dZ2> >= (2 / (tau gamma)) [ (2 nu + 1) + 1/sqrt(eps) ]
inline double uncertainty_bound(double nu, double epsilon_eff, double tau,
                                double gamma) {
  detail::require(nu >= 0.0, "uncertainty_bound: nu must be >= 0");
  detail::require(epsilon_eff > 0.0 && epsilon_eff <= 1.0,
                  "uncertainty_bound: epsilon_eff must be in (0, 1]");
  detail::require(tau > 0.0 && gamma > 0.0,
                  "uncertainty_bound: tau and gamma must be > 0");
  return 2.0 / (tau * gamma) * ((2.0 * nu + 1.0) + 1.0 / std::sqrt(epsilon_eff));
}

// Invert the on-resonance heterodyne peak ratio R = S_het(omega_m) / S_SN
// for the cooperativity. From the PSD model R = 1/2 + 2 eps C (2 nu + C + 1),
// the physical root is
//   C = -(nu + 1/2) + sqrt( (nu + 1/2)^2 + (2 R - 1) / (4 eps) ).
inline double cooperativity_from_peak(double peak_ratio, double nu,
                                      double epsilon_eff) {
  detail::require(nu >= 0.0, "cooperativity_from_peak: nu must be >= 0");
  detail::require(epsilon_eff > 0.0 && epsilon_eff <= 1.0,
                  "cooperativity_from_peak: epsilon_eff must be in (0, 1]");
  if (peak_ratio < 0.5)
    throw std::invalid_argument(
        "cooperativity_from_peak: peak ratio " + detail::num(peak_ratio) +
        " is below the shot-noise floor (1/2); no physical cooperativity");
  const double a = nu + 0.5;
  const double disc = a * a + (2.0 * peak_ratio - 1.0) / (4.0 * epsilon_eff);
  return -a + std::sqrt(disc);
}

// Cooperativity from the intracavity photon number n and the optomechanical
// coupling rate g_om: C = 4 n g_om^2 / (kappa gamma).
inline double cooperativity_from_photons(double n_photons, double g_om,
                                         double kappa, double gamma) {
  detail::require(n_photons >= 0.0,
                  "cooperativity_from_photons: n_photons must be >= 0");
  detail::require(kappa > 0.0 && gamma > 0.0,
                  "cooperativity_from_photons: kappa and gamma must be > 0");
  return 4.0 * n_photons * g_om * g_om / (kappa * gamma);
}

// --- microscopic couplings -------------------------------------------------

// Collective optomechanical coupling rate [rad/s] of n_atoms atoms in a
// cavity, probe detuned by delta_ca from the atomic line:
//   g_om = (g0^2 / delta_ca) k_p n_atoms z_HO
// with g0 the single-atom vacuum Rabi coupling, k_p the probe wavenumber,
// and z_HO the collective zero-point amplitude.
inline double optomech_coupling(double g0, double delta_ca, double k_p,
                                double n_atoms, double z_ho) {
  detail::require(delta_ca != 0.0,
                  "optomech_coupling: delta_ca must be nonzero (dispersive regime)");
  detail::require(k_p > 0.0 && n_atoms >= 1.0 && z_ho > 0.0,
                  "optomech_coupling: k_p, n_atoms, z_ho must be positive");
  return g0 * g0 / delta_ca * k_p * n_atoms * z_ho;
}

// Dispersive cavity resonance shift [rad/s] from n_atoms atoms:
//   delta_cavity = n_atoms g0^2 / (2 delta_ca).
inline double cavity_shift(double n_atoms, double g0, double delta_ca) {
  detail::require(delta_ca != 0.0,
                  "cavity_shift: delta_ca must be nonzero (dispersive regime)");
  detail::require(n_atoms >= 1.0, "cavity_shift: n_atoms must be >= 1");
  return n_atoms * g0 * g0 / (2.0 * delta_ca);
}

// Single-photon recoil splitting [rad/s] of the trap vibrational ladder for
// trap wavenumber k_t: omega_rec = hbar k_t^2 / (2 m_atom).
inline double recoil_splitting(double k_t, double m_atom) {
  detail::require(k_t > 0.0 && m_atom > 0.0,
                  "recoil_splitting: k_t and m_atom must be > 0");
  return hbar * k_t * k_t / (2.0 * m_atom);
}

} // namespace yf
