#pragma once

// From a converged joint fit to physics: on-resonance force sensitivity
// with propagated uncertainties, the full calibrated sensitivity spectrum,
// and zero-point-scaled phase-space ensembles with covariance ellipses.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "yoctoforce/constants.hpp"
#include "yoctoforce/fit.hpp"
#include "yoctoforce/model.hpp"
#include "yoctoforce/stats.hpp"
#include "yoctoforce/types.hpp"

namespace yf::analysis {

// One calibrated operating point: the estimated cooperativity and the
// on-resonance force sensitivity, in standard-quantum-limit units and in
// absolute units, at the fitted line parameters.
struct SensitivityPoint {
  ValueWithError cooperativity;
  ValueWithError s_ff_over_sql;
  double s_ff_abs = 0.0;  // on-resonance force PSD [N^2/Hz]
  double omega_m = 0.0;   // fitted [rad/s]
  double gamma = 0.0;     // fitted [rad/s]
};

namespace detail_analysis {

// On-resonance sensitivity in SQL units with its gradient in the five fit
// parameters that enter it, plus the fit-propagated variance (no external
// calibration terms). S = (A_NN + S_SN/2) / (A_sig^2 * 4 Gamma p_HO^2) with
// p_HO^2 evaluated from the oscillator mass at the *fitted* frequency.
struct SensitivityGradient {
  double s = 0.0;       // S_FF(omega_m) / SQL
  double s_abs = 0.0;   // S_FF(omega_m) [N^2/Hz]
  double d_ann0 = 0.0, d_re0 = 0.0, d_im0 = 0.0, d_gamma = 0.0, d_omega = 0.0;
  double var_fit = 0.0;
};

inline SensitivityGradient sensitivity_gradient(
    const fitting::JointFitResult& fit, const MechanicalOscillator& osc,
    const MeasurementConfig& meas) {
  detail::require(fit.converged,
                  "sensitivity_on_resonance: fit did not converge");
  const double re0 = fit.model.c[0].real();
  const double im0 = fit.model.c[0].imag();
  const double a2 = re0 * re0 + im0 * im0;
  detail::require(a2 > 0.0,
                  "sensitivity_on_resonance: fitted coherent amplitude is zero");
  const double gamma = fit.model.gamma;
  const double omega = fit.model.omega_m;
  const double num = fit.model.a_nn[0] + meas.s_sn / 2.0;
  detail::require(num > 0.0,
                  "sensitivity_on_resonance: on-resonance PSD is not positive");

  // Two algebraically equivalent normalizations: via the zero-point momentum
  // spread of the collective mode, and via the per-atom bookkeeping
  // 2 Gamma N m_atom hbar omega. They must agree to rounding.
  const double p_ho2 = osc.mass * hbar * omega / 2.0;
  const double form_a = num / a2 / (4.0 * gamma * p_ho2);
  const double form_b =
      num / a2 / (2.0 * gamma * osc.n_atoms * osc.m_atom * hbar * omega);
  if (std::abs(form_a - form_b) > 1e-9 * std::abs(form_a))
    throw std::logic_error(
        "sensitivity_on_resonance: normalization mismatch (" +
        detail::num(form_a) + " vs " + detail::num(form_b) + ")");

  SensitivityGradient g;
  g.s = form_a;
  g.s_abs = num / a2;
  g.d_ann0 = g.s / num;
  g.d_re0 = -2.0 * re0 * g.s / a2;
  g.d_im0 = -2.0 * im0 * g.s / a2;
  g.d_gamma = -g.s / gamma;
  g.d_omega = -g.s / omega;

  const std::array<const char*, 5> names = {"a_nn0", "re_c0", "im_c0", "gamma",
                                            "omega_m"};
  const std::array<double, 5> grad = {g.d_ann0, g.d_re0, g.d_im0, g.d_gamma,
                                      g.d_omega};
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = 0; j < names.size(); ++j)
      g.var_fit += grad[i] * grad[j] * fit.cov(names[i], names[j]);
  return g;
}

} // namespace detail_analysis

// On-resonance sensitivity from a converged fit. The fitted coherent
// amplitudes must be drive-normalized (units of W/N) so that
// (A_NN + S_SN/2)/A_sig^2 is a force PSD. The uncertainty combines the
// propagated fit covariance with a relative atom-number calibration term.
inline SensitivityPoint sensitivity_on_resonance(
    const fitting::JointFitResult& fit, const MechanicalOscillator& osc,
    const MeasurementConfig& meas, double atom_number_rel_unc = 0.10) {
  detail::require(atom_number_rel_unc >= 0.0,
                  "sensitivity_on_resonance: atom_number_rel_unc must be >= 0");
  const auto g = detail_analysis::sensitivity_gradient(fit, osc, meas);
  SensitivityPoint pt;
  pt.s_ff_over_sql.value = g.s;
  pt.s_ff_over_sql.error = std::sqrt(
      std::max(g.var_fit, 0.0) + atom_number_rel_unc * atom_number_rel_unc * g.s * g.s);
  pt.s_ff_abs = g.s_abs;
  pt.omega_m = fit.model.omega_m;
  pt.gamma = fit.model.gamma;
  pt.cooperativity =
      fitting::estimate_cooperativity(fit, osc.nu, meas.epsilon_eff, meas.s_sn);
  return pt;
}

// Calibrated force-sensitivity spectrum: the measured heterodyne PSD divided
// by the fitted squared transduction, S_FF(w) = S(w) * (dw^2 + (G/2)^2)
// / (A_sig^2 (G/2)^2) with dw = w - fitted omega_m. Output units: N^2/Hz.
inline PowerSpectrum sensitivity_spectrum(const PowerSpectrum& psd,
                                          const fitting::JointFitResult& fit) {
  psd.validate();
  detail::require(fit.converged, "sensitivity_spectrum: fit did not converge");
  const double a2 = std::norm(fit.model.c[0]);
  detail::require(a2 > 0.0,
                  "sensitivity_spectrum: fitted coherent amplitude is zero");
  const double g2 = fit.model.gamma / 2.0;
  PowerSpectrum out;
  out.freqs = psd.freqs;
  out.n_avg = psd.n_avg;
  out.values.resize(psd.values.size());
  for (std::size_t i = 0; i < psd.values.size(); ++i) {
    const double d = psd.freqs[i] - fit.model.omega_m;
    out.values[i] = psd.values[i] * (d * d + g2 * g2) / (a2 * g2 * g2);
  }
  return out;
}

// A cloud of single-shot quadrature points in zero-point units.
struct PhaseSpaceEnsemble {
  std::vector<std::array<double, 2>> points;  // (Z1, Z2) per repetition
  double mean_z1 = 0.0;
  double mean_z2 = 0.0;
};

// One phase-space point per repetition: the heterodyne bin nearest the
// fitted resonance, rotated by the negative drive phase and scaled to
// zero-point units by 1/sqrt(eps_eff S_SN C Gamma). Repetitions whose grid
// does not cover the fitted resonance are dropped.
inline PhaseSpaceEnsemble phase_space_points(
    const std::vector<ComplexSpectrum>& reps,
    const fitting::JointFitResult& fit, const MeasurementConfig& meas,
    double drive_phase) {
  detail::require(fit.converged, "phase_space_points: fit did not converge");
  detail::require(!reps.empty(), "phase_space_points: no repetitions given");
  detail::require(meas.cooperativity > 0.0,
                  "phase_space_points: cooperativity must be > 0 to scale to "
                  "zero-point units");
  const double scale = 1.0 / std::sqrt(meas.epsilon_eff * meas.s_sn *
                                       meas.cooperativity * fit.model.gamma);
  const std::complex<double> rot = std::polar(1.0, -drive_phase);
  const double w_hat = fit.model.omega_m;

  PhaseSpaceEnsemble ens;
  for (const auto& rep : reps) {
    const double df = rep.spacing();
    if (w_hat < rep.freqs.front() - 0.5 * df ||
        w_hat > rep.freqs.back() + 0.5 * df)
      continue;  // this repetition does not cover the resonance
    const std::size_t idx = rep.nearest_bin(w_hat);
    const std::complex<double> z = rep.values[idx] * rot * scale;
    ens.points.push_back({z.real(), z.imag()});
  }
  if (ens.points.empty())
    throw std::runtime_error(
        "phase_space_points: no repetition covers the fitted resonance at " +
        detail::num(w_hat / two_pi) + " Hz");
  for (const auto& p : ens.points) {
    ens.mean_z1 += p[0];
    ens.mean_z2 += p[1];
  }
  ens.mean_z1 /= static_cast<double>(ens.points.size());
  ens.mean_z2 /= static_cast<double>(ens.points.size());
  return ens;
}

// Principal-axis summary of a phase-space ensemble. dz1_rms/dz2_rms are the
// one-sigma spreads along the major/minor axes (their product is the
// uncertainty-product observable); r1/r2 are the same axes scaled to enclose
// the requested confidence mass for a Gaussian cloud.
struct CovarianceEllipse {
  double dz1_rms = 0.0;
  double dz2_rms = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double orientation = 0.0;  // major-axis angle [rad]
  double confidence = 0.0;
  bool degenerate = false;   // collinear ensemble: minor axis unresolved

  double product() const { return dz1_rms * dz2_rms; }
};

inline CovarianceEllipse covariance_ellipse(const PhaseSpaceEnsemble& ens,
                                            double confidence) {
  detail::require(ens.points.size() >= 3,
                  "covariance_ellipse: need at least 3 points (got " +
                      detail::num(static_cast<double>(ens.points.size())) + ")");
  detail::require(confidence > 0.0 && confidence < 1.0,
                  "covariance_ellipse: confidence must be in (0, 1)");
  const Covariance2 cov = covariance2(ens.points);
  const Eigen2 eig = eigen2(cov.var_x, cov.cov, cov.var_y);
  CovarianceEllipse e;
  e.confidence = confidence;
  e.orientation = eig.angle;
  e.dz1_rms = std::sqrt(std::max(eig.lambda_max, 0.0));
  e.dz2_rms = std::sqrt(std::max(eig.lambda_min, 0.0));
  const double q = chi2_quantile_2dof(confidence);
  e.r1 = e.dz1_rms * std::sqrt(q);
  e.r2 = e.dz2_rms * std::sqrt(q);
  e.degenerate =
      !(eig.lambda_max > 0.0) || eig.lambda_min <= 1e-12 * eig.lambda_max;
  return e;
}

// Deviation of the measured on-resonance sensitivity from the closed-form
// expectation evaluated at the *estimated* cooperativity, normalized by the
// full propagated uncertainty. Since both the sensitivity and the
// cooperativity estimate share fitted parameters, the variance includes
// their covariance: Var(D) = Var(S) + f'(C)^2 Var(C) - 2 f'(C) Cov(S, C).
struct TheoryPull {
  double deviation = 0.0;          // S_hat - f(C_hat), SQL units
  double sigma = 0.0;              // sqrt(Var(deviation))
  double pull = 0.0;               // deviation / sigma
  double theory_at_estimate = 0.0; // f(C_hat)
};

inline TheoryPull pull_against_theory(const fitting::JointFitResult& fit,
                                      const MechanicalOscillator& osc,
                                      const MeasurementConfig& meas,
                                      double atom_number_rel_unc = 0.10) {
  const auto g = detail_analysis::sensitivity_gradient(fit, osc, meas);
  const ValueWithError c =
      fitting::estimate_cooperativity(fit, osc.nu, meas.epsilon_eff, meas.s_sn);
  const double eps = meas.epsilon_eff;
  const double f = (1.0 / (4.0 * eps * c.value) + (2.0 * osc.nu + 1.0) + c.value) / 2.0;
  const double fprime = (1.0 - 1.0 / (4.0 * eps * c.value * c.value)) / 2.0;

  // Cov(S, C): C depends on the fit only through a_nn0.
  const double a = osc.nu + 0.5;
  const double ratio = (fit.model.a_nn[0] + meas.s_sn / 2.0) / meas.s_sn;
  const double disc = a * a + (2.0 * ratio - 1.0) / (4.0 * eps);
  const double dc_dann0 = 1.0 / (meas.s_sn * 4.0 * eps * std::sqrt(disc));
  const std::array<const char*, 5> names = {"a_nn0", "re_c0", "im_c0", "gamma",
                                            "omega_m"};
  const std::array<double, 5> grad = {g.d_ann0, g.d_re0, g.d_im0, g.d_gamma,
                                      g.d_omega};
  double cov_sc = 0.0;
  for (std::size_t i = 0; i < names.size(); ++i)
    cov_sc += grad[i] * fit.cov(names[i], "a_nn0") * dc_dann0;

  TheoryPull out;
  out.theory_at_estimate = f;
  out.deviation = g.s - f;
  const double var_s =
      std::max(g.var_fit, 0.0) +
      atom_number_rel_unc * atom_number_rel_unc * g.s * g.s;
  double var_d = var_s + fprime * fprime * c.error * c.error -
                 2.0 * fprime * cov_sc;
  var_d = std::max(var_d, 1e-30 * g.s * g.s);
  out.sigma = std::sqrt(var_d);
  out.pull = out.deviation / out.sigma;
  return out;
}

} // namespace yf::analysis
