#pragma once

// Self-validation suite: closed-form identities, estimator round trips, the
// analytic Jacobian against finite differences, deterministic reruns, and
// configuration guard rails. Each check returns pass/fail with a measured
// detail string; the CLI `validate` command prints one line per check and
// exits nonzero if any fails.

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "yoctoforce/analysis.hpp"
#include "yoctoforce/config.hpp"
#include "yoctoforce/csv.hpp"
#include "yoctoforce/fit.hpp"
#include "yoctoforce/model.hpp"
#include "yoctoforce/rng.hpp"
#include "yoctoforce/synth.hpp"

namespace yf::validate {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail_validate {

inline std::string rel_str(double worst, double tol) {
  return "max relative deviation " + detail::num(worst) + " (tolerance " +
         detail::num(tol) + ")";
}

// Noise-free synthetic data pair on the configured grid, drive-normalized.
inline void noiseless_spectra(const synth::SynthConfig& sc, ComplexSpectrum& coh,
                              PowerSpectrum& psd) {
  coh.freqs = sc.freq_grid;
  coh.n_avg = 1;
  coh.values.resize(sc.freq_grid.size());
  psd.freqs = sc.freq_grid;
  psd.n_avg = 100;
  psd.values.resize(sc.freq_grid.size());
  for (std::size_t i = 0; i < sc.freq_grid.size(); ++i) {
    const double w = sc.freq_grid[i];
    coh.values[i] = synth::coherent_mean(sc, w) / sc.drive.f0;
    psd.values[i] = synth::noise_psd_expectation(sc, w);
  }
}

} // namespace detail_validate

// S_FF(w) must equal the modeled heterodyne PSD divided by the squared
// force-to-power transduction, bin for bin.
inline Check check_closed_form_identity(const MechanicalOscillator& osc,
                                        const MeasurementConfig& meas) {
  Check c{"closed-form identity S_FF = S_het / T_sig^2", false, ""};
  double worst = 0.0;
  for (double coop : {0.3, 2.0, 10.0}) {
    const MeasurementConfig m = meas.with_cooperativity(coop);
    for (int k = -24; k <= 24; ++k) {
      const double w = osc.omega_m + k * osc.gamma / 3.0;
      const double lhs = force_sensitivity(osc, m, w);
      const double t = transduction(osc, m, w);
      const double rhs = heterodyne_psd_pm(osc, m, w) / (t * t);
      worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
    }
  }
  c.pass = worst <= 1e-10;
  c.detail = detail_validate::rel_str(worst, 1e-10);
  return c;
}

// Inverting the on-resonance peak ratio must recover the cooperativity that
// produced it, across four decades.
inline Check check_peak_ratio_roundtrip(const MechanicalOscillator& osc,
                                        const MeasurementConfig& meas) {
  Check c{"cooperativity peak-ratio roundtrip", false, ""};
  double worst = 0.0;
  for (int i = 0; i <= 60; ++i) {
    const double coop =
        std::exp(std::log(0.01) + (std::log(100.0) - std::log(0.01)) * i / 60.0);
    const MeasurementConfig m = meas.with_cooperativity(coop);
    const double ratio = heterodyne_psd_pm(osc, m, osc.omega_m) / m.s_sn;
    const double back = cooperativity_from_peak(ratio, osc.nu, m.epsilon_eff);
    worst = std::max(worst, std::abs(back - coop) / coop);
  }
  c.pass = worst <= 1e-9;
  c.detail = detail_validate::rel_str(worst, 1e-9);
  return c;
}

// The two on-resonance sensitivity normalizations (zero-point momentum of
// the collective mode vs per-atom bookkeeping) must agree, and both must
// reproduce the closed-form S_FF at resonance when fed exact amplitudes.
inline Check check_sensitivity_normalizations(const MechanicalOscillator& osc,
                                              const MeasurementConfig& meas) {
  Check c{"sensitivity normalization forms agree", false, ""};
  double worst = 0.0;
  for (double coop : {0.5, 2.0, 8.0}) {
    const MeasurementConfig m = meas.with_cooperativity(coop);
    const double a_nn = heterodyne_psd_pm(osc, m, osc.omega_m) - m.s_sn / 2.0;
    const double a_sig = transduction(osc, m, osc.omega_m);
    const double num = a_nn + m.s_sn / 2.0;
    const double form_a = num / (a_sig * a_sig) / (4.0 * osc.gamma * osc.p_ho_sq());
    const double form_b = num / (a_sig * a_sig) /
                          (2.0 * osc.gamma * osc.n_atoms * osc.m_atom * hbar *
                           osc.omega_m);
    const double closed = force_sensitivity(osc, m, osc.omega_m) / sql_sensitivity(osc);
    worst = std::max(worst, std::abs(form_a - form_b) / form_a);
    worst = std::max(worst, std::abs(form_a - closed) / closed);
  }
  c.pass = worst <= 1e-9;
  c.detail = detail_validate::rel_str(worst, 1e-9);
  return c;
}

// Fitting exact noise-free spectra must return the generating parameters to
// high precision with a negligible residual, and the analysis chain on that
// fit must reproduce the closed-form sensitivity.
inline Check check_noiseless_roundtrip(const synth::SynthConfig& sc) {
  Check c{"noiseless fit roundtrip", false, ""};
  ComplexSpectrum coh;
  PowerSpectrum psd;
  detail_validate::noiseless_spectra(sc, coh, psd);

  const auto init = fitting::initial_guess(coh, psd, sc.ladder.n_peaks,
                                           sc.ladder.splitting);
  const auto fit = fitting::fit_joint(coh, psd, init);
  if (!fit.converged) {
    c.detail = "fit did not converge";
    return c;
  }

  const double a_sig = transduction(sc.osc, sc.meas, sc.osc.omega_m);
  const double peak =
      heterodyne_psd_pm(sc.osc, sc.meas, sc.osc.omega_m) - sc.meas.s_sn / 2.0;
  double worst = 0.0;
  auto rel = [&](double got, double want, double scale) {
    worst = std::max(worst, std::abs(got - want) / scale);
  };
  rel(fit.model.omega_m, sc.osc.omega_m, sc.osc.omega_m);
  rel(fit.model.gamma, sc.osc.gamma, sc.osc.gamma);
  rel(fit.model.floor, sc.meas.s_sn / 2.0, sc.meas.s_sn / 2.0);
  for (int k = 0; k < sc.ladder.n_peaks; ++k) {
    const std::complex<double> want =
        sc.ladder.weight(k) * a_sig * std::polar(1.0, sc.drive.phase);
    rel(fit.model.c[static_cast<std::size_t>(k)].real(), want.real(), a_sig);
    rel(fit.model.c[static_cast<std::size_t>(k)].imag(), want.imag(), a_sig);
    rel(fit.model.a_nn[static_cast<std::size_t>(k)],
        sc.ladder.weight(k) * peak, peak);
  }

  double resid = 0.0;
  for (std::size_t i = 0; i < coh.freqs.size(); ++i) {
    resid = std::max(resid,
                     std::abs(fit.model.coherent_model(coh.freqs[i]) -
                              coh.values[i]) / a_sig);
    resid = std::max(resid, std::abs(fit.model.psd_model(psd.freqs[i]) -
                                     psd.values[i]) /
                                (peak + sc.meas.s_sn / 2.0));
  }

  const auto sens = analysis::sensitivity_on_resonance(fit, sc.osc, sc.meas);
  const double closed =
      force_sensitivity(sc.osc, sc.meas, sc.osc.omega_m) / sql_sensitivity(sc.osc);
  const double sens_err = std::abs(sens.s_ff_over_sql.value - closed) / closed;

  c.pass = worst <= 1e-6 && resid <= 1e-12 && sens_err <= 1e-6;
  c.detail = "parameter deviation " + detail::num(worst) +
             " (tol 1e-6), residual " + detail::num(resid) +
             " (tol 1e-12), sensitivity deviation " + detail::num(sens_err) +
             " (tol 1e-6)";
  return c;
}

// The analytic Jacobian against central finite differences at a displaced
// (non-optimal) parameter point, in scaled parameters.
inline Check check_jacobian(const synth::SynthConfig& sc) {
  using namespace fitting::detail_fit;
  Check c{"fit Jacobian vs central finite differences", false, ""};
  ComplexSpectrum coh;
  PowerSpectrum psd;
  detail_validate::noiseless_spectra(sc, coh, psd);

  fitting::JointFitModel m =
      fitting::initial_guess(coh, psd, sc.ladder.n_peaks, sc.ladder.splitting);
  // Displace away from the optimum so every derivative is exercised.
  m.omega_m += 0.2 * m.gamma;
  m.gamma *= 1.15;
  for (auto& ck : m.c) ck *= std::complex<double>(1.05, 0.08);
  for (auto& ak : m.a_nn) ak *= 1.1;
  m.floor *= 0.9;
  m.fit_splitting = sc.ladder.n_peaks > 1;

  Layout lay;
  lay.n_peaks = m.n_peaks();
  lay.fit_floor = m.fit_floor;
  lay.fit_splitting = m.fit_splitting;
  const std::size_t np = static_cast<std::size_t>(lay.n());

  Scaling sc_p;
  sc_p.omega_ref = coh.freqs[coh.freqs.size() / 2];
  sc_p.scale.assign(np, 1.0);
  sc_p.scale[0] = m.gamma;
  sc_p.scale[1] = m.gamma;
  double max_c = 0.0, max_nn = m.floor;
  for (const auto& v : m.c) max_c = std::max(max_c, std::abs(v));
  for (double v : m.a_nn) max_nn = std::max(max_nn, v);
  for (int k = 0; k < lay.n_peaks; ++k) {
    sc_p.scale[static_cast<std::size_t>(lay.i_re(k))] = max_c;
    sc_p.scale[static_cast<std::size_t>(lay.i_im(k))] = max_c;
    sc_p.scale[static_cast<std::size_t>(lay.i_nn(k))] = max_nn;
  }
  sc_p.scale[static_cast<std::size_t>(lay.i_floor())] = max_nn;
  if (lay.fit_splitting)
    sc_p.scale[static_cast<std::size_t>(lay.i_split())] = m.gamma;

  FitData d;
  d.freqs = coh.freqs;
  d.coh = coh.values;
  d.psd = psd.values;
  d.omega_ref = sc_p.omega_ref;
  d.wc.assign(coh.freqs.size(), 1.0 / max_c);
  d.wp.assign(coh.freqs.size(), 1.0 / max_nn);

  std::vector<double> p = sc_p.pack(m, lay);
  std::vector<double> r0, jac;
  fitting::JointFitModel scratch = m;
  eval_residuals(m, lay, sc_p, d, r0, &jac);

  const double h = 1e-6;
  double worst = 0.0;
  std::vector<double> rp, rm;
  for (std::size_t col = 0; col < np; ++col) {
    std::vector<double> pp = p, pm = p;
    pp[col] += h;
    pm[col] -= h;
    sc_p.unpack(pp, lay, scratch);
    eval_residuals(scratch, lay, sc_p, d, rp, nullptr);
    sc_p.unpack(pm, lay, scratch);
    eval_residuals(scratch, lay, sc_p, d, rm, nullptr);
    double colmax = 0.0;
    for (std::size_t row = 0; row < r0.size(); ++row)
      colmax = std::max(colmax, std::abs(jac[row * np + col]));
    const double scale = std::max(colmax, 1e-6);
    for (std::size_t row = 0; row < r0.size(); ++row) {
      const double fd = (rp[row] - rm[row]) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - jac[row * np + col]) / scale);
    }
  }
  c.pass = worst <= 1e-6;
  c.detail = detail_validate::rel_str(worst, 1e-6);
  return c;
}

// Two full synthesize-fit runs from the same seed must agree bit for bit,
// including the serialized table bytes.
inline Check check_deterministic_rerun(const synth::SynthConfig& sc_in) {
  Check c{"fixed-seed rerun is bit-identical", false, ""};
  synth::SynthConfig sc = sc_in;
  sc.n_reps = 8;

  auto run = [&](io::Table& table) {
    const auto reps = synth::synth_coherent(sc);
    const auto psd = synth::synth_noise_psd(sc);
    const auto avg = synth::average(reps);
    const auto norm = fitting::normalize_by_drive(avg, sc.drive.f0);
    const auto init = fitting::initial_guess(norm, psd, sc.ladder.n_peaks,
                                             sc.ladder.splitting);
    const auto fit = fitting::fit_joint(norm, psd, init);
    table.schema = "yf.validate.rerun.v1";
    table.columns = {"value"};
    for (const auto& rep : reps)
      for (const auto& v : rep.values) {
        table.rows.push_back({v.real()});
        table.rows.push_back({v.imag()});
      }
    for (double v : psd.values) table.rows.push_back({v});
    for (double v : fit.param_values) table.rows.push_back({v});
    return fit;
  };

  io::Table t1, t2;
  const auto f1 = run(t1);
  const auto f2 = run(t2);
  bool same = f1.param_values.size() == f2.param_values.size();
  for (std::size_t i = 0; same && i < f1.param_values.size(); ++i)
    same = f1.param_values[i] == f2.param_values[i];
  const std::string b1 = t1.to_csv(), b2 = t2.to_csv();
  same = same && (b1 == b2);
  c.pass = same;
  c.detail = same ? "two runs, " + std::to_string(b1.size()) +
                        " serialized bytes each, identical"
                  : "reruns differ";
  return c;
}

// The on-resonance uncertainty product bound must equal the susceptibility-
// scaled minimum sensitivity: bound = |chi(w_m)|^2 S_min / (tau z_HO^2).
inline Check check_bound_identity(const MechanicalOscillator& osc,
                                  const MeasurementConfig& meas) {
  Check c{"uncertainty bound matches scaled minimum sensitivity", false, ""};
  double worst = 0.0;
  for (double nu : {0.0, 1.2, 4.0}) {
    const double lhs = uncertainty_bound(nu, meas.epsilon_eff, meas.tau, osc.gamma);
    const double chi = std::abs(susceptibility(osc, osc.omega_m));
    const double rhs = chi * chi * min_sensitivity(osc, meas.epsilon_eff, nu) /
                       (meas.tau * osc.z_ho() * osc.z_ho());
    worst = std::max(worst, std::abs(lhs - rhs) / lhs);
  }
  c.pass = worst <= 1e-12;
  c.detail = detail_validate::rel_str(worst, 1e-12);
  return c;
}

// The sensitivity minimum over cooperativity must sit at 1/(2 sqrt(eps)).
inline Check check_optimum_location(const MechanicalOscillator& osc,
                                    const MeasurementConfig& meas) {
  (void)meas;  // the check scans its own efficiency grid
  Check c{"sensitivity minimum sits at the optimal cooperativity", false, ""};
  double worst = 0.0;
  for (double eps : {0.05, 0.056, 0.25, 1.0}) {
    const double copt = optimal_cooperativity(eps);
    // Fine log grid around the optimum; the argmin must bracket copt.
    double best_c = 0.0, best_s = 0.0;
    const int n = 4001;
    for (int i = 0; i < n; ++i) {
      const double coop = copt * std::exp(-1.0 + 2.0 * i / (n - 1.0));
      const double s = 2.0 * osc.gamma * osc.p_ho_sq() *
                       (1.0 / (4.0 * eps * coop) + (2.0 * osc.nu + 1.0) + coop);
      if (i == 0 || s < best_s) {
        best_s = s;
        best_c = coop;
      }
    }
    worst = std::max(worst, std::abs(best_c - copt) / copt);
  }
  c.pass = worst <= 1e-3;
  c.detail = detail_validate::rel_str(worst, 1e-3);
  return c;
}

// Corrupted configurations must be rejected with the offending field named.
inline Check check_config_guards(const RunConfig& cfg) {
  Check c{"invalid configurations are rejected by field name", false, ""};
  bool gamma_ok = false, eps_ok = false, key_ok = false;
  try {
    RunConfig bad = cfg;
    bad.oscillator_gamma_hz = 0.0;
    (void)bad.oscillator();
  } catch (const std::invalid_argument& e) {
    gamma_ok = std::string(e.what()).find("gamma") != std::string::npos;
  }
  try {
    RunConfig bad = cfg;
    bad.measurement_epsilon_det = 1.5;
    (void)bad.measurement();
  } catch (const std::invalid_argument& e) {
    eps_ok = std::string(e.what()).find("epsilon_det") != std::string::npos;
  }
  try {
    RunConfig::parse_text("oscillator.omega_q_hz = 1\n");
  } catch (const std::invalid_argument& e) {
    key_ok = std::string(e.what()).find("omega_q_hz") != std::string::npos;
  }
  c.pass = gamma_ok && eps_ok && key_ok;
  c.detail = std::string("gamma=0 ") + (gamma_ok ? "rejected" : "NOT rejected") +
             ", epsilon_det=1.5 " + (eps_ok ? "rejected" : "NOT rejected") +
             ", unknown key " + (key_ok ? "rejected" : "NOT rejected");
  return c;
}

inline std::vector<Check> run_all(const RunConfig& cfg) {
  const MechanicalOscillator osc = cfg.oscillator();
  const MeasurementConfig meas = cfg.measurement();

  synth::SynthConfig sc;
  sc.osc = osc;
  sc.meas = meas;
  sc.drive = cfg.drive(osc);
  sc.ladder = cfg.ladder();
  sc.freq_grid = cfg.grid(osc, meas);
  sc.n_reps = 1;
  sc.seed = cfg.synthesis_seed;

  std::vector<Check> checks;
  auto guard = [&](Check (*fn)(const MechanicalOscillator&,
                               const MeasurementConfig&),
                   const char* name) {
    try {
      checks.push_back(fn(osc, meas));
    } catch (const std::exception& e) {
      checks.push_back({name, false, std::string("exception: ") + e.what()});
    }
  };
  guard(&check_closed_form_identity, "closed-form identity S_FF = S_het / T_sig^2");
  guard(&check_peak_ratio_roundtrip, "cooperativity peak-ratio roundtrip");
  guard(&check_sensitivity_normalizations, "sensitivity normalization forms agree");
  guard(&check_bound_identity, "uncertainty bound matches scaled minimum sensitivity");
  guard(&check_optimum_location, "sensitivity minimum sits at the optimal cooperativity");

  auto guard_sc = [&](Check (*fn)(const synth::SynthConfig&), const char* name) {
    try {
      checks.push_back(fn(sc));
    } catch (const std::exception& e) {
      checks.push_back({name, false, std::string("exception: ") + e.what()});
    }
  };
  guard_sc(&check_noiseless_roundtrip, "noiseless fit roundtrip");
  guard_sc(&check_jacobian, "fit Jacobian vs central finite differences");
  guard_sc(&check_deterministic_rerun, "fixed-seed rerun is bit-identical");

  try {
    checks.push_back(check_config_guards(cfg));
  } catch (const std::exception& e) {
    checks.push_back({"invalid configurations are rejected by field name",
                      false, std::string("exception: ") + e.what()});
  }
  return checks;
}

} // namespace yf::validate
