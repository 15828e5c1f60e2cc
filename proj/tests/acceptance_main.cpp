// Acceptance gate: one pass/fail line per headline requirement, nonzero
// exit if any fails. Each criterion states its pinned tolerance inline;
// statistical criteria run the full synthesize->fit->analyze pipeline at a
// fixed seed and are budgeted for wall time.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "yoctoforce/yoctoforce.hpp"

using namespace yf;

namespace {

struct Criterion {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += "FAILED: " + what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fnum(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

MechanicalOscillator reference_oscillator() {
  return MechanicalOscillator::from_atoms(1200.0, 1.44316e-25,
                                          hz_to_rad(110e3), hz_to_rad(3e3),
                                          1.2);
}

synth::SynthConfig pipeline_config(double c, int n_reps, std::uint64_t seed) {
  synth::SynthConfig sc;
  sc.osc = reference_oscillator();
  sc.meas = MeasurementConfig::make(0.112, true, c, hz_to_rad(1.82e6), 1e-3,
                                    two_pi * c_light / 780e-9, 1e-3);
  sc.ladder = synth::AnharmonicLadder::single_line();
  sc.drive = DriveConfig::make(1200.0, 6.2e-21, 2.5e-3, sc.osc.omega_m, 0.0);
  sc.freq_grid =
      make_grid(sc.osc.omega_m, hz_to_rad(20e3), sc.meas.omega_bw);
  sc.n_reps = n_reps;
  sc.seed = seed;
  sc.validate();
  return sc;
}

fitting::JointFitResult pipeline_fit(const synth::SynthConfig& sc) {
  const auto coh = fitting::normalize_by_drive(
      synth::average(synth::synth_coherent(sc)), sc.drive.f0);
  const auto psd = synth::synth_noise_psd(sc);
  return fitting::fit_joint(coh, psd,
                            fitting::initial_guess(coh, psd, 1, 0.0));
}

// 1. Absolute scale of the quantum-limited force noise floor.
Criterion criterion_sql() {
  Criterion c;
  const double sql = sql_sensitivity(reference_oscillator());
  const double ref = 4.41e-46;  // (21 yN)^2/Hz
  const double rel = sql / ref - 1.0;
  c.note("SQL = " + fnum("%.4g", sql) + " N^2/Hz = (" +
         fnum("%.1f", std::sqrt(sql) * 1e24) + " yN)^2/Hz, " +
         fnum("%+.1f", rel * 100.0) + "% from (21 yN)^2/Hz");
  c.require(std::abs(rel) <= 0.15, "more than 15% from 4.41e-46 N^2/Hz");
  return c;
}

// 2. Minimum of the corrected budget and where it sits.
Criterion criterion_minimum() {
  Criterion c;
  const auto osc = reference_oscillator();
  const double ratio = min_sensitivity(osc, 0.056, 1.2) / sql_sensitivity(osc);
  const double copt = optimal_cooperativity(0.056);
  c.note("min/SQL = " + fnum("%.4f", ratio) + " (target 3.81 +- 0.01)");
  c.note("C_opt = " + fnum("%.4f", copt) + " (target 2.11 +- 0.01)");
  c.require(std::abs(ratio - 3.81) <= 0.01, "min/SQL outside 3.81 +- 0.01");
  c.require(std::abs(copt - 2.11) <= 0.01, "C_opt outside 2.11 +- 0.01");
  return c;
}

// 3. Phase-space uncertainty product: closed form, then the Monte Carlo
// pipeline at near-optimal coupling over >= 100 repetitions.
Criterion criterion_uncertainty_product() {
  Criterion c;
  const double bound = uncertainty_bound(1.2, 0.056, 1e-3, hz_to_rad(3e3));
  c.note("bound = " + fnum("%.4f", bound) + " (target 0.81 +- 0.01)");
  c.require(std::abs(bound - 0.81) <= 0.01, "bound outside 0.81 +- 0.01");

  const int n_reps = 400;
  const auto sc =
      pipeline_config(optimal_cooperativity(0.056), n_reps, 20260817);
  const auto fit = pipeline_fit(sc);
  c.require(fit.converged, "pipeline fit did not converge");
  if (!fit.converged) return c;
  const auto c_est = fitting::estimate_cooperativity(
      fit, sc.osc.nu, sc.meas.epsilon_eff, sc.meas.s_sn);
  const auto ens = analysis::phase_space_points(
      synth::synth_coherent(sc), fit,
      sc.meas.with_cooperativity(c_est.value), sc.drive.phase);
  const auto ell = analysis::covariance_ellipse(ens, 0.5);
  // Statistical error of the rms product over n repetitions: ~sqrt(2/n).
  const double sigma_rel = std::sqrt(2.0 / static_cast<double>(n_reps));
  const double dev_rel = ell.product() / bound - 1.0;
  c.note("MC product = " + fnum("%.4f", ell.product()) + " over " +
         std::to_string(ens.points.size()) + " repetitions (" +
         fnum("%+.1f", dev_rel * 100.0) + "%, stat " +
         fnum("%.1f", sigma_rel * 100.0) + "%)");
  c.require(static_cast<int>(ens.points.size()) >= 100,
            "fewer than 100 repetitions");
  c.require(std::abs(dev_rel) <= 3.0 * sigma_rel,
            "Monte Carlo product more than 3 sigma from the bound");
  return c;
}

// 4. Acceleration sensitivity scale at the rounded text mass.
Criterion criterion_acceleration() {
  Criterion c;
  const auto osc = MechanicalOscillator::from_mass(
      1.8e-22, 1200.0, hz_to_rad(110e3), hz_to_rad(3e3), 1.2);
  const double acc =
      acceleration_scale(min_sensitivity(osc, 0.056, 1.2), osc.mass);
  c.note("sqrt(S_min)/(m g0) = " + fnum("%.5f", acc) +
         " g/sqrt(Hz) at m = 1.8e-22 kg (target 0.02-0.025)");
  c.require(acc >= 0.02 && acc <= 0.025, "outside 0.02-0.025 g/sqrt(Hz)");
  return c;
}

// 5. Default cooperativity sweep: estimated sensitivities scatter around
// the closed-form budget within their error bars and the minimum lands at
// the optimal coupling.
Criterion criterion_sweep() {
  Criterion c;
  const RunConfig cfg;  // default: 16 points x 150 repetitions
  app::RunOptions opts;
  opts.emit_files = false;
  opts.plots = false;
  opts.seed = cfg.synthesis_seed;
  const auto out = app::cmd_sweep(cfg, opts);
  c.require(out.exit_code == 0, "sweep reported failures");
  if (out.exit_code != 0) return c;
  const auto& sens = out.report.at("sensitivity");
  c.require(sens.size() == 16, "expected 16 converged points, got " +
                                   std::to_string(sens.size()));
  double pull_sum = 0.0, pull_max = 0.0;
  for (const auto& p : sens) {
    const double pull = p.at("pull").get<double>();
    pull_sum += pull;
    pull_max = std::max(pull_max, std::abs(pull));
  }
  const double pull_mean = pull_sum / std::max<std::size_t>(sens.size(), 1);
  const double c_min = out.report.at("minimum").at("c_est").get<double>();
  c.note("mean pull = " + fnum("%+.3f", pull_mean) + " (|.| < 0.5)");
  c.note("max |pull| = " + fnum("%.2f", pull_max) + " (< 4)");
  c.note("minimum at C_est = " + fnum("%.2f", c_min) + " (target 2.1 +- 0.7)");
  c.require(std::abs(pull_mean) < 0.5, "mean pull exceeds 0.5");
  c.require(pull_max < 4.0, "a point deviates beyond 4 sigma");
  c.require(std::abs(c_min - 2.1) <= 0.7,
            "sweep minimum outside C_est = 2.1 +- 0.7");
  return c;
}

// 6. Calibrated sensitivity spectra at three couplings: pointwise agreement
// with the closed form and the shot-noise/back-action ordering trade-off.
Criterion criterion_spectra() {
  Criterion c;
  const int n_reps = 400;
  const double couplings[] = {0.4, 1.9, 10.0};
  std::vector<double> on_res;
  std::vector<double> off_res_mean;
  for (double coup : couplings) {
    const auto sc = pipeline_config(coup, n_reps, 31 + static_cast<std::uint64_t>(coup * 100));
    const auto fit = pipeline_fit(sc);
    c.require(fit.converged,
              "fit did not converge at C = " + fnum("%.2g", coup));
    if (!fit.converged) return c;
    const auto psd = synth::synth_noise_psd(sc);
    const auto spec = analysis::sensitivity_spectrum(psd, fit);

    const double tol_bin = 5.0 / std::sqrt(static_cast<double>(n_reps));
    double worst = 0.0, mean_dev = 0.0;
    double off_sum = 0.0;
    int off_n = 0;
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
      const double theory =
          force_sensitivity(sc.osc, sc.meas, spec.freqs[i]);
      const double dev = spec.values[i] / theory - 1.0;
      worst = std::max(worst, std::abs(dev));
      mean_dev += dev;
      if (std::abs(spec.freqs[i] - sc.osc.omega_m) > 2.0 * sc.osc.gamma) {
        off_sum += spec.values[i] / sql_sensitivity(sc.osc);
        ++off_n;
      }
    }
    mean_dev /= static_cast<double>(spec.values.size());
    c.require(worst < tol_bin,
              "pointwise deviation " + fnum("%.2f", worst) + " at C = " +
                  fnum("%.2g", coup) + " exceeds " + fnum("%.2f", tol_bin));
    c.require(std::abs(mean_dev) < 0.05,
              "mean deviation " + fnum("%.3f", mean_dev) + " at C = " +
                  fnum("%.2g", coup) + " exceeds 0.05");
    on_res.push_back(spec.values[spec.nearest_bin(sc.osc.omega_m)] /
                     sql_sensitivity(sc.osc));
    off_res_mean.push_back(off_sum / std::max(off_n, 1));
  }
  c.note("on-resonance S/SQL = {" + fnum("%.2f", on_res[0]) + ", " +
         fnum("%.2f", on_res[1]) + ", " + fnum("%.2f", on_res[2]) +
         "} at C = {0.4, 1.9, 10}");
  c.note("beyond 2 gamma S/SQL = {" + fnum("%.1f", off_res_mean[0]) + ", " +
         fnum("%.1f", off_res_mean[1]) + ", " + fnum("%.1f", off_res_mean[2]) +
         "}");
  // Back-action dominates on resonance at strong coupling...
  c.require(on_res[2] > on_res[1],
            "on-resonance ordering S(10) > S(1.9) violated");
  // ...while shot noise dominates off resonance, reversing the order.
  c.require(off_res_mean[2] < off_res_mean[1],
            "off-resonance ordering S(10) < S(1.9) violated");
  c.require(off_res_mean[1] < off_res_mean[0],
            "off-resonance ordering S(1.9) < S(0.4) violated");
  return c;
}

// 7. The packaged self-validation suite (identities, round-trips, Jacobian,
// determinism, input guards) passes end to end.
Criterion criterion_validation() {
  Criterion c;
  RunConfig cfg;
  const auto checks = validate::run_all(cfg);
  int failed = 0;
  for (const auto& chk : checks)
    if (!chk.pass) {
      ++failed;
      c.require(false, chk.name + " (" + chk.detail + ")");
    }
  c.note(std::to_string(checks.size() - failed) + "/" +
         std::to_string(checks.size()) + " validation checks pass");
  return c;
}

} // namespace

int main() {
  struct Entry {
    const char* name;
    Criterion (*fn)();
    double budget_s;  // wall-time budget; 0 = no budget enforced
  };
  const Entry entries[] = {
      {"absolute zero-point force-noise scale", criterion_sql, 0.0},
      {"corrected minimum and optimal coupling", criterion_minimum, 0.0},
      {"phase-space uncertainty product", criterion_uncertainty_product,
       10.0},
      {"acceleration sensitivity scale", criterion_acceleration, 0.0},
      {"cooperativity sweep against the closed-form budget", criterion_sweep,
       60.0},
      {"calibrated sensitivity spectra orderings", criterion_spectra, 30.0},
      {"self-validation suite", criterion_validation, 30.0},
  };

  int failures = 0;
  int index = 0;
  for (const auto& e : entries) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Criterion c;
    try {
      c = e.fn();
    } catch (const std::exception& ex) {
      c.pass = false;
      c.detail = "exception: " + std::string(ex.what());
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (e.budget_s > 0.0 && dt > e.budget_s) {
      c.pass = false;
      c.detail += "; FAILED: exceeded " + fnum("%.0f", e.budget_s) +
                  " s budget";
    }
    if (!c.pass) ++failures;
    std::printf("[%s] criterion %d: %s — %s [%.2f s]\n",
                c.pass ? "PASS" : "FAIL", index, e.name, c.detail.c_str(),
                dt);
  }
  if (failures > 0)
    std::printf("%d of %d criteria FAILED\n", failures,
                static_cast<int>(sizeof(entries) / sizeof(entries[0])));
  else
    std::printf("all %d criteria passed\n",
                static_cast<int>(sizeof(entries) / sizeof(entries[0])));
  return failures == 0 ? 0 : 1;
}
