// Analysis layer: on-resonance sensitivity extraction and its agreement
// with the closed-form budget, the calibrated sensitivity spectrum,
// phase-space ensembles against the uncertainty bound, covariance
// ellipses, and pulls against theory.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "yoctoforce/analysis.hpp"
#include "yoctoforce/constants.hpp"
#include "yoctoforce/fit.hpp"
#include "yoctoforce/model.hpp"
#include "yoctoforce/rng.hpp"
#include "yoctoforce/stats.hpp"
#include "yoctoforce/synth.hpp"
#include "yoctoforce/types.hpp"

using namespace yf;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

synth::SynthConfig analysis_config(double c, int n_reps, std::uint64_t seed) {
  synth::SynthConfig sc;
  sc.osc = MechanicalOscillator::from_atoms(1200.0, 1.44316e-25,
                                            hz_to_rad(110e3), hz_to_rad(3e3),
                                            1.2);
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

// Noise-free averaged records (normalized driven record + PSD expectation).
void noiseless(const synth::SynthConfig& sc, ComplexSpectrum& coh,
               PowerSpectrum& psd, int n_avg = 150) {
  coh.freqs = sc.freq_grid;
  psd.freqs = sc.freq_grid;
  coh.n_avg = n_avg;
  psd.n_avg = n_avg;
  coh.values.clear();
  psd.values.clear();
  for (double w : sc.freq_grid) {
    coh.values.push_back(synth::coherent_mean(sc, w) / sc.drive.f0);
    psd.values.push_back(synth::noise_psd_expectation(sc, w));
  }
}

fitting::JointFitResult noiseless_fit(const synth::SynthConfig& sc) {
  ComplexSpectrum coh;
  PowerSpectrum psd;
  noiseless(sc, coh, psd);
  return fitting::fit_joint(coh, psd,
                            fitting::initial_guess(coh, psd, 1, 0.0));
}

fitting::JointFitResult noisy_fit(const synth::SynthConfig& sc) {
  const auto coh = fitting::normalize_by_drive(
      synth::average(synth::synth_coherent(sc)), sc.drive.f0);
  const auto psd = synth::synth_noise_psd(sc);
  return fitting::fit_joint(coh, psd,
                            fitting::initial_guess(coh, psd, 1, 0.0));
}

} // namespace

TEST_CASE("on-resonance sensitivity recovers the closed-form budget") {
  const auto sc = analysis_config(2.0, 150, 1);
  const auto fit = noiseless_fit(sc);
  REQUIRE(fit.converged);
  const auto pt = analysis::sensitivity_on_resonance(fit, sc.osc, sc.meas);

  // Budget at C = 2, eps_eff = 0.056, nu = 1.2 in SQL units.
  const double expected = (1.0 / (4.0 * 0.056 * 2.0) + 3.4 + 2.0) / 2.0;
  CHECK_THAT(pt.s_ff_over_sql.value, WithinRel(expected, 1e-6));
  CHECK_THAT(pt.s_ff_abs,
             WithinRel(force_sensitivity(sc.osc, sc.meas, sc.osc.omega_m),
                       1e-6));
  CHECK_THAT(pt.cooperativity.value, WithinRel(2.0, 1e-6));
  // On noiseless data the error floor is the atom-number calibration term.
  CHECK_THAT(pt.s_ff_over_sql.error, WithinRel(0.10 * expected, 1e-3));
  CHECK_THAT(pt.omega_m, WithinRel(sc.osc.omega_m, 1e-9));

  // With the calibration term disabled the error is the fit propagation only.
  const auto pt0 = analysis::sensitivity_on_resonance(fit, sc.osc, sc.meas,
                                                      0.0);
  CHECK(pt0.s_ff_over_sql.error < 1e-4 * expected);
}

TEST_CASE("sensitivity near the optimal coupling in absolute units") {
  const double c_opt = optimal_cooperativity(0.056);
  const auto sc = analysis_config(c_opt, 150, 1);
  const auto fit = noiseless_fit(sc);
  REQUIRE(fit.converged);
  const auto pt = analysis::sensitivity_on_resonance(fit, sc.osc, sc.meas);
  CHECK_THAT(pt.s_ff_abs, WithinRel(1.814384559899e-45, 1e-6));
  CHECK_THAT(pt.s_ff_over_sql.value, WithinRel(3.812885636821, 1e-6));
  const double yn = std::sqrt(pt.s_ff_abs * n2_to_yn2);
  CHECK(yn > 41.0);
  CHECK(yn < 43.0);
}

TEST_CASE("sensitivity error shrinks with averaging") {
  const auto few = analysis_config(2.0, 100, 9);
  const auto many = analysis_config(2.0, 400, 9);
  const auto fit_few = noisy_fit(few);
  const auto fit_many = noisy_fit(many);
  REQUIRE(fit_few.converged);
  REQUIRE(fit_many.converged);
  const double e_few =
      analysis::sensitivity_on_resonance(fit_few, few.osc, few.meas, 0.0)
          .s_ff_over_sql.error;
  const double e_many =
      analysis::sensitivity_on_resonance(fit_many, many.osc, many.meas, 0.0)
          .s_ff_over_sql.error;
  // Four times the repetitions should halve the propagated error.
  CHECK(e_many / e_few > 0.32);
  CHECK(e_many / e_few < 0.72);
}

TEST_CASE("calibrated sensitivity spectrum equals the closed form") {
  const auto sc = analysis_config(1.9, 150, 1);
  ComplexSpectrum coh;
  PowerSpectrum psd;
  noiseless(sc, coh, psd);
  const auto fit = fitting::fit_joint(
      coh, psd, fitting::initial_guess(coh, psd, 1, 0.0));
  REQUIRE(fit.converged);
  const auto s = analysis::sensitivity_spectrum(psd, fit);
  REQUIRE(s.values.size() == psd.values.size());
  for (std::size_t i = 0; i < s.values.size(); ++i)
    CHECK_THAT(s.values[i],
               WithinRel(force_sensitivity(sc.osc, sc.meas, s.freqs[i]),
                         1e-6));
}

TEST_CASE("phase-space displacement matches the driven response") {
  const auto sc = analysis_config(2.0, 150, 1);
  const auto fit = noiseless_fit(sc);
  REQUIRE(fit.converged);

  // One noise-free repetition: the cloud collapses onto the mean point.
  ComplexSpectrum rep;
  rep.freqs = sc.freq_grid;
  rep.n_avg = 1;
  for (double w : sc.freq_grid)
    rep.values.push_back(synth::coherent_mean(sc, w));
  const auto ens =
      analysis::phase_space_points({rep, rep, rep}, fit, sc.meas, 0.0);
  REQUIRE(ens.points.size() == 3);

  // |Z| = F0 |chi(omega_m)| / z_HO, independent of the coupling.
  const double z_mag =
      std::hypot(ens.mean_z1, ens.mean_z2);
  CHECK_THAT(z_mag, WithinRel(12.420943814, 1e-6));
  // The response points along -Z2 for a zero-phase drive.
  CHECK_THAT(ens.mean_z1, WithinAbs(0.0, 1e-6 * z_mag));
  CHECK(ens.mean_z2 < 0.0);

  // Doubling the drive doubles the displacement.
  ComplexSpectrum rep2 = rep;
  for (auto& v : rep2.values) v *= 2.0;
  const auto ens2 =
      analysis::phase_space_points({rep2}, fit, sc.meas, 0.0);
  CHECK_THAT(std::hypot(ens2.mean_z1, ens2.mean_z2),
             WithinRel(2.0 * z_mag, 1e-9));

  // Rotating by the drive phase moves the displacement, not its size.
  const auto ens3 =
      analysis::phase_space_points({rep}, fit, sc.meas, 0.7);
  CHECK_THAT(std::hypot(ens3.mean_z1, ens3.mean_z2), WithinRel(z_mag, 1e-9));
  CHECK_THAT(std::atan2(ens3.mean_z2, ens3.mean_z1) + 0.7,
             WithinRel(std::atan2(ens.mean_z2, ens.mean_z1), 1e-6));

  // Repetitions that do not cover the resonance are rejected loudly.
  ComplexSpectrum far = rep;
  for (double& f : far.freqs) f += hz_to_rad(500e3);
  CHECK_THROWS_WITH(analysis::phase_space_points({far}, fit, sc.meas, 0.0),
                    ContainsSubstring("resonance"));
}

TEST_CASE("phase-space spread reproduces the quadrature variance") {
  // Per-quadrature variance of the scaled cloud:
  // S_het(omega_m) / (tau eps S_SN C Gamma), frozen at three couplings.
  const struct {
    double c;
    double var;
  } cases[] = {{0.2, 2.750348993}, {1.9, 0.811650321}, {14.0, 1.880031299}};
  const double bound = uncertainty_bound(1.2, 0.056, 1e-3, hz_to_rad(3e3));
  CHECK_THAT(bound, WithinRel(0.809119462059, 1e-9));

  for (const auto& cs : cases) {
    const auto sc = analysis_config(cs.c, 500, 31);
    const auto fit = noisy_fit(sc);
    REQUIRE(fit.converged);
    const auto reps = synth::synth_coherent(sc);
    const auto ens = analysis::phase_space_points(reps, fit, sc.meas, 0.0);
    REQUIRE(ens.points.size() == 500);

    const auto ell = analysis::covariance_ellipse(ens, 0.5);
    CHECK_FALSE(ell.degenerate);
    // Both principal variances estimate the same per-quadrature variance;
    // with 500 points each rms carries ~3-4% relative error.
    CHECK_THAT(ell.dz1_rms * ell.dz1_rms, WithinRel(cs.var, 0.20));
    CHECK_THAT(ell.dz2_rms * ell.dz2_rms, WithinRel(cs.var, 0.20));
    CHECK_THAT(ell.product(), WithinRel(cs.var, 0.15));
    // The uncertainty product never beats the bound (up to sampling error).
    CHECK(ell.product() > bound * (1.0 - 0.12));

    // The displaced mean is coupling-independent.
    CHECK_THAT(std::hypot(ens.mean_z1, ens.mean_z2),
               WithinAbs(12.420943814,
                         4.0 * std::sqrt(cs.var / 500.0) + 0.05));
  }

  // Away from the optimum the product is well above the bound.
  CHECK(2.750348993 > 2.0 * bound);
  CHECK(1.880031299 > 2.0 * bound);
}

TEST_CASE("phase-space product approaches the bound at the optimum") {
  const double c_opt = optimal_cooperativity(0.056);
  const auto sc = analysis_config(c_opt, 500, 47);
  const auto fit = noisy_fit(sc);
  REQUIRE(fit.converged);
  const auto ens = analysis::phase_space_points(synth::synth_coherent(sc),
                                                fit, sc.meas, 0.0);
  const auto ell = analysis::covariance_ellipse(ens, 0.5);
  const double bound = uncertainty_bound(1.2, 0.056, 1e-3, hz_to_rad(3e3));
  // Product consistent with the bound within Monte Carlo error (~5%).
  CHECK_THAT(ell.product(), WithinRel(bound, 0.15));
}

TEST_CASE("covariance ellipse geometry on synthetic clouds") {
  SECTION("recovers anisotropic spreads, rotation, and confidence radii") {
    RandomStream rng(123, 9, 0, 0);
    const double s1 = 3.0, s2 = 1.0, theta = 0.6;
    analysis::PhaseSpaceEnsemble ens;
    for (int i = 0; i < 4000; ++i) {
      const double u = s1 * rng.next_normal();
      const double v = s2 * rng.next_normal();
      ens.points.push_back({5.0 + u * std::cos(theta) - v * std::sin(theta),
                            -2.0 + u * std::sin(theta) + v * std::cos(theta)});
    }
    const auto ell = analysis::covariance_ellipse(ens, 0.5);
    CHECK_FALSE(ell.degenerate);
    CHECK_THAT(ell.dz1_rms, WithinRel(s1, 0.05));
    CHECK_THAT(ell.dz2_rms, WithinRel(s2, 0.05));
    CHECK_THAT(ell.orientation, WithinAbs(theta, 0.03));
    CHECK_THAT(ell.product(), WithinRel(s1 * s2, 0.08));
    const double q = chi2_quantile_2dof(0.5);
    CHECK_THAT(q, WithinRel(1.3862943611198906, 1e-12));
    CHECK_THAT(ell.r1, WithinRel(ell.dz1_rms * std::sqrt(q), 1e-12));
    CHECK_THAT(ell.r2, WithinRel(ell.dz2_rms * std::sqrt(q), 1e-12));
    CHECK_THAT(ell.confidence, WithinRel(0.5, 1e-13));
  }

  SECTION("flags collinear ensembles as degenerate") {
    analysis::PhaseSpaceEnsemble ens;
    for (int i = 0; i < 10; ++i)
      ens.points.push_back({0.5 * i, 1.0 * i});
    const auto ell = analysis::covariance_ellipse(ens, 0.5);
    CHECK(ell.degenerate);
    CHECK(ell.dz2_rms < 1e-6 * ell.dz1_rms);
  }

  SECTION("guards its inputs") {
    analysis::PhaseSpaceEnsemble ens;
    ens.points = {{0.0, 0.0}, {1.0, 1.0}};
    CHECK_THROWS_WITH(analysis::covariance_ellipse(ens, 0.5),
                      ContainsSubstring("3 points"));
    ens.points.push_back({2.0, 0.0});
    CHECK_THROWS_WITH(analysis::covariance_ellipse(ens, 0.0),
                      ContainsSubstring("confidence"));
    CHECK_THROWS_WITH(analysis::covariance_ellipse(ens, 1.0),
                      ContainsSubstring("confidence"));
  }
}

TEST_CASE("pull against the closed-form expectation") {
  const auto sc = analysis_config(2.0, 150, 1);

  SECTION("vanishes on noise-free data") {
    const auto fit = noiseless_fit(sc);
    const auto pull = analysis::pull_against_theory(fit, sc.osc, sc.meas);
    const double expected = (1.0 / (4.0 * 0.056 * 2.0) + 3.4 + 2.0) / 2.0;
    CHECK_THAT(pull.theory_at_estimate, WithinRel(expected, 1e-5));
    CHECK_THAT(pull.deviation, WithinAbs(0.0, 1e-5 * expected));
    CHECK(pull.sigma > 0.0);
    CHECK_THAT(pull.pull, WithinAbs(0.0, 1e-3));
  }

  SECTION("is order unity on noisy data") {
    const auto noisy = analysis_config(2.0, 150, 20260817);
    const auto fit = noisy_fit(noisy);
    REQUIRE(fit.converged);
    const auto pull = analysis::pull_against_theory(fit, noisy.osc,
                                                    noisy.meas);
    CHECK(std::abs(pull.pull) < 4.0);
    CHECK(pull.sigma > 0.0);
    CHECK_THAT(pull.deviation,
               WithinAbs(0.0, 4.0 * pull.sigma));
  }
}
