// Closed-form model: frozen reference values, algebraic identities, and
// input guards. Reference numbers were evaluated independently from the
// printed formulas at the default oscillator (1200 Rb-87 atoms, omega_m =
// 2*pi*110 kHz, gamma = 2*pi*3 kHz, nu = 1.2) and detection chain
// (heterodyne, epsilon_det = 0.112 -> epsilon_eff = 0.056, P_LO = 1 mW at
// 780 nm, tau = 1 ms) and are pinned to 1e-9 relative unless noted.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "yoctoforce/constants.hpp"
#include "yoctoforce/model.hpp"
#include "yoctoforce/types.hpp"

using namespace yf;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinRel;

namespace {

MechanicalOscillator default_osc() {
  return MechanicalOscillator::from_atoms(1200.0, 1.44316e-25,
                                          hz_to_rad(110e3), hz_to_rad(3e3),
                                          1.2);
}

MeasurementConfig default_meas(double c) {
  const double omega_0 = two_pi * c_light / 780e-9;
  return MeasurementConfig::make(0.112, true, c, hz_to_rad(1.82e6), 1e-3,
                                 omega_0, 1e-3);
}

} // namespace

TEST_CASE("oscillator ground-state scales match reference values") {
  const auto osc = default_osc();
  CHECK_THAT(osc.mass, WithinRel(1.731792e-22, 1e-12));
  CHECK_THAT(osc.p_ho_sq(), WithinRel(6.311236398598e-51, 1e-9));
  CHECK_THAT(osc.z_ho(), WithinRel(6.637261692817e-10, 1e-9));
  // Ground-state momentum times length is hbar/2 for any oscillator.
  CHECK_THAT(osc.p_ho() * osc.z_ho(), WithinRel(hbar / 2.0, 1e-13));
}

TEST_CASE("susceptibility peak magnitude and phase") {
  const auto osc = default_osc();
  const auto chi = susceptibility(osc, osc.omega_m);
  CHECK_THAT(std::abs(chi), WithinRel(4.432314761606e+11, 1e-9));
  // On resonance chi = i / (m omega_m gamma): position lags force by 90 deg.
  CHECK_THAT(std::arg(chi), WithinRel(pi / 2.0, 1e-12));
  CHECK_THAT(std::abs(chi),
             WithinRel(1.0 / (osc.mass * osc.omega_m * osc.gamma), 1e-12));

  const auto paper = MechanicalOscillator::from_mass(
      1.8e-22, 1200.0, osc.omega_m, osc.gamma, osc.nu);
  CHECK_THAT(std::abs(susceptibility(paper, paper.omega_m)),
             WithinRel(4.264359580906e+11, 1e-9));
  // Half a linewidth off resonance the magnitude drops by sqrt(2).
  CHECK_THAT(std::abs(susceptibility(osc, osc.omega_m + osc.gamma / 2.0)),
             WithinRel(std::abs(chi) / std::sqrt(2.0), 1e-12));
}

TEST_CASE("standard quantum limit absolute scale") {
  const auto osc = default_osc();
  const double sql = sql_sensitivity(osc);
  CHECK_THAT(sql, WithinRel(4.758560137177e-46, 1e-9));
  CHECK_THAT(sql, WithinRel(4.0 * osc.gamma * osc.p_ho_sq(), 1e-13));
  // Within 15% of the rounded (21 yN)^2/Hz benchmark.
  CHECK(std::abs(sql / 4.41e-46 - 1.0) < 0.15);
}

TEST_CASE("corrected minimum sensitivity and optimal cooperativity") {
  const auto osc = default_osc();
  const double smin = min_sensitivity(osc, 0.056, 1.2);
  CHECK_THAT(smin, WithinRel(1.814384559899e-45, 1e-9));
  CHECK_THAT(smin / sql_sensitivity(osc), WithinRel(3.812885636821, 1e-9));
  CHECK_THAT(optimal_cooperativity(0.056), WithinRel(2.112885636821, 1e-9));
  // Ideal detector at zero temperature reaches the SQL exactly, at C = 1/2.
  CHECK_THAT(min_sensitivity(osc, 1.0, 0.0),
             WithinRel(sql_sensitivity(osc), 1e-13));
  CHECK_THAT(optimal_cooperativity(1.0), WithinRel(0.5, 1e-13));
  CHECK_THAT(optimal_cooperativity(0.25), WithinRel(1.0, 1e-13));
}

TEST_CASE("sensitivity budget on resonance") {
  const auto osc = default_osc();
  // At epsilon = 1, nu = 0, C = 1/2 the three terms sum to the SQL.
  const auto ground = MechanicalOscillator::from_atoms(
      1200.0, 1.44316e-25, hz_to_rad(110e3), hz_to_rad(3e3), 0.0);
  auto ideal = MeasurementConfig::make(1.0, false, 0.5, hz_to_rad(1.82e6),
                                       1e-3, two_pi * c_light / 780e-9, 1e-3);
  CHECK_THAT(force_sensitivity(ground, ideal, ground.omega_m),
             WithinRel(sql_sensitivity(ground), 1e-13));
  // Off resonance only the imprecision term grows, by the inverse line shape.
  const auto meas = default_meas(2.0);
  const double on = force_sensitivity(osc, meas, osc.omega_m);
  const double off = force_sensitivity(osc, meas, osc.omega_m + osc.gamma);
  const double imprecision_on = 1.0 / (4.0 * meas.epsilon_eff * 2.0);
  const double zpm = 2.0 * osc.gamma * osc.p_ho_sq();
  CHECK_THAT(off - on,
             WithinRel(zpm * imprecision_on *
                           (1.0 / line_shape(osc.gamma, osc.gamma) - 1.0),
                       1e-12));
}

TEST_CASE("sensitivity equals detected noise over squared transduction") {
  const auto osc = default_osc();
  // Frozen off-resonance evaluation at C = 3.3, omega = omega_m + 2*pi*4.7 kHz.
  const auto meas = default_meas(3.3);
  const double w = osc.omega_m + hz_to_rad(4.7e3);
  const double direct = force_sensitivity(osc, meas, w);
  CHECK_THAT(direct, WithinRel(5.076060699672e-45, 1e-9));
  const double t = transduction(osc, meas, w);
  CHECK_THAT(heterodyne_psd_pm(osc, meas, w) / (t * t),
             WithinRel(direct, 1e-10));
  // Same identity across the line and across cooperativities.
  for (double c : {0.3, 2.0, 10.0}) {
    const auto m = default_meas(c);
    for (int k = -20; k <= 20; ++k) {
      const double wk = osc.omega_m + k * osc.gamma / 4.0;
      const double tk = transduction(osc, m, wk);
      CHECK_THAT(heterodyne_psd_pm(osc, m, wk) / (tk * tk),
                 WithinRel(force_sensitivity(osc, m, wk), 1e-10));
    }
  }
}

TEST_CASE("minimum of the budget sits at the optimal cooperativity") {
  const auto osc = default_osc();
  for (double eps : {0.05, 0.056, 0.25, 1.0}) {
    const double c_opt = optimal_cooperativity(eps);
    auto meas_at = [&](double c) {
      return MeasurementConfig::make(eps, false, c, hz_to_rad(1.82e6), 1e-3,
                                     two_pi * c_light / 780e-9, 1e-3);
    };
    const double s_opt = force_sensitivity(osc, meas_at(c_opt), osc.omega_m);
    CHECK_THAT(s_opt, WithinRel(min_sensitivity(osc, eps, osc.nu), 1e-12));
    for (double f : {0.2, 0.5, 0.9, 1.1, 2.0, 5.0}) {
      CHECK(force_sensitivity(osc, meas_at(c_opt * f), osc.omega_m) >
            s_opt * (1.0 - 1e-12));
    }
  }
}

TEST_CASE("phase-space uncertainty bound") {
  const auto osc = default_osc();
  CHECK_THAT(uncertainty_bound(1.2, 0.056, 1e-3, hz_to_rad(3e3)),
             WithinRel(0.809119462059, 1e-9));
  // Ideal ground-state bound: 4 / (tau gamma).
  CHECK_THAT(uncertainty_bound(0.0, 1.0, 1e-3, hz_to_rad(3e3)),
             WithinRel(4.0 / (1e-3 * hz_to_rad(3e3)), 1e-13));
  // The bound is the minimum sensitivity in zero-point units over tau gamma^2.
  for (double nu : {0.0, 1.2, 4.0}) {
    for (double eps : {0.056, 0.3, 1.0}) {
      const auto o = MechanicalOscillator::from_atoms(
          1200.0, 1.44316e-25, osc.omega_m, osc.gamma, nu);
      CHECK_THAT(uncertainty_bound(nu, eps, 1e-3, o.gamma),
                 WithinRel(min_sensitivity(o, eps, nu) /
                               (1e-3 * o.gamma * o.gamma * o.p_ho_sq()),
                           1e-12));
    }
  }
}

TEST_CASE("acceleration sensitivity scale") {
  const auto osc = default_osc();
  CHECK_THAT(acceleration_scale(min_sensitivity(osc, 0.056, 1.2), osc.mass),
             WithinRel(0.02507263, 1e-6));
  const auto paper = MechanicalOscillator::from_mass(
      1.8e-22, 1200.0, osc.omega_m, osc.gamma, 1.2);
  const double acc =
      acceleration_scale(min_sensitivity(paper, 0.056, 1.2), paper.mass);
  CHECK_THAT(acc, WithinRel(0.02459300, 1e-6));
  CHECK(acc >= 0.02);
  CHECK(acc <= 0.025);
}

TEST_CASE("detected spectra reference values") {
  const auto osc = default_osc();
  const auto meas = default_meas(2.0);
  CHECK_THAT(meas.epsilon_eff, WithinRel(0.056, 1e-13));
  CHECK_THAT(meas.omega_0, WithinRel(2.414937906806e+15, 1e-9));
  CHECK_THAT(meas.s_sn, WithinRel(2.546725456323e-22, 1e-9));
  CHECK_THAT(meas.omega_bw, WithinRel(two_pi / 1e-3, 1e-13));

  // Intracavity photon spectrum peak, cavity filter negligible.
  auto wide = MeasurementConfig::make(0.112, true, 2.0, 1e15, 1e-3,
                                      meas.omega_0, 1e-3);
  CHECK_THAT(photon_spectrum_pm(osc, wide, osc.omega_m),
             WithinRel(21.6, 1e-9));
  // Finite cavity linewidth suppresses the detected peak by k^2/(k^2+w^2).
  const double filter = meas.kappa * meas.kappa /
                        (meas.kappa * meas.kappa + osc.omega_m * osc.omega_m);
  CHECK_THAT(photon_spectrum_pm(osc, meas, osc.omega_m),
             WithinRel(21.6 * filter, 1e-12));

  // Heterodyne PSD on resonance relative to the shot-noise PSD.
  CHECK_THAT(heterodyne_psd_pm(osc, meas, osc.omega_m) / meas.s_sn,
             WithinRel(1.7096, 1e-9));
  // Far off resonance the PSD returns to the shot-noise floor S_SN/2.
  CHECK_THAT(heterodyne_psd_pm(osc, meas, osc.omega_m + 300.0 * osc.gamma),
             WithinRel(meas.s_sn / 2.0, 1e-4));
  // The resolved-sideband and full forms agree once the filter is factored.
  CHECK_THAT(heterodyne_psd_pm(osc, meas, osc.omega_m, CavityFilter::full) -
                 meas.s_sn / 2.0,
             WithinRel((heterodyne_psd_pm(osc, meas, osc.omega_m) -
                        meas.s_sn / 2.0) *
                           filter,
                       1e-12));

  // Transduction peak in W/N.
  CHECK_THAT(transduction(osc, meas, osc.omega_m),
             WithinRel(4.896573643809e+11, 1e-9));
  // Zero coupling transduces nothing.
  CHECK(transduction(osc, meas.with_cooperativity(0.0), osc.omega_m) == 0.0);
}

TEST_CASE("line shapes and response phase") {
  const double gamma = hz_to_rad(3e3);
  CHECK(line_shape(0.0, gamma) == 1.0);
  CHECK_THAT(line_shape(gamma / 2.0, gamma), WithinRel(0.5, 1e-13));
  CHECK_THAT(line_shape(-gamma / 2.0, gamma), WithinRel(0.5, 1e-13));
  // |h|^2 = L and h(0) = -i.
  for (int k = -8; k <= 8; ++k) {
    const double d = k * gamma / 3.0;
    CHECK_THAT(std::norm(line_response(d, gamma)),
               WithinRel(line_shape(d, gamma), 1e-12));
    CHECK_THAT(std::arg(line_response(d, gamma)),
               WithinRel(response_phase(d, gamma), 1e-12));
  }
  CHECK_THAT(line_response(0.0, gamma).imag(), WithinRel(-1.0, 1e-13));
  CHECK_THAT(response_phase(0.0, gamma), WithinRel(-pi / 2.0, 1e-13));
  CHECK_THAT(response_phase(gamma / 2.0, gamma), WithinRel(-pi / 4.0, 1e-13));
}

TEST_CASE("cooperativity inversions") {
  // Peak-ratio relation round-trips over four decades.
  for (int i = 0; i <= 60; ++i) {
    const double c = 0.01 * std::pow(100.0 / 0.01, i / 60.0);
    for (double eps : {0.056, 0.5}) {
      const double ratio = (1.0 + 4.0 * eps * c * (2.0 * 1.2 + c + 1.0)) / 2.0;
      CHECK_THAT(cooperativity_from_peak(ratio, 1.2, eps),
                 WithinRel(c, 1e-11));
    }
  }
  // Frozen single point and the photon-number form.
  const auto osc = default_osc();
  const double g_om = optomech_coupling(hz_to_rad(13.0e6), hz_to_rad(24e9),
                                        two_pi / 780e-9, 1200.0, osc.z_ho());
  CHECK_THAT(g_om, WithinRel(2.838643045966e+05, 1e-9));
  CHECK_THAT(cooperativity_from_photons(1.0, g_om, hz_to_rad(1.82e6),
                                        hz_to_rad(3e3)),
             WithinRel(1.495302916553, 1e-9));
  CHECK_THAT(cavity_shift(1200.0, hz_to_rad(13.0e6), hz_to_rad(24e9)),
             WithinRel(2.654645792283e+07, 1e-9));
  CHECK_THAT(recoil_splitting(two_pi / 850e-9, 1.44316e-25),
             WithinRel(1.996427609947e+04, 1e-9));
  // A peak exactly at the shot-noise floor means zero cooperativity.
  CHECK_THAT(cooperativity_from_peak(0.5, 1.2, 0.056) + 1.0,
             WithinRel(1.0, 1e-12));
}

TEST_CASE("model input guards name the offending quantity") {
  const auto osc = default_osc();
  CHECK_THROWS_WITH(MechanicalOscillator::from_atoms(0.0, 1.44316e-25, 1.0,
                                                     1.0, 0.0),
                    ContainsSubstring("n_atoms"));
  CHECK_THROWS_WITH(MechanicalOscillator::from_atoms(1200.0, 1.44316e-25,
                                                     hz_to_rad(110e3), 0.0,
                                                     0.0),
                    ContainsSubstring("gamma"));
  CHECK_THROWS_WITH(MechanicalOscillator::from_atoms(1200.0, 1.44316e-25,
                                                     hz_to_rad(110e3),
                                                     hz_to_rad(3e3), -0.1),
                    ContainsSubstring("nu"));
  CHECK_THROWS_WITH(force_sensitivity(osc, default_meas(0.0), osc.omega_m),
                    ContainsSubstring("cooperativity"));
  CHECK_THROWS_WITH(optimal_cooperativity(0.0),
                    ContainsSubstring("epsilon_eff"));
  CHECK_THROWS_WITH(optimal_cooperativity(1.5),
                    ContainsSubstring("epsilon_eff"));
  CHECK_THROWS_WITH(cooperativity_from_peak(0.4, 1.2, 0.056),
                    ContainsSubstring("below the shot-noise floor"));
  CHECK_THROWS_WITH(uncertainty_bound(-0.1, 0.056, 1e-3, 1.0),
                    ContainsSubstring("nu"));
  CHECK_THROWS_WITH(min_sensitivity(osc, 0.0, 1.2),
                    ContainsSubstring("epsilon_eff"));
}
