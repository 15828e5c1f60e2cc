#pragma once

// Monte Carlo synthesis of heterodyne measurement records in the frequency
// domain. Each repetition of duration tau yields one complex demodulated
// value per analysis bin (spacing omega_bw = 2*pi/tau), so bins are
// statistically independent and are drawn directly:
//
//   driven record:   value(omega) = coherent mean + sigma_q (n1 + i n2),
//                    sigma_q^2 = S_het(omega) / tau  per quadrature,
//   undriven PSD:    value(omega) = S_het(omega) * X / n_reps,
//                    X ~ Gamma(n_reps, 1) drawn as a sum of exponentials.
//
// The per-quadrature variance S_het/tau is the single-bin periodogram
// normalization: |value|^2 * tau / 2 is an unbiased PSD estimate, which ties
// the driven records and the averaged power spectra to the same density.
// All draws come from counter-based streams keyed by (repetition, bin), so
// output is bit-identical for a fixed seed.

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "yoctoforce/constants.hpp"
#include "yoctoforce/model.hpp"
#include "yoctoforce/rng.hpp"
#include "yoctoforce/types.hpp"

namespace yf::synth {

// Stream purpose labels (see rng.hpp).
inline constexpr std::uint64_t purpose_coherent = 1;
inline constexpr std::uint64_t purpose_psd = 2;

// Vibrational ladder of the trapped ensemble: the collective mode plus
// red-shifted satellites from anharmonicity, split by the trap recoil.
// level_fractions is the population per ladder line (sums to 1, dominant
// first); coupling_scale is the relative transduction of each line.
struct AnharmonicLadder {
  int n_peaks = 3;
  double splitting = 0.0;                 // rad/s between adjacent lines
  std::vector<double> level_fractions;    // population weights, sum to 1
  std::vector<double> coupling_scale;     // relative coupling per line

  // Default: three lines at populations 0.97/0.02/0.01, equal couplings,
  // split by the single-photon recoil of an 850 nm trap on the given atom.
  static AnharmonicLadder defaults(double m_atom,
                                   double trap_wavelength = 850e-9) {
    AnharmonicLadder l;
    l.n_peaks = 3;
    l.splitting = recoil_splitting(two_pi / trap_wavelength, m_atom);
    l.level_fractions = {0.97, 0.02, 0.01};
    l.coupling_scale = {1.0, 1.0, 1.0};
    return l;
  }

  static AnharmonicLadder single_line() {
    AnharmonicLadder l;
    l.n_peaks = 1;
    l.splitting = 0.0;
    l.level_fractions = {1.0};
    l.coupling_scale = {1.0};
    return l;
  }

  void validate() const {
    detail::require(n_peaks >= 1, "ladder n_peaks must be >= 1 (got " +
                                      std::to_string(n_peaks) + ")");
    detail::require(level_fractions.size() == static_cast<std::size_t>(n_peaks),
                    "ladder level_fractions must have n_peaks entries");
    detail::require(coupling_scale.size() == static_cast<std::size_t>(n_peaks),
                    "ladder coupling_scale must have n_peaks entries");
    double sum = 0.0;
    for (double f : level_fractions) {
      detail::require(f > 0.0, "ladder level_fractions must be > 0");
      sum += f;
    }
    detail::require(std::abs(sum - 1.0) <= 1e-9,
                    "ladder level_fractions must sum to 1 (got " +
                        detail::num(sum) + ")");
    for (std::size_t k = 1; k < level_fractions.size(); ++k)
      detail::require(level_fractions[0] >= level_fractions[k],
                      "ladder level_fractions[0] must be the dominant line");
    for (double c : coupling_scale)
      detail::require(c > 0.0, "ladder coupling_scale must be > 0");
    if (n_peaks > 1)
      detail::require(splitting > 0.0,
                      "ladder splitting must be > 0 for multiple lines");
  }

  // Weight of line k relative to the dominant line: population times
  // coupling, normalized to line 0. Scales both the coherent amplitude and
  // the incoherent peak height of that line.
  double weight(int k) const {
    return (level_fractions[static_cast<std::size_t>(k)] *
            coupling_scale[static_cast<std::size_t>(k)]) /
           (level_fractions[0] * coupling_scale[0]);
  }
};

// Full synthesis configuration: physics, drive, ladder, grid, repetitions.
struct SynthConfig {
  MechanicalOscillator osc;
  MeasurementConfig meas;
  DriveConfig drive;
  AnharmonicLadder ladder;
  std::vector<double> freq_grid;  // rad/s, uniform; spacing == meas.omega_bw
  int n_reps = 1;
  std::uint64_t seed = 0;

  void validate() const {
    ladder.validate();
    detail::require(n_reps >= 1 && n_reps < (1 << 30),
                    "synthesis n_reps must be in [1, 2^30) (got " +
                        std::to_string(n_reps) + ")");
    const double df = detail::check_uniform_grid(freq_grid);
    detail::require(std::abs(df - meas.omega_bw) <= 1e-9 * meas.omega_bw,
                    "grid spacing " + detail::num(df) +
                        " rad/s must equal the analysis bandwidth 2*pi/tau = " +
                        detail::num(meas.omega_bw) + " rad/s");
    const double lo = osc.omega_m - freq_grid.front();
    const double hi = freq_grid.back() - osc.omega_m;
    detail::require(lo >= 5.0 * osc.gamma && hi >= 5.0 * osc.gamma,
                    "grid must span at least +/- 5 gamma around the resonance"
                    " (covers [-" + detail::num(lo / osc.gamma) + ", +" +
                        detail::num(hi / osc.gamma) + "] gamma)");
  }
};

// Noise-free coherent response at omega: the driven complex amplitude
// summed over ladder lines, sum_k w_k * T_sig(omega_m) * F0 * h(omega -
// omega_k), rotated by the drive phase. Line k sits at omega_m - k*splitting.
inline std::complex<double> coherent_mean(const SynthConfig& cfg, double omega) {
  const double a_sig = transduction(cfg.osc, cfg.meas, cfg.osc.omega_m) * cfg.drive.f0;
  std::complex<double> v = 0.0;
  for (int k = 0; k < cfg.ladder.n_peaks; ++k) {
    const double wk = cfg.osc.omega_m - k * cfg.ladder.splitting;
    v += cfg.ladder.weight(k) * a_sig * line_response(omega - wk, cfg.osc.gamma);
  }
  return v * std::polar(1.0, cfg.drive.phase);
}

// Expected one-sided heterodyne PSD at omega [W^2/Hz]: shot-noise floor plus
// one Lorentzian per ladder line, each scaled like its coherent weight.
inline double noise_psd_expectation(const SynthConfig& cfg, double omega) {
  const double floor = cfg.meas.s_sn / 2.0;
  const double peak0 =
      heterodyne_psd_pm(cfg.osc, cfg.meas, cfg.osc.omega_m) - floor;
  double psd = floor;
  for (int k = 0; k < cfg.ladder.n_peaks; ++k) {
    const double wk = cfg.osc.omega_m - k * cfg.ladder.splitting;
    psd += cfg.ladder.weight(k) * peak0 * line_shape(omega - wk, cfg.osc.gamma);
  }
  return psd;
}

namespace detail_synth {

// Coherent repetition with the drive-scan offset index folded into the
// stream label's high bits; offset_idx 0 is the plain driven record.
inline ComplexSpectrum one_coherent_rep(const SynthConfig& cfg, int rep,
                                        std::uint64_t offset_idx) {
  ComplexSpectrum s;
  s.freqs = cfg.freq_grid;
  s.values.resize(cfg.freq_grid.size());
  s.n_avg = 1;
  const std::uint64_t stream =
      (offset_idx << 32) | static_cast<std::uint64_t>(rep);
  for (std::size_t i = 0; i < cfg.freq_grid.size(); ++i) {
    const double w = cfg.freq_grid[i];
    const double sigma_q =
        std::sqrt(noise_psd_expectation(cfg, w) / cfg.meas.tau);
    RandomStream rng(cfg.seed, purpose_coherent, stream,
                     static_cast<std::uint64_t>(i));
    s.values[i] = coherent_mean(cfg, w) + sigma_q * rng.next_complex_normal();
  }
  return s;
}

} // namespace detail_synth

// Driven records: one complex spectrum per repetition.
inline std::vector<ComplexSpectrum> synth_coherent(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<ComplexSpectrum> reps;
  reps.reserve(static_cast<std::size_t>(cfg.n_reps));
  for (int r = 0; r < cfg.n_reps; ++r)
    reps.push_back(detail_synth::one_coherent_rep(cfg, r, 0));
  return reps;
}

// Element-wise mean of repetitions (n_avg accumulates).
inline ComplexSpectrum average(const std::vector<ComplexSpectrum>& reps) {
  if (reps.empty())
    throw std::invalid_argument("average: no repetitions to average");
  ComplexSpectrum out = reps.front();
  int n_avg = reps.front().n_avg;
  for (std::size_t r = 1; r < reps.size(); ++r) {
    if (reps[r].values.size() != out.values.size())
      throw std::invalid_argument("average: repetitions have mismatched grids");
    for (std::size_t i = 0; i < out.values.size(); ++i)
      out.values[i] += reps[r].values[i];
    n_avg += reps[r].n_avg;
  }
  for (auto& v : out.values) v /= static_cast<double>(reps.size());
  out.n_avg = n_avg;
  return out;
}

// Undriven averaged power spectrum: per bin, the mean of n_reps independent
// exponentially-distributed periodogram estimates with mean S_het(omega),
// i.e. S_het * Gamma(n_reps, 1) / n_reps, drawn as a sum of exponentials
// from the (repetition, bin)-keyed streams.
inline PowerSpectrum synth_noise_psd(const SynthConfig& cfg) {
  cfg.validate();
  PowerSpectrum s;
  s.freqs = cfg.freq_grid;
  s.values.resize(cfg.freq_grid.size());
  s.n_avg = cfg.n_reps;
  for (std::size_t i = 0; i < cfg.freq_grid.size(); ++i) {
    double acc = 0.0;
    for (int r = 0; r < cfg.n_reps; ++r) {
      RandomStream rng(cfg.seed, purpose_psd, static_cast<std::uint64_t>(r),
                       static_cast<std::uint64_t>(i));
      acc += rng.next_exponential();
    }
    s.values[i] = noise_psd_expectation(cfg, cfg.freq_grid[i]) * acc /
                  static_cast<double>(cfg.n_reps);
  }
  return s;
}

// Drive-frequency scan: one full repetition set per drive frequency
// omega_m + offset. Runs share the oscillator/measurement configuration;
// offsets get independent noise streams, except that offset index 0 draws
// the exact synth_coherent streams (a scan containing offset 0 reproduces
// the plain driven repetitions bit-for-bit).
struct DriveScan {
  std::vector<double> offsets;                    // rad/s relative to omega_m
  std::vector<std::vector<ComplexSpectrum>> runs; // repetition set per offset
};

inline DriveScan drive_scan(const SynthConfig& cfg,
                            const std::vector<double>& offsets) {
  detail::require(!offsets.empty(), "drive_scan: offsets must be non-empty");
  detail::require(offsets.size() < (1ull << 31),
                  "drive_scan: too many offsets");
  DriveScan scan;
  scan.offsets = offsets;
  scan.runs.reserve(offsets.size());
  for (std::size_t j = 0; j < offsets.size(); ++j) {
    SynthConfig c = cfg;
    c.drive = DriveConfig::make(cfg.osc.n_atoms, cfg.drive.f_static_per_atom,
                                cfg.drive.mod_index,
                                cfg.osc.omega_m + offsets[j], cfg.drive.phase);
    c.validate();
    std::vector<ComplexSpectrum> reps;
    reps.reserve(static_cast<std::size_t>(c.n_reps));
    for (int r = 0; r < c.n_reps; ++r)
      reps.push_back(detail_synth::one_coherent_rep(c, r, j));
    scan.runs.push_back(std::move(reps));
  }
  return scan;
}

} // namespace yf::synth
