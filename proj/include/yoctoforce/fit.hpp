#pragma once

// Joint nonlinear least-squares estimation: the complex coherent response
// and the incoherent noise PSD are fitted simultaneously with shared line
// centers and linewidth. The coherent model is a sum of unit-peak complex
// line responses with free complex amplitudes,
//
//   M(w) = sum_k c_k h(w - w_k),   h(d) = (G/2) / (d + i G/2),
//
// (so |c_k| is the per-line amplitude and arg(c_k) its phase offset, with a
// -90 deg response angle on resonance built into h), and the PSD model is a
// floor plus matching Lorentzians,
//
//   P(w) = floor + sum_k a_k L(w - w_k),   L(d) = (G/2)^2 / (d^2 + (G/2)^2),
//
// with line k centered at omega_m - k*splitting. The optimizer is damped
// Gauss-Newton (Levenberg multiplicative damping, x3 on rejection, /3 on
// acceptance) with an analytic Jacobian, solved via Cholesky on the normal
// equations in scaled parameters. Weighting runs in two passes: bootstrap
// weights from the data, then frozen per-bin sigmas from the pass-one model.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "yoctoforce/constants.hpp"
#include "yoctoforce/linalg.hpp"
#include "yoctoforce/model.hpp"
#include "yoctoforce/types.hpp"

namespace yf::fitting {

// A fitted (or initial) joint model in physical units. Coherent amplitudes
// are stored as complex values: a_sig(k) = |c[k]| is the per-line amplitude
// in the coherent data's units and phase(k) = arg(c[k]) its phase offset.
struct JointFitModel {
  double omega_m = 0.0;   // shared line center of the dominant peak [rad/s]
  double gamma = 0.0;     // shared full linewidth [rad/s]
  std::vector<std::complex<double>> c;  // complex coherent amplitude per line
  std::vector<double> a_nn;             // PSD Lorentzian height per line
  double floor = 0.0;     // PSD floor (shot-noise level S_SN/2)
  double splitting = 0.0; // line spacing; line k sits at omega_m - k*splitting
  bool fit_floor = true;       // floor free (self-calibrated) vs pinned
  bool fit_splitting = false;  // spacing free vs fixed to the ladder value

  int n_peaks() const { return static_cast<int>(c.size()); }
  double center(int k) const { return omega_m - k * splitting; }
  double a_sig(int k) const { return std::abs(c[static_cast<std::size_t>(k)]); }
  double phase(int k) const { return std::arg(c[static_cast<std::size_t>(k)]); }

  std::complex<double> coherent_model(double w) const {
    std::complex<double> m = 0.0;
    for (int k = 0; k < n_peaks(); ++k)
      m += c[static_cast<std::size_t>(k)] * line_response(w - center(k), gamma);
    return m;
  }

  double psd_model(double w) const {
    double p = floor;
    for (int k = 0; k < n_peaks(); ++k)
      p += a_nn[static_cast<std::size_t>(k)] * line_shape(w - center(k), gamma);
    return p;
  }

  // Validity of an *input* model (initial guess). Fitted outputs are
  // unconstrained: a line consistent with zero may resolve marginally
  // negative and is reported as found.
  void validate() const {
    detail::require(n_peaks() >= 1, "fit model needs at least one line");
    detail::require(a_nn.size() == c.size(),
                    "fit model a_nn and coherent amplitudes must pair up");
    detail::require(gamma > 0.0, "fit model gamma must be > 0 (got " +
                                     detail::num(gamma) + ")");
    detail::require(omega_m > 0.0, "fit model omega_m must be > 0");
    for (double a : a_nn)
      detail::require(a >= 0.0, "fit model a_nn must be >= 0 (got " +
                                    detail::num(a) + ")");
    detail::require(floor >= 0.0, "fit model floor must be >= 0");
    if (n_peaks() > 1)
      detail::require(splitting > 0.0,
                      "fit model splitting must be > 0 for multiple lines");
  }
};

struct FitOptions {
  int max_iterations = 200;         // Gauss-Newton iteration cap (per pass)
  double relative_step_tol = 1e-10; // convergence: max relative step below this
  int weight_passes = 2;            // 1 = bootstrap weights only
};

struct JointFitResult {
  JointFitModel model;
  std::vector<std::string> param_names;
  std::vector<double> param_values;   // physical units, matching param_names
  std::vector<double> param_errors;   // sqrt of covariance diagonal
  detail::SquareMatrix covariance;    // physical units
  bool converged = false;
  int iterations = 0;
  int n_residuals = 0;
  int n_parameters = 0;
  double chi2 = 0.0;
  double chi2_reduced = 0.0;
  double coherent_rms = 0.0;  // weighted rms residual, coherent block
  double psd_rms = 0.0;       // weighted rms residual, PSD block
  double tau = 0.0;           // measurement window 2*pi/grid spacing [s]

  int index(const std::string& name) const {
    for (std::size_t i = 0; i < param_names.size(); ++i)
      if (param_names[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("fit result has no parameter '" + name + "'");
  }
  double value(const std::string& name) const {
    return param_values[static_cast<std::size_t>(index(name))];
  }
  double error(const std::string& name) const {
    return param_errors[static_cast<std::size_t>(index(name))];
  }
  double cov(const std::string& a, const std::string& b) const {
    return covariance.at(index(a), index(b));
  }
};

namespace detail_fit {

// Parameter vector layout: [omega_m, gamma, {re c_k, im c_k}..., {a_nn_k}...,
// floor (if free), splitting (if free)].
struct Layout {
  int n_peaks = 0;
  bool fit_floor = true;
  bool fit_splitting = false;

  int i_omega() const { return 0; }
  int i_gamma() const { return 1; }
  int i_re(int k) const { return 2 + 2 * k; }
  int i_im(int k) const { return 3 + 2 * k; }
  int i_nn(int k) const { return 2 + 2 * n_peaks + k; }
  int i_floor() const { return 2 + 3 * n_peaks; }
  int i_split() const { return 2 + 3 * n_peaks + (fit_floor ? 1 : 0); }
  int n() const {
    return 2 + 3 * n_peaks + (fit_floor ? 1 : 0) + (fit_splitting ? 1 : 0);
  }

  std::vector<std::string> names() const {
    std::vector<std::string> v(static_cast<std::size_t>(n()));
    v[0] = "omega_m";
    v[1] = "gamma";
    for (int k = 0; k < n_peaks; ++k) {
      v[static_cast<std::size_t>(i_re(k))] = "re_c" + std::to_string(k);
      v[static_cast<std::size_t>(i_im(k))] = "im_c" + std::to_string(k);
      v[static_cast<std::size_t>(i_nn(k))] = "a_nn" + std::to_string(k);
    }
    if (fit_floor) v[static_cast<std::size_t>(i_floor())] = "floor";
    if (fit_splitting) v[static_cast<std::size_t>(i_split())] = "splitting";
    return v;
  }
};

// Everything the residual evaluation needs besides the parameters.
struct FitData {
  std::vector<double> freqs;                 // shared grid [rad/s]
  std::vector<std::complex<double>> coh;     // averaged coherent record
  std::vector<double> psd;                   // averaged PSD
  std::vector<double> wc;                    // coherent weights (re and im rows)
  std::vector<double> wp;                    // PSD weights
  double omega_ref = 0.0;                    // detuning origin (grid center)

  std::size_t n_bins() const { return freqs.size(); }
  int n_residuals() const { return static_cast<int>(3 * freqs.size()); }
};

// Map between the scaled internal vector p and the physical model. omega_m
// is carried as a detuning from omega_ref so the fit is translation
// invariant; every parameter is divided by its scale to keep p O(1).
struct Scaling {
  double omega_ref = 0.0;
  std::vector<double> scale;

  void unpack(const std::vector<double>& p, const Layout& lay,
              JointFitModel& m) const {
    m.omega_m = omega_ref + p[0] * scale[0];
    m.gamma = p[1] * scale[1];
    for (int k = 0; k < lay.n_peaks; ++k) {
      const auto ir = static_cast<std::size_t>(lay.i_re(k));
      const auto ii = static_cast<std::size_t>(lay.i_im(k));
      m.c[static_cast<std::size_t>(k)] = {p[ir] * scale[ir], p[ii] * scale[ii]};
      const auto in = static_cast<std::size_t>(lay.i_nn(k));
      m.a_nn[static_cast<std::size_t>(k)] = p[in] * scale[in];
    }
    if (lay.fit_floor) {
      const auto i = static_cast<std::size_t>(lay.i_floor());
      m.floor = p[i] * scale[i];
    }
    if (lay.fit_splitting) {
      const auto i = static_cast<std::size_t>(lay.i_split());
      m.splitting = p[i] * scale[i];
    }
  }

  std::vector<double> pack(const JointFitModel& m, const Layout& lay) const {
    std::vector<double> p(static_cast<std::size_t>(lay.n()));
    p[0] = (m.omega_m - omega_ref) / scale[0];
    p[1] = m.gamma / scale[1];
    for (int k = 0; k < lay.n_peaks; ++k) {
      const auto ir = static_cast<std::size_t>(lay.i_re(k));
      const auto ii = static_cast<std::size_t>(lay.i_im(k));
      p[ir] = m.c[static_cast<std::size_t>(k)].real() / scale[ir];
      p[ii] = m.c[static_cast<std::size_t>(k)].imag() / scale[ii];
      const auto in = static_cast<std::size_t>(lay.i_nn(k));
      p[in] = m.a_nn[static_cast<std::size_t>(k)] / scale[in];
    }
    if (lay.fit_floor) {
      const auto i = static_cast<std::size_t>(lay.i_floor());
      p[i] = m.floor / scale[i];
    }
    if (lay.fit_splitting) {
      const auto i = static_cast<std::size_t>(lay.i_split());
      p[i] = m.splitting / scale[i];
    }
    return p;
  }
};

// Weighted residuals r = (model - data) * w, ordered [re_0, im_0, re_1, ...,
// im_{nb-1}, psd_0, ..., psd_{nb-1}], and optionally the Jacobian dr/dp in
// *scaled* parameters (row-major n_residuals x n_params). Returns the cost
// sum r^2, or +inf for an invalid parameter set (gamma <= 0, splitting <= 0
// when fitted) so the damping loop rejects the step.
inline double eval_residuals(const JointFitModel& m, const Layout& lay,
                             const Scaling& sc, const FitData& d,
                             std::vector<double>& r, std::vector<double>* jac) {
  const std::size_t nb = d.n_bins();
  const std::size_t nr = 3 * nb;
  const std::size_t np = static_cast<std::size_t>(lay.n());
  r.assign(nr, 0.0);
  if (jac) jac->assign(nr * np, 0.0);

  if (!(m.gamma > 0.0) || (lay.fit_splitting && m.n_peaks() > 1 && !(m.splitting > 0.0)))
    return std::numeric_limits<double>::infinity();

  const double g2 = m.gamma / 2.0;
  double cost = 0.0;
  for (std::size_t i = 0; i < nb; ++i) {
    const double w = d.freqs[i];
    std::complex<double> mc = 0.0;   // coherent model
    double mp = m.floor;             // PSD model
    std::complex<double> dmc_dw = 0.0, dmc_dg = 0.0, dmc_ds = 0.0;
    double dmp_dw = 0.0, dmp_dg = 0.0, dmp_ds = 0.0;

    for (int k = 0; k < m.n_peaks(); ++k) {
      const double delta = w - m.center(k);
      const std::complex<double> den(delta, g2);
      const std::complex<double> h = g2 / den;
      const std::complex<double> ck = m.c[static_cast<std::size_t>(k)];
      const double ak = m.a_nn[static_cast<std::size_t>(k)];
      mc += ck * h;

      const double dd = delta * delta + g2 * g2;
      const double lsh = g2 * g2 / dd;
      mp += ak * lsh;

      if (jac) {
        // dh/ddelta = -g2/den^2, dh/dg2 = delta/den^2; delta depends on
        // omega_m (d delta/d omega_m = -1) and splitting (d/d split = +k).
        const std::complex<double> inv_den2 = 1.0 / (den * den);
        const std::complex<double> dh_ddelta = -g2 * inv_den2;
        const std::complex<double> dh_dg2 = delta * inv_den2;
        dmc_dw += ck * (-dh_ddelta);
        dmc_dg += ck * dh_dg2 * 0.5;  // gamma = 2*g2
        dmc_ds += ck * (static_cast<double>(k) * dh_ddelta);

        // dL/ddelta = -2 g2^2 delta / dd^2, dL/dg2 = 2 g2 delta^2 / dd^2.
        const double dl_ddelta = -2.0 * g2 * g2 * delta / (dd * dd);
        const double dl_dg2 = 2.0 * g2 * delta * delta / (dd * dd);
        dmp_dw += ak * (-dl_ddelta);
        dmp_dg += ak * dl_dg2 * 0.5;
        dmp_ds += ak * static_cast<double>(k) * dl_ddelta;

        const double wc = d.wc[i];
        const std::size_t row_re = 2 * i, row_im = 2 * i + 1;
        auto put = [&](std::size_t row, int col, double v) {
          (*jac)[row * np + static_cast<std::size_t>(col)] = v;
        };
        // Amplitude columns are per-line and otherwise zero.
        put(row_re, lay.i_re(k), h.real() * sc.scale[static_cast<std::size_t>(lay.i_re(k))] * wc);
        put(row_im, lay.i_re(k), h.imag() * sc.scale[static_cast<std::size_t>(lay.i_re(k))] * wc);
        put(row_re, lay.i_im(k), -h.imag() * sc.scale[static_cast<std::size_t>(lay.i_im(k))] * wc);
        put(row_im, lay.i_im(k), h.real() * sc.scale[static_cast<std::size_t>(lay.i_im(k))] * wc);
        const std::size_t row_p = 2 * nb + i;
        put(row_p, lay.i_nn(k), lsh * sc.scale[static_cast<std::size_t>(lay.i_nn(k))] * d.wp[i]);
      }
    }

    const std::complex<double> rc = (mc - d.coh[i]) * d.wc[i];
    const double rp = (mp - d.psd[i]) * d.wp[i];
    r[2 * i] = rc.real();
    r[2 * i + 1] = rc.imag();
    r[2 * nb + i] = rp;
    cost += rc.real() * rc.real() + rc.imag() * rc.imag() + rp * rp;

    if (jac) {
      const double wc = d.wc[i];
      auto put = [&](std::size_t row, int col, double v) {
        (*jac)[row * np + static_cast<std::size_t>(col)] = v;
      };
      put(2 * i, lay.i_omega(), dmc_dw.real() * sc.scale[0] * wc);
      put(2 * i + 1, lay.i_omega(), dmc_dw.imag() * sc.scale[0] * wc);
      put(2 * i, lay.i_gamma(), dmc_dg.real() * sc.scale[1] * wc);
      put(2 * i + 1, lay.i_gamma(), dmc_dg.imag() * sc.scale[1] * wc);
      put(2 * nb + i, lay.i_omega(), dmp_dw * sc.scale[0] * d.wp[i]);
      put(2 * nb + i, lay.i_gamma(), dmp_dg * sc.scale[1] * d.wp[i]);
      if (lay.fit_floor)
        put(2 * nb + i, lay.i_floor(),
            sc.scale[static_cast<std::size_t>(lay.i_floor())] * d.wp[i]);
      if (lay.fit_splitting) {
        const double ss = sc.scale[static_cast<std::size_t>(lay.i_split())];
        put(2 * i, lay.i_split(), dmc_ds.real() * ss * wc);
        put(2 * i + 1, lay.i_split(), dmc_ds.imag() * ss * wc);
        put(2 * nb + i, lay.i_split(), dmp_ds * ss * d.wp[i]);
      }
    }
  }
  return cost;
}

// Per-quadrature noise level of the averaged coherent record, estimated
// from adjacent-bin differences over the outer sixth of the grid on each
// side (differences cancel the slowly varying coherent mean; each complex
// difference contributes 4 sigma_q^2 in expectation).
inline double edge_noise_sigma(const std::vector<std::complex<double>>& v) {
  const std::size_t n = v.size();
  const std::size_t ne = std::max<std::size_t>(2, n / 6);
  double sum = 0.0;
  std::size_t count = 0;
  auto add_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i + 1 < hi; ++i) {
      const std::complex<double> diff = v[i + 1] - v[i];
      sum += std::norm(diff);
      ++count;
    }
  };
  add_range(0, ne);
  add_range(n - ne, n);
  return count ? std::sqrt(sum / (4.0 * static_cast<double>(count))) : 0.0;
}

// Indices of the edge set used by edge_noise_sigma (for model-shape scaling).
inline std::vector<std::size_t> edge_bins(std::size_t n) {
  const std::size_t ne = std::max<std::size_t>(2, n / 6);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ne; ++i) idx.push_back(i);
  for (std::size_t i = n - ne; i < n; ++i) idx.push_back(i);
  return idx;
}

struct GnOutcome {
  bool converged = false;
  int iterations = 0;
};

// Damped Gauss-Newton on the scaled parameter vector p (modified in place).
inline GnOutcome run_gauss_newton(std::vector<double>& p, const Layout& lay,
                                  const Scaling& sc, const FitData& d,
                                  const FitOptions& opts, JointFitModel& scratch) {
  GnOutcome out;
  const std::size_t np = static_cast<std::size_t>(lay.n());
  std::vector<double> r, jac, r_trial;
  sc.unpack(p, lay, scratch);
  double cost = eval_residuals(scratch, lay, sc, d, r, nullptr);
  if (!std::isfinite(cost))
    throw std::invalid_argument("fit_joint: initial parameters are invalid "
                                "(non-finite model or gamma <= 0)");
  double lambda = 1e-3;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    ++out.iterations;
    sc.unpack(p, lay, scratch);
    eval_residuals(scratch, lay, sc, d, r, &jac);

    // Normal matrix and gradient.
    detail::SquareMatrix jtj(static_cast<int>(np));
    std::vector<double> g(np, 0.0);
    const std::size_t nr = r.size();
    for (std::size_t row = 0; row < nr; ++row) {
      const double* jrow = jac.data() + row * np;
      const double rv = r[row];
      for (std::size_t a = 0; a < np; ++a) {
        if (jrow[a] == 0.0) continue;
        g[a] += jrow[a] * rv;
        for (std::size_t b = a; b < np; ++b)
          jtj.at(static_cast<int>(a), static_cast<int>(b)) += jrow[a] * jrow[b];
      }
    }
    for (std::size_t a = 0; a < np; ++a)
      for (std::size_t b = 0; b < a; ++b)
        jtj.at(static_cast<int>(a), static_cast<int>(b)) =
            jtj.at(static_cast<int>(b), static_cast<int>(a));

    // Stationary point: nothing left to descend.
    double gmax = 0.0;
    for (double gv : g) gmax = std::max(gmax, std::abs(gv));
    if (gmax <= 1e-14 * (1.0 + cost)) {
      out.converged = true;
      break;
    }

    // Damped step, growing lambda until the cost decreases.
    bool accepted = false;
    std::vector<double> step;
    for (int tries = 0; tries < 40; ++tries) {
      detail::SquareMatrix damped = jtj;
      for (std::size_t a = 0; a < np; ++a) {
        const double dg = jtj.at(static_cast<int>(a), static_cast<int>(a));
        damped.at(static_cast<int>(a), static_cast<int>(a)) = dg * (1.0 + lambda);
      }
      detail::SquareMatrix chol;
      if (!detail::cholesky(damped, chol)) {
        lambda *= 3.0;
        continue;
      }
      std::vector<double> rhs(np);
      for (std::size_t a = 0; a < np; ++a) rhs[a] = -g[a];
      step = detail::cholesky_solve(chol, rhs);
      std::vector<double> trial(p);
      for (std::size_t a = 0; a < np; ++a) trial[a] += step[a];
      sc.unpack(trial, lay, scratch);
      const double trial_cost = eval_residuals(scratch, lay, sc, d, r_trial, nullptr);
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        p = std::move(trial);
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-14);
        accepted = true;
        break;
      }
      lambda *= 3.0;
    }

    if (!accepted) {
      // No descent direction at any damping: either a zero-Jacobian column
      // (unidentifiable parameter) or numerical stagnation at the optimum.
      std::vector<std::string> dead;
      const std::vector<std::string> names = lay.names();
      for (std::size_t a = 0; a < np; ++a)
        if (jtj.at(static_cast<int>(a), static_cast<int>(a)) == 0.0)
          dead.push_back(names[a]);
      if (!dead.empty()) {
        std::string list;
        for (const auto& s : dead) list += (list.empty() ? "" : ", ") + s;
        throw std::runtime_error(
            "degenerate fit: parameter(s) unidentifiable (zero sensitivity): " + list);
      }
      out.converged = gmax <= 1e-6 * (1.0 + cost);
      break;
    }

    double rel_step = 0.0;
    for (std::size_t a = 0; a < np; ++a)
      rel_step = std::max(rel_step, std::abs(step[a]) / (std::abs(p[a]) + 1.0));
    if (rel_step < opts.relative_step_tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

} // namespace detail_fit

// Divide a driven coherent record by the known drive amplitude, turning it
// into a transduction spectrum (units W/N for W-valued data). Fitting the
// normalized record makes |c_k| directly the per-line transduction, which
// the sensitivity analysis divides out of the noise PSD.
inline ComplexSpectrum normalize_by_drive(const ComplexSpectrum& s, double f0) {
  detail::require(f0 > 0.0, "normalize_by_drive: drive amplitude must be > 0 (got " +
                                detail::num(f0) + ")");
  ComplexSpectrum out = s;
  for (auto& v : out.values) v /= f0;
  return out;
}

// Equal-weight average of two PSDs on the same grid (e.g. the undriven
// spectrum and a far-off-resonance driven spectrum). The combined n_avg is
// the variance-equivalent count 4/(1/n_a + 1/n_b).
inline PowerSpectrum merge_equal_weight(const PowerSpectrum& a,
                                        const PowerSpectrum& b) {
  a.validate();
  b.validate();
  detail::require(a.freqs.size() == b.freqs.size(),
                  "merge_equal_weight: grids differ in size");
  for (std::size_t i = 0; i < a.freqs.size(); ++i)
    detail::require(std::abs(a.freqs[i] - b.freqs[i]) <= 1e-9 * a.spacing(),
                    "merge_equal_weight: grids differ");
  PowerSpectrum out = a;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = 0.5 * (a.values[i] + b.values[i]);
  out.n_avg = static_cast<int>(std::lround(
      4.0 / (1.0 / a.n_avg + 1.0 / b.n_avg)));
  return out;
}

// Starting model from the data: line center from the PSD argmax (lowest
// frequency wins ties), linewidth from the interpolated half-power width,
// floor from the grid-edge median, amplitudes read off at the line centers.
inline JointFitModel initial_guess(const ComplexSpectrum& coh,
                                   const PowerSpectrum& psd, int n_peaks = 1,
                                   double splitting = 0.0) {
  coh.validate();
  psd.validate();
  detail::require(n_peaks >= 1, "initial_guess: n_peaks must be >= 1");
  detail::require(n_peaks == 1 || splitting > 0.0,
                  "initial_guess: splitting must be > 0 for multiple lines");
  detail::require(coh.freqs.size() == psd.freqs.size(),
                  "initial_guess: spectra must share one grid");
  for (std::size_t i = 0; i < coh.freqs.size(); ++i)
    detail::require(std::abs(coh.freqs[i] - psd.freqs[i]) <= 1e-9 * psd.spacing(),
                    "initial_guess: spectra must share one grid");

  const std::vector<double>& f = psd.freqs;
  const std::vector<double>& pv = psd.values;
  const std::size_t n = f.size();

  // Floor and its spread from the outer sixth of the grid on each side.
  std::vector<double> edges;
  for (std::size_t i : detail_fit::edge_bins(n)) edges.push_back(pv[i]);
  std::sort(edges.begin(), edges.end());
  const double floor0 = edges[edges.size() / 2];
  double spread = 0.0;
  if (edges.size() >= 2) {
    double em = 0.0;
    for (double e : edges) em += e;
    em /= static_cast<double>(edges.size());
    for (double e : edges) spread += (e - em) * (e - em);
    spread = std::sqrt(spread / static_cast<double>(edges.size() - 1));
  }

  // Coherent-record evidence: magnitude profile against its grid-edge level.
  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::abs(coh.values[i]);
  std::vector<double> cedges;
  for (std::size_t i : detail_fit::edge_bins(n)) cedges.push_back(mag[i]);
  std::sort(cedges.begin(), cedges.end());
  const double cmed = cedges[cedges.size() / 2];
  double cspread = 0.0;
  if (cedges.size() >= 2) {
    double em = 0.0;
    for (double e : cedges) em += e;
    em /= static_cast<double>(cedges.size());
    for (double e : cedges) cspread += (e - em) * (e - em);
    cspread = std::sqrt(cspread / static_cast<double>(cedges.size() - 1));
  }

  // Dominant line: strongest bin of each record, lowest frequency on ties.
  std::size_t imax_p = 0, imax_c = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (pv[i] > pv[imax_p]) imax_p = i;
    if (mag[i] > mag[imax_c]) imax_c = i;
  }
  const double ann_excess = pv[imax_p] - floor0;
  const double coh_excess = mag[imax_c] - cmed;
  // The noise spectrum carries chi-squared bin noise, so three floor spreads
  // separate a line from the strongest of the floor bins. The coherent
  // magnitude has a Rayleigh-tailed background whose maximum sits further
  // above the median, so its threshold is stricter.
  const bool psd_found = ann_excess > 3.0 * spread;
  const bool coh_found = coh_excess > 5.0 * cspread && coh_excess > 0.0;
  if (!psd_found && !coh_found)
    throw std::runtime_error(
        "no resonance detected: strongest noise bin exceeds the floor by " +
        detail::num(ann_excess) + " (within 3x the floor spread " +
        detail::num(spread) + "), strongest coherent bin exceeds the edge "
        "level by " + detail::num(coh_excess) + " (within 5x the edge spread " +
        detail::num(cspread) + ")");

  // A detected coherent line locates the resonance: the driven record is
  // the calibration path and clears the stricter threshold, whereas a weak
  // noise bump's strongest bin may be a floor fluctuation elsewhere.
  const std::size_t imax = coh_found ? imax_c : imax_p;
  const double omega0 = f[imax];

  // Half-power full width by linear interpolation on each side of whichever
  // record detected the line. The squared coherent magnitude falls to half
  // its peak at the same detuning as the noise line shape.
  std::vector<double> prof;
  double prof_base;
  if (coh_found) {
    prof.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double e = std::max(mag[i] - cmed, 0.0);
      prof[i] = e * e;
    }
    prof_base = 0.0;
  } else {
    prof = pv;
    prof_base = floor0;
  }
  const double half = prof_base + (prof[imax] - prof_base) / 2.0;
  const double df = psd.spacing();
  auto cross = [&](int dir) -> double {
    std::size_t i = imax;
    while (true) {
      const std::size_t next = static_cast<std::size_t>(
          static_cast<long long>(i) + dir);
      if (next >= n) return std::abs(f[i] - omega0) + 0.5 * df;  // ran off grid
      if (prof[next] < half) {
        const double frac =
            (prof[i] - half) / std::max(prof[i] - prof[next], 1e-300);
        return std::abs(f[i] - omega0) + frac * df;
      }
      i = next;
    }
  };
  double gamma0 = cross(-1) + cross(+1);
  gamma0 = std::max(gamma0, df);

  JointFitModel m;
  m.omega_m = omega0;
  m.gamma = gamma0;
  m.splitting = splitting;
  m.floor = floor0;
  m.c.assign(static_cast<std::size_t>(n_peaks), 0.0);
  m.a_nn.assign(static_cast<std::size_t>(n_peaks), 0.0);

  // Read amplitudes at each line center, subtracting the wings of the lines
  // already assigned; h(0) = -i, so c = i * (response at center).
  const std::complex<double> rot(0.0, 1.0);
  for (int k = 0; k < n_peaks; ++k) {
    const double wk = omega0 - k * splitting;
    const double x = (wk - f.front()) / df;
    const long long ik = std::llround(x);
    if (ik < 0 || ik >= static_cast<long long>(n)) continue;  // outside grid
    const std::size_t idx = static_cast<std::size_t>(ik);
    std::complex<double> resid_c = coh.values[idx];
    double resid_p = pv[idx] - floor0;
    for (int j = 0; j < k; ++j) {
      const double wj = omega0 - j * splitting;
      resid_c -= m.c[static_cast<std::size_t>(j)] * line_response(wk - wj, gamma0);
      resid_p -= m.a_nn[static_cast<std::size_t>(j)] * line_shape(wk - wj, gamma0);
    }
    m.c[static_cast<std::size_t>(k)] = rot * resid_c;
    m.a_nn[static_cast<std::size_t>(k)] = std::max(resid_p, 0.0);
  }
  m.validate();
  return m;
}

// Joint fit of the averaged coherent record and the averaged PSD. An
// optional second PSD (equal-weight averaged) may be supplied. Throws on
// degenerate (unidentifiable) problems; non-convergence within the
// iteration budget is reported via the converged flag with the last iterate.
inline JointFitResult fit_joint(const ComplexSpectrum& coh,
                                const PowerSpectrum& psd,
                                const JointFitModel& init,
                                const FitOptions& opts = {},
                                const PowerSpectrum* extra_psd = nullptr) {
  using namespace detail_fit;
  coh.validate();
  init.validate();
  PowerSpectrum psd_used = extra_psd ? merge_equal_weight(psd, *extra_psd) : psd;
  psd_used.validate();
  detail::require(coh.freqs.size() == psd_used.freqs.size(),
                  "fit_joint: spectra must share one grid");
  for (std::size_t i = 0; i < coh.freqs.size(); ++i)
    detail::require(
        std::abs(coh.freqs[i] - psd_used.freqs[i]) <= 1e-9 * psd_used.spacing(),
        "fit_joint: spectra must share one grid");

  const std::size_t n = coh.freqs.size();
  const double span_lo = init.omega_m - coh.freqs.front();
  const double span_hi = coh.freqs.back() - init.omega_m;
  detail::require(
      span_lo >= 3.0 * init.gamma && span_hi >= 3.0 * init.gamma,
      "fit_joint: grid must cover at least 3 gamma around the resonance "
      "(covers [-" + detail::num(span_lo / init.gamma) + ", +" +
          detail::num(span_hi / init.gamma) + "] gamma)");

  Layout lay;
  lay.n_peaks = init.n_peaks();
  lay.fit_floor = init.fit_floor;
  lay.fit_splitting = init.fit_splitting;
  const std::size_t np = static_cast<std::size_t>(lay.n());
  detail::require(3 * n > np, "fit_joint: more parameters than residuals");

  // Parameter scales: linewidth-sized for frequencies, init-sized for
  // amplitudes with a floor so zero-amplitude lines stay well conditioned.
  double max_c = 0.0, max_coh = 0.0;
  for (const auto& v : init.c) max_c = std::max(max_c, std::abs(v));
  for (const auto& v : coh.values) max_coh = std::max(max_coh, std::abs(v));
  const double sigma_edge = edge_noise_sigma(coh.values);
  double amp_ref = std::max(max_c, sigma_edge);
  if (amp_ref == 0.0) amp_ref = max_coh;
  if (amp_ref == 0.0) amp_ref = 1.0;
  double nn_ref = std::max(init.floor, 0.0);
  for (double a : init.a_nn) nn_ref = std::max(nn_ref, a);
  for (double v : psd_used.values) nn_ref = std::max(nn_ref, 0.05 * v);
  if (nn_ref == 0.0) nn_ref = 1.0;

  Scaling sc;
  sc.omega_ref = coh.freqs[n / 2];
  sc.scale.assign(np, 1.0);
  sc.scale[0] = init.gamma;
  sc.scale[1] = init.gamma;
  for (int k = 0; k < lay.n_peaks; ++k) {
    const double ak = std::max(std::abs(init.c[static_cast<std::size_t>(k)]),
                               0.05 * amp_ref);
    sc.scale[static_cast<std::size_t>(lay.i_re(k))] = ak;
    sc.scale[static_cast<std::size_t>(lay.i_im(k))] = ak;
    sc.scale[static_cast<std::size_t>(lay.i_nn(k))] =
        std::max(init.a_nn[static_cast<std::size_t>(k)], 0.05 * nn_ref);
  }
  if (lay.fit_floor)
    sc.scale[static_cast<std::size_t>(lay.i_floor())] =
        std::max(init.floor, 0.05 * nn_ref);
  if (lay.fit_splitting)
    sc.scale[static_cast<std::size_t>(lay.i_split())] = init.gamma;

  FitData d;
  d.freqs = coh.freqs;
  d.coh = coh.values;
  d.psd = psd_used.values;
  d.omega_ref = sc.omega_ref;

  // Pass-one (bootstrap) weights: flat coherent sigma from the grid edges,
  // PSD sigma from the data's own chi-squared scaling value/sqrt(n_avg).
  double max_psd = 0.0;
  for (double v : psd_used.values) max_psd = std::max(max_psd, v);
  const double coh_sigma0 = std::max(sigma_edge, 1e-9 * max_coh);
  d.wc.assign(n, coh_sigma0 > 0.0 ? 1.0 / coh_sigma0 : 1.0);
  d.wp.assign(n, 1.0);
  const double sqrt_navg = std::sqrt(static_cast<double>(psd_used.n_avg));
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::max(psd_used.values[i], 0.05 * max_psd);
    d.wp[i] = s > 0.0 ? sqrt_navg / s : 1.0;
  }

  JointFitModel work = init;
  std::vector<double> p = sc.pack(init, lay);
  JointFitResult res;
  res.tau = two_pi / coh.spacing();

  GnOutcome gn;
  const int passes = std::max(1, opts.weight_passes);
  for (int pass = 0; pass < passes; ++pass) {
    if (pass > 0) {
      // Freeze per-bin sigmas from the fitted model: PSD sigma is
      // model/sqrt(n_avg); the coherent sigma keeps the edge-estimated
      // magnitude but follows the model's spectral shape (the noise on the
      // averaged record is proportional to sqrt of the underlying PSD).
      sc.unpack(p, lay, work);
      std::vector<double> pm(n);
      double pm_max = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        pm[i] = work.psd_model(d.freqs[i]);
        pm_max = std::max(pm_max, pm[i]);
      }
      const double pm_floor = std::max(1e-9 * pm_max, 1e-300);
      double pm_edge = 0.0;
      const auto eb = edge_bins(n);
      for (std::size_t i : eb) pm_edge += std::max(pm[i], pm_floor);
      pm_edge /= static_cast<double>(eb.size());
      for (std::size_t i = 0; i < n; ++i) {
        const double pmi = std::max(pm[i], pm_floor);
        d.wp[i] = sqrt_navg / pmi;
        if (sigma_edge > 0.0)
          d.wc[i] = 1.0 / (sigma_edge * std::sqrt(pmi / pm_edge));
      }
    }
    gn = run_gauss_newton(p, lay, sc, d, opts, work);
    res.iterations += gn.iterations;
  }
  res.converged = gn.converged;

  // Final state, covariance, and diagnostics at the last iterate.
  sc.unpack(p, lay, work);
  res.model = work;
  res.param_names = lay.names();
  res.param_values.resize(np);
  res.param_values[0] = work.omega_m;
  res.param_values[1] = work.gamma;
  for (int k = 0; k < lay.n_peaks; ++k) {
    res.param_values[static_cast<std::size_t>(lay.i_re(k))] =
        work.c[static_cast<std::size_t>(k)].real();
    res.param_values[static_cast<std::size_t>(lay.i_im(k))] =
        work.c[static_cast<std::size_t>(k)].imag();
    res.param_values[static_cast<std::size_t>(lay.i_nn(k))] =
        work.a_nn[static_cast<std::size_t>(k)];
  }
  if (lay.fit_floor)
    res.param_values[static_cast<std::size_t>(lay.i_floor())] = work.floor;
  if (lay.fit_splitting)
    res.param_values[static_cast<std::size_t>(lay.i_split())] = work.splitting;

  std::vector<double> r, jac;
  res.chi2 = eval_residuals(work, lay, sc, d, r, &jac);
  res.n_residuals = static_cast<int>(r.size());
  res.n_parameters = static_cast<int>(np);
  double crms = 0.0, prms = 0.0;
  for (std::size_t i = 0; i < 2 * n; ++i) crms += r[i] * r[i];
  for (std::size_t i = 2 * n; i < 3 * n; ++i) prms += r[i] * r[i];
  res.coherent_rms = std::sqrt(crms / static_cast<double>(2 * n));
  res.psd_rms = std::sqrt(prms / static_cast<double>(n));

  detail::SquareMatrix jtj(static_cast<int>(np));
  for (std::size_t row = 0; row < r.size(); ++row) {
    const double* jrow = jac.data() + row * np;
    for (std::size_t a = 0; a < np; ++a) {
      if (jrow[a] == 0.0) continue;
      for (std::size_t b = a; b < np; ++b)
        jtj.at(static_cast<int>(a), static_cast<int>(b)) += jrow[a] * jrow[b];
    }
  }
  for (std::size_t a = 0; a < np; ++a)
    for (std::size_t b = 0; b < a; ++b)
      jtj.at(static_cast<int>(a), static_cast<int>(b)) =
          jtj.at(static_cast<int>(b), static_cast<int>(a));

  detail::SquareMatrix chol;
  if (!detail::cholesky(jtj, chol)) {
    // Identify the offending direction: the first pivot where the
    // factorization broke is the parameter that no longer adds information.
    std::string worst = "unknown";
    for (std::size_t a = 0; a < np; ++a) {
      detail::SquareMatrix sub(static_cast<int>(a) + 1);
      for (std::size_t i = 0; i <= a; ++i)
        for (std::size_t j = 0; j <= a; ++j)
          sub.at(static_cast<int>(i), static_cast<int>(j)) =
              jtj.at(static_cast<int>(i), static_cast<int>(j));
      detail::SquareMatrix lsub;
      if (!detail::cholesky(sub, lsub)) {
        worst = res.param_names[a];
        break;
      }
    }
    throw std::runtime_error(
        "degenerate fit: normal matrix is singular; parameter '" + worst +
        "' is unidentifiable from the data");
  }
  const int dof = res.n_residuals - res.n_parameters;
  detail::require(dof > 0, "fit_joint: no degrees of freedom left");
  res.chi2_reduced = res.chi2 / static_cast<double>(dof);
  detail::SquareMatrix inv = detail::cholesky_inverse(chol);
  res.covariance = detail::SquareMatrix(static_cast<int>(np));
  res.param_errors.resize(np);
  for (std::size_t a = 0; a < np; ++a) {
    for (std::size_t b = 0; b < np; ++b)
      res.covariance.at(static_cast<int>(a), static_cast<int>(b)) =
          inv.at(static_cast<int>(a), static_cast<int>(b)) * res.chi2_reduced *
          sc.scale[a] * sc.scale[b];
    res.param_errors[a] =
        std::sqrt(std::max(res.covariance.at(static_cast<int>(a), static_cast<int>(a)), 0.0));
  }
  return res;
}

// Cooperativity from the fitted incoherent peak: the on-resonance total PSD
// (A_NN above the shot-noise floor S_SN/2) normalized by S_SN, inverted
// through the peak-ratio relation; uncertainty propagated linearly from the
// fitted A_NN.
inline ValueWithError estimate_cooperativity(const JointFitResult& fit,
                                             double nu, double epsilon_eff,
                                             double s_sn) {
  detail::require(fit.converged, "estimate_cooperativity: fit did not converge");
  detail::require(s_sn > 0.0, "estimate_cooperativity: s_sn must be > 0");
  const double ann0 = fit.model.a_nn[0];
  const double ratio = (ann0 + s_sn / 2.0) / s_sn;
  ValueWithError c;
  c.value = cooperativity_from_peak(ratio, nu, epsilon_eff);
  const double a = nu + 0.5;
  const double disc = a * a + (2.0 * ratio - 1.0) / (4.0 * epsilon_eff);
  const double sigma_ratio = fit.error("a_nn0") / s_sn;
  c.error = sigma_ratio / (4.0 * epsilon_eff * std::sqrt(disc));
  return c;
}

} // namespace yf::fitting
