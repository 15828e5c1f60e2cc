#pragma once

// Command implementations shared by the CLI and the test suites: closed-form
// theory curves, the synthesize-fit-analyze sweep over cooperativity,
// phase-space ensembles, and the self-validation run. Each returns its JSON
// report, the files written, a human-readable summary, and an exit code.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "yoctoforce/analysis.hpp"
#include "yoctoforce/config.hpp"
#include "yoctoforce/csv.hpp"
#include "yoctoforce/fit.hpp"
#include "yoctoforce/model.hpp"
#include "yoctoforce/report.hpp"
#include "yoctoforce/rng.hpp"
#include "yoctoforce/svg.hpp"
#include "yoctoforce/synth.hpp"
#include "yoctoforce/validate.hpp"

namespace yf::app {

struct RunOptions {
  std::string out_dir = "out";
  bool plots = true;       // emit SVG files
  bool emit_files = true;  // emit any files at all (tests may disable)
  std::uint64_t seed = 0;  // effective seed, resolved by the caller
};

struct CommandOutput {
  int exit_code = 0;
  nlohmann::json report;           // also written to <out_dir>/report.json
  std::vector<std::string> files;  // paths written
  std::string text;                // human-readable summary
};

namespace detail_app {

inline std::string fnum(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

inline void emit(CommandOutput& out, const RunOptions& opts,
                 const std::string& name, const std::string& content) {
  if (!opts.emit_files) return;
  const std::string path = opts.out_dir + "/" + name;
  io::write_text_file(path, content);
  out.files.push_back(path);
}

inline nlohmann::json base_report(const RunConfig& cfg,
                                  const std::string& command,
                                  std::uint64_t seed) {
  return {{"schema", "yf.report.v1"},
          {"command", command},
          {"seed", seed},
          {"config", io::json_config(cfg)}};
}

inline std::vector<std::pair<std::string, std::string>> table_meta(
    const RunConfig& cfg, std::uint64_t seed) {
  return {{"seed", std::to_string(seed)}, {"config_hash", cfg.config_hash()}};
}

inline void finish(CommandOutput& out, const RunOptions& opts) {
  emit(out, opts, "report.json", out.report.dump(2) + "\n");
  if (!out.files.empty()) {
    out.text += "wrote:";
    for (const auto& f : out.files) out.text += " " + f;
    out.text += "\n";
  }
}

// The effective seed lives in RunOptions; fold it back into the config so
// the serialized config block, its hash, and seed-derived streams all agree.
inline RunConfig with_seed(const RunConfig& cfg, std::uint64_t seed) {
  RunConfig c = cfg;
  c.synthesis_seed = seed;
  return c;
}

} // namespace detail_app

// Synthesis setup for one operating point (true cooperativity c_true).
inline synth::SynthConfig make_synth_config(const RunConfig& cfg, double c_true,
                                            std::uint64_t seed) {
  synth::SynthConfig sc;
  sc.osc = cfg.oscillator();
  sc.meas = cfg.measurement().with_cooperativity(c_true);
  sc.drive = cfg.drive(sc.osc);
  sc.ladder = cfg.ladder();
  sc.freq_grid = cfg.grid(sc.osc, sc.meas);
  sc.n_reps = static_cast<int>(cfg.synthesis_n_reps);
  sc.seed = seed;
  sc.validate();
  return sc;
}

// One full synthesize -> average -> fit -> analyze pipeline at c_true.
struct PointEstimate {
  double c_true = 0.0;
  bool ok = false;         // pipeline ran to completion
  bool converged = false;  // and the fit converged
  std::string error;       // exception text when !ok
  fitting::JointFitResult fit;
  analysis::SensitivityPoint sens;
  analysis::TheoryPull pull;
};

inline PointEstimate estimate_point(const RunConfig& cfg, double c_true,
                                    std::uint64_t seed) {
  PointEstimate pt;
  pt.c_true = c_true;
  try {
    const synth::SynthConfig sc = make_synth_config(cfg, c_true, seed);
    const auto reps = synth::synth_coherent(sc);
    const auto psd = synth::synth_noise_psd(sc);
    const auto norm =
        fitting::normalize_by_drive(synth::average(reps), sc.drive.f0);
    const auto init = fitting::initial_guess(norm, psd, sc.ladder.n_peaks,
                                             sc.ladder.splitting);
    pt.fit = fitting::fit_joint(norm, psd, init);
    pt.converged = pt.fit.converged;
    if (pt.converged) {
      pt.sens = analysis::sensitivity_on_resonance(pt.fit, sc.osc, sc.meas);
      pt.pull = analysis::pull_against_theory(pt.fit, sc.osc, sc.meas);
    }
    pt.ok = true;
  } catch (const std::exception& e) {
    pt.ok = false;
    pt.error = e.what();
  }
  return pt;
}

// Closed-form sensitivity components over cooperativity, in zero-point
// units (2 Gamma p_HO^2; the standard quantum limit is 2 in these units),
// for the ideal detector (eps = 1, nu = 0) and the configured one.
inline CommandOutput cmd_theory(const RunConfig& cfg_in, const RunOptions& opts) {
  using namespace detail_app;
  const RunConfig cfg = with_seed(cfg_in, opts.seed);
  CommandOutput out;
  const auto osc = cfg.oscillator();
  const auto meas = cfg.measurement();
  const double eps = meas.epsilon_eff, nu = osc.nu;

  io::Table t;
  t.schema = "yf.theory.v1";
  t.meta = table_meta(cfg, opts.seed);
  t.columns = {"cooperativity",      "shot_ideal_zpm",
               "backaction_zpm",     "zero_point_ideal_zpm",
               "total_ideal_zpm",    "shot_corrected_zpm",
               "thermal_corrected_zpm", "total_corrected_zpm"};
  const int n = 201;
  const double lc0 = std::log(0.05), lc1 = std::log(50.0);
  for (int i = 0; i < n; ++i) {
    const double c = std::exp(lc0 + (lc1 - lc0) * i / (n - 1.0));
    const double shot_i = 1.0 / (4.0 * c);
    const double shot_c = 1.0 / (4.0 * eps * c);
    const double th_c = 2.0 * nu + 1.0;
    t.rows.push_back({c, shot_i, c, 1.0, shot_i + 1.0 + c, shot_c, th_c,
                      shot_c + th_c + c});
  }

  const double copt_i = optimal_cooperativity(1.0);
  const double min_i = 2.0 * copt_i + 1.0;  // zpm units; /2 = over SQL
  const double copt_c = optimal_cooperativity(eps);
  const double min_c = 2.0 * copt_c + 2.0 * nu + 1.0;
  const double sql = sql_sensitivity(osc);

  out.report = base_report(cfg, "theory", opts.seed);
  out.report["theory"] = {
      {"epsilon_eff", eps},
      {"nu", nu},
      {"c_opt_ideal", copt_i},
      {"min_ideal_over_sql", min_i / 2.0},
      {"c_opt_corrected", copt_c},
      {"min_corrected_over_sql", min_c / 2.0},
      {"sql_n2_per_hz", sql},
      {"sql_yn_per_sqrt_hz", std::sqrt(sql) * 1e24}};

  out.text += "theory: sensitivity vs cooperativity (eps_eff = " +
              fnum("%.4g", eps) + ", nu = " + fnum("%.4g", nu) + ")\n";
  out.text += "  ideal detector minimum:      S/SQL = " + fnum("%.4f", min_i / 2.0) +
              " at C_om = " + fnum("%.4f", copt_i) + "\n";
  out.text += "  configured detector minimum: S/SQL = " + fnum("%.4f", min_c / 2.0) +
              " at C_om = " + fnum("%.4f", copt_c) + "\n";
  out.text += "  SQL = " + fnum("%.4g", sql) + " N^2/Hz = (" +
              fnum("%.3g", std::sqrt(sql) * 1e24) + " yN)^2/Hz\n";

  emit(out, opts, "theory.csv", t.to_csv());
  if (opts.plots) {
    io::SvgPlot plot;
    plot.title = "Force sensitivity vs measurement strength";
    plot.xlabel = "cooperativity C_om";
    plot.ylabel = "S_FF(omega_m) [2 Gamma p_HO^2]";
    plot.logx = plot.logy = true;
    io::SvgSeries tot_c, tot_i, shot, ba, th;
    for (const auto& row : t.rows) {
      tot_c.x.push_back(row[0]);
      tot_c.y.push_back(row[7]);
      tot_i.x.push_back(row[0]);
      tot_i.y.push_back(row[4]);
      shot.x.push_back(row[0]);
      shot.y.push_back(row[5]);
      ba.x.push_back(row[0]);
      ba.y.push_back(row[2]);
      th.x.push_back(row[0]);
      th.y.push_back(row[6]);
    }
    tot_c.color = "#d62728";
    tot_c.label = "total (configured)";
    tot_i.color = "#1f77b4";
    tot_i.label = "total (ideal)";
    shot.color = "#2ca02c";
    shot.dashed = true;
    shot.label = "shot noise";
    ba.color = "#9467bd";
    ba.dashed = true;
    ba.label = "back-action";
    th.color = "#8c564b";
    th.dashed = true;
    th.label = "thermal + zero-point";
    plot.series = {shot, ba, th, tot_i, tot_c};
    emit(out, opts, "theory.svg", plot.render());
  }
  finish(out, opts);
  return out;
}

// Synthesize, fit, and calibrate one operating point per cooperativity on
// the sweep grid; tabulate against the closed-form expectation.
inline CommandOutput cmd_sweep(const RunConfig& cfg_in, const RunOptions& opts) {
  using namespace detail_app;
  const RunConfig cfg = with_seed(cfg_in, opts.seed);
  CommandOutput out;
  const auto osc = cfg.oscillator();
  const auto meas = cfg.measurement();
  const auto cs = cfg.sweep_grid();

  std::vector<PointEstimate> pts;
  pts.reserve(cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i)
    pts.push_back(estimate_point(cfg, cs[i], derive_seed(opts.seed, i)));

  io::Table t;
  t.schema = "yf.sweep.v1";
  t.meta = table_meta(cfg, opts.seed);
  t.columns = {"c_true",        "c_est",         "c_est_err",
               "s_ff_over_sql", "s_ff_over_sql_err", "theory_at_c_est",
               "pull",          "s_ff_abs_n2_per_hz", "omega_m_fit_hz",
               "gamma_fit_hz",  "chi2_reduced",  "iterations",
               "converged"};
  nlohmann::json jfits = nlohmann::json::array();
  nlohmann::json jsens = nlohmann::json::array();
  nlohmann::json jfail = nlohmann::json::array();
  int n_bad = 0;
  const PointEstimate* best = nullptr;
  out.text += "sweep: " + std::to_string(cs.size()) + " points, C_om in [" +
              fnum("%.3g", cs.front()) + ", " + fnum("%.3g", cs.back()) +
              "], " + std::to_string(cfg.synthesis_n_reps) +
              " repetitions each (seed " + std::to_string(opts.seed) + ")\n";
  for (const auto& pt : pts) {
    if (!pt.ok || !pt.converged) {
      ++n_bad;
      const std::string why = pt.ok ? "fit did not converge" : pt.error;
      jfail.push_back({{"c_true", pt.c_true}, {"error", why}});
      out.text += "  C_true=" + fnum("%-7.3g", pt.c_true) + " FAILED: " + why + "\n";
      continue;
    }
    t.rows.push_back({pt.c_true, pt.sens.cooperativity.value,
                      pt.sens.cooperativity.error, pt.sens.s_ff_over_sql.value,
                      pt.sens.s_ff_over_sql.error, pt.pull.theory_at_estimate,
                      pt.pull.pull, pt.sens.s_ff_abs,
                      pt.sens.omega_m / two_pi, pt.sens.gamma / two_pi,
                      pt.fit.chi2_reduced, static_cast<double>(pt.fit.iterations),
                      1.0});
    jfits.push_back(io::json_fit(pt.fit));
    nlohmann::json js = io::json_sensitivity(pt.sens);
    js["c_true"] = pt.c_true;
    js["pull"] = pt.pull.pull;
    js["theory_at_c_est"] = pt.pull.theory_at_estimate;
    jsens.push_back(js);
    out.text += "  C_true=" + fnum("%-7.3g", pt.c_true) +
                " C_est=" + fnum("%.3g", pt.sens.cooperativity.value) + "+-" +
                fnum("%.2g", pt.sens.cooperativity.error) +
                "  S/SQL=" + fnum("%.3g", pt.sens.s_ff_over_sql.value) + "+-" +
                fnum("%.2g", pt.sens.s_ff_over_sql.error) +
                "  pull=" + fnum("%+.2f", pt.pull.pull) + "\n";
    if (!best || pt.sens.s_ff_over_sql.value < best->sens.s_ff_over_sql.value)
      best = &pt;
  }

  io::Table th;
  th.schema = "yf.sweep_theory.v1";
  th.meta = table_meta(cfg, opts.seed);
  th.columns = {"cooperativity", "s_ff_over_sql"};
  const int nth = 121;
  const double la = std::log(cs.front()), lb = std::log(cs.back());
  for (int i = 0; i < nth; ++i) {
    const double c = std::exp(la + (lb - la) * i / (nth - 1.0));
    th.rows.push_back(
        {c, force_sensitivity(osc, meas.with_cooperativity(c), osc.omega_m) /
                sql_sensitivity(osc)});
  }

  out.report = base_report(cfg, "sweep", opts.seed);
  out.report["fits"] = jfits;
  out.report["sensitivity"] = jsens;
  out.report["failures"] = jfail;
  if (best) {
    out.report["minimum"] = {
        {"c_est", best->sens.cooperativity.value},
        {"c_est_err", best->sens.cooperativity.error},
        {"s_ff_over_sql", best->sens.s_ff_over_sql.value},
        {"s_ff_over_sql_err", best->sens.s_ff_over_sql.error}};
    out.text += "minimum: S/SQL = " + fnum("%.3f", best->sens.s_ff_over_sql.value) +
                " +- " + fnum("%.3f", best->sens.s_ff_over_sql.error) +
                " at C_est = " + fnum("%.3g", best->sens.cooperativity.value) +
                " (closed form: " +
                fnum("%.3f", (2.0 * optimal_cooperativity(meas.epsilon_eff) +
                              2.0 * osc.nu + 1.0) / 2.0) +
                " at C_om = " + fnum("%.3g", optimal_cooperativity(meas.epsilon_eff)) +
                ")\n";
  }

  emit(out, opts, "sweep.csv", t.to_csv());
  emit(out, opts, "sweep_theory.csv", th.to_csv());
  if (opts.plots) {
    io::SvgPlot plot;
    plot.title = "Measured sensitivity vs cooperativity";
    plot.xlabel = "cooperativity";
    plot.ylabel = "S_FF(omega_m) / SQL";
    plot.logx = plot.logy = true;
    io::SvgSeries theory;
    for (const auto& row : th.rows) {
      theory.x.push_back(row[0]);
      theory.y.push_back(row[1]);
    }
    theory.color = "#1f77b4";
    theory.label = "closed form";
    io::SvgSeries measd;
    measd.line = false;
    measd.points = true;
    measd.color = "#d62728";
    measd.label = "estimated";
    for (const auto& row : t.rows) {
      measd.x.push_back(row[1]);  // estimated cooperativity
      measd.y.push_back(row[3]);
      measd.yerr.push_back(row[4]);
    }
    io::SvgSeries sqlline;
    sqlline.x = {cs.front(), cs.back()};
    sqlline.y = {1.0, 1.0};
    sqlline.color = "#888888";
    sqlline.dashed = true;
    sqlline.label = "SQL";
    plot.series = {sqlline, theory, measd};
    emit(out, opts, "sweep.svg", plot.render());
  }
  finish(out, opts);
  out.exit_code = n_bad > 0 ? 1 : 0;
  return out;
}

// Phase-space ensembles at the configured cooperativities: per repetition
// one quadrature pair at the fitted resonance, scaled to zero-point units,
// with covariance ellipses and uncertainty products against the bound.
inline CommandOutput cmd_phase(const RunConfig& cfg_in, const RunOptions& opts) {
  using namespace detail_app;
  const RunConfig cfg = with_seed(cfg_in, opts.seed);
  CommandOutput out;
  const auto osc = cfg.oscillator();
  const auto meas = cfg.measurement();
  const double bound =
      uncertainty_bound(osc.nu, meas.epsilon_eff, meas.tau, osc.gamma);

  io::Table summary;
  summary.schema = "yf.phase_summary.v1";
  summary.meta = table_meta(cfg, opts.seed);
  summary.columns = {"c_true",      "c_est",      "c_est_err", "n_points",
                     "mean_z1",     "mean_z2",    "dz1_rms",   "dz2_rms",
                     "product",     "product_theory", "bound",  "r1_conf",
                     "r2_conf",     "orientation_rad", "degenerate"};
  nlohmann::json jphase = nlohmann::json::array();
  int n_bad = 0;
  out.text += "phase: " + std::to_string(cfg.phase_c_points.size()) +
              " ensembles, " + std::to_string(cfg.synthesis_n_reps) +
              " repetitions each, " + fnum("%.0f", cfg.phase_confidence * 100) +
              "% ellipses (seed " + std::to_string(opts.seed) + ")\n";

  for (std::size_t i = 0; i < cfg.phase_c_points.size(); ++i) {
    const double c_true = cfg.phase_c_points[i];
    const std::string tag = "c" + std::to_string(i + 1);
    try {
      const synth::SynthConfig sc =
          make_synth_config(cfg, c_true, derive_seed(opts.seed, i));
      const auto reps = synth::synth_coherent(sc);
      const auto psd = synth::synth_noise_psd(sc);
      const auto norm =
          fitting::normalize_by_drive(synth::average(reps), sc.drive.f0);
      const auto init = fitting::initial_guess(norm, psd, sc.ladder.n_peaks,
                                               sc.ladder.splitting);
      const auto fit = fitting::fit_joint(norm, psd, init);
      if (!fit.converged) throw std::runtime_error("fit did not converge");
      const ValueWithError c_est = fitting::estimate_cooperativity(
          fit, osc.nu, meas.epsilon_eff, meas.s_sn);
      const auto ens = analysis::phase_space_points(
          reps, fit, meas.with_cooperativity(c_est.value), sc.drive.phase);
      const auto ell = analysis::covariance_ellipse(ens, cfg.phase_confidence);
      const double prod_theory =
          2.0 *
          (1.0 / (4.0 * meas.epsilon_eff * c_true) + 2.0 * osc.nu + c_true + 1.0) /
          (meas.tau * osc.gamma);

      summary.rows.push_back(
          {c_true, c_est.value, c_est.error,
           static_cast<double>(ens.points.size()), ens.mean_z1, ens.mean_z2,
           ell.dz1_rms, ell.dz2_rms, ell.product(), prod_theory, bound, ell.r1,
           ell.r2, ell.orientation, ell.degenerate ? 1.0 : 0.0});

      nlohmann::json jp = io::json_ellipse(ell);
      jp["c_true"] = c_true;
      jp["c_est"] = io::json_value_error(c_est);
      jp["mean_z1"] = ens.mean_z1;
      jp["mean_z2"] = ens.mean_z2;
      jp["n_points"] = ens.points.size();
      jp["product_theory"] = prod_theory;
      jp["bound"] = bound;
      jphase.push_back(jp);

      out.text += "  C_true=" + fnum("%-6.3g", c_true) +
                  " C_est=" + fnum("%.3g", c_est.value) +
                  "  dZ1*dZ2=" + fnum("%.3f", ell.product()) +
                  " (theory " + fnum("%.3f", prod_theory) + ", bound " +
                  fnum("%.3f", bound) + ")\n";

      io::Table tp;
      tp.schema = "yf.phase_points.v1";
      tp.meta = table_meta(cfg, opts.seed);
      tp.meta.push_back({"c_true", io::format_number(c_true)});
      tp.meta.push_back({"c_est", io::format_number(c_est.value)});
      tp.columns = {"z1", "z2"};
      for (const auto& p : ens.points) tp.rows.push_back({p[0], p[1]});
      emit(out, opts, "phase_points_" + tag + ".csv", tp.to_csv());

      if (opts.plots) {
        io::SvgPlot plot;
        plot.title = "Phase-space ensemble, C_om = " + fnum("%.3g", c_true);
        plot.xlabel = "Z1 [z_HO]";
        plot.ylabel = "Z2 [z_HO]";
        plot.equal_axes = true;
        io::SvgSeries cloud;
        cloud.line = false;
        cloud.points = true;
        cloud.color = "#1f77b4";
        for (const auto& p : ens.points) {
          cloud.x.push_back(p[0]);
          cloud.y.push_back(p[1]);
        }
        plot.series = {cloud};
        io::SvgEllipseShape es;
        es.cx = ens.mean_z1;
        es.cy = ens.mean_z2;
        es.rx = ell.r1;
        es.ry = ell.r2;
        es.angle_rad = ell.orientation;
        es.color = "#d62728";
        es.label = fnum("%.0f", cfg.phase_confidence * 100) + "% ellipse";
        plot.ellipses = {es};
        plot.crosses = {{ens.mean_z1, ens.mean_z2, "#d62728"},
                        {0.0, 0.0, "#888888"}};
        emit(out, opts, "phase_" + tag + ".svg", plot.render());
      }
    } catch (const std::exception& e) {
      ++n_bad;
      jphase.push_back({{"c_true", c_true}, {"error", e.what()}});
      out.text += "  C_true=" + fnum("%-6.3g", c_true) + " FAILED: " + e.what() + "\n";
    }
  }
  out.text += "  bound: dZ1*dZ2 >= " + fnum("%.3f", bound) +
              " (minimum at C_om = " +
              fnum("%.3g", optimal_cooperativity(meas.epsilon_eff)) + ")\n";

  out.report = base_report(cfg, "phase", opts.seed);
  out.report["phase_space"] = jphase;
  emit(out, opts, "phase_summary.csv", summary.to_csv());
  finish(out, opts);
  out.exit_code = n_bad > 0 ? 1 : 0;
  return out;
}

// Run the self-validation suite; nonzero exit if any check fails.
inline CommandOutput cmd_validate(const RunConfig& cfg_in, const RunOptions& opts) {
  using namespace detail_app;
  const RunConfig cfg = with_seed(cfg_in, opts.seed);
  CommandOutput out;
  const auto checks = validate::run_all(cfg);
  nlohmann::json jchecks = nlohmann::json::array();
  int n_fail = 0;
  for (const auto& c : checks) {
    if (!c.pass) ++n_fail;
    jchecks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    out.text += std::string(c.pass ? "[ok]   " : "[FAIL] ") + c.name + " — " +
                c.detail + "\n";
  }
  out.text += std::to_string(checks.size() - n_fail) + "/" +
              std::to_string(checks.size()) + " checks passed\n";
  out.report = base_report(cfg, "validate", opts.seed);
  out.report["validation"] = {{"checks", jchecks},
                              {"passed", checks.size() - n_fail},
                              {"failed", n_fail}};
  finish(out, opts);
  out.exit_code = n_fail > 0 ? 1 : 0;
  return out;
}

} // namespace yf::app
