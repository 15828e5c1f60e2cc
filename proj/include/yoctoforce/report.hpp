#pragma once

// JSON report blocks. nlohmann::json keeps object keys sorted, so dumps are
// deterministic for fixed inputs (no timestamps anywhere).

#include <json.hpp>

#include <sstream>
#include <string>

#include "yoctoforce/analysis.hpp"
#include "yoctoforce/config.hpp"
#include "yoctoforce/fit.hpp"

namespace yf::io {

inline nlohmann::json json_value_error(const ValueWithError& v) {
  return {{"value", v.value}, {"error", v.error}};
}

// The full canonical configuration as key -> string value.
inline nlohmann::json json_config(const RunConfig& cfg) {
  nlohmann::json j;
  std::stringstream ss(cfg.to_text());
  std::string line;
  while (std::getline(ss, line)) {
    const std::size_t eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  j["hash"] = cfg.config_hash();
  return j;
}

inline nlohmann::json json_fit(const fitting::JointFitResult& fit) {
  nlohmann::json params;
  for (std::size_t i = 0; i < fit.param_names.size(); ++i)
    params[fit.param_names[i]] = {{"value", fit.param_values[i]},
                                  {"error", fit.param_errors[i]}};
  return {{"converged", fit.converged},
          {"iterations", fit.iterations},
          {"chi2", fit.chi2},
          {"chi2_reduced", fit.chi2_reduced},
          {"n_residuals", fit.n_residuals},
          {"n_parameters", fit.n_parameters},
          {"parameters", params}};
}

inline nlohmann::json json_sensitivity(const analysis::SensitivityPoint& p) {
  return {{"cooperativity", json_value_error(p.cooperativity)},
          {"s_ff_over_sql", json_value_error(p.s_ff_over_sql)},
          {"s_ff_abs_n2_per_hz", p.s_ff_abs},
          {"omega_m_hz", p.omega_m / two_pi},
          {"gamma_hz", p.gamma / two_pi}};
}

inline nlohmann::json json_ellipse(const analysis::CovarianceEllipse& e) {
  return {{"dz1_rms", e.dz1_rms},
          {"dz2_rms", e.dz2_rms},
          {"product", e.product()},
          {"r1", e.r1},
          {"r2", e.r2},
          {"orientation_rad", e.orientation},
          {"confidence", e.confidence},
          {"degenerate", e.degenerate}};
}

} // namespace yf::io
