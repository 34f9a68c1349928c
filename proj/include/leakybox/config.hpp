#pragma once

// Run configuration: a sectioned key = value text format with strict
// parsing. Unknown sections or keys, duplicate keys, malformed numbers and
// missing required fields are all errors addressed by line and field path.
// '#' starts a comment.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "leakybox/dynamics.hpp"
#include "leakybox/ssr.hpp"

namespace leakybox {

enum class StateKind { kNumber, kCsib, kGaussian, kPoisson, kPhaseAvg };

struct StateSpec {
  StateKind kind = StateKind::kCsib;
  int n = 0;                 // number
  double alpha_mag = 1.0;    // csib
  double alpha_phase = 0.0;  // csib
  double mean = 0.0;         // gaussian, poisson
  double fano = 1.0;         // gaussian; 0 selects the number-state limit
  double phase_slope = 0.0;  // gaussian
  double magnitude = 0.0;    // phase_avg
  std::optional<int> quadrature_points;  // phase_avg

  double nominal_mean() const {
    switch (kind) {
      case StateKind::kNumber: return n;
      case StateKind::kCsib: return alpha_mag * alpha_mag;
      case StateKind::kGaussian: return mean;
      case StateKind::kPoisson: return mean;
      case StateKind::kPhaseAvg: return magnitude * magnitude;
    }
    return 0.0;
  }
};

struct PhysicsSettings {
  double coupling_lambda_sq = 1.0;
  double wall_volume_v = 1.0;
  double box_volume_V = 1.0;
  double condensate_fraction = 1.0;
  double order_unity_K = 1.0;
  std::string mu_model = "linear";  // linear: g*n | sqrt: g*sqrt(n) | const: g
  double mu_g = 1.0;
  std::string dos_model = "sqrt";  // const: d0 | sqrt: d0*sqrt(mu)
  double dos_d0 = 1.0 / (2.0 * M_PI);
};

struct VerifyTols {
  double order_ratio_dev = 0.5;        // |gap ratio - 4|
  double channel_vs_generator = 1e-10;
  double single_step = 5e-6;           // 5*(j dt)^2 at j dt = 1e-3
  double single_step_ratio_dev = 0.5;
  double eigenrelation = 1e-9;
  double ssr_norm_deficit = 1e-8;
  double ssr_offdiag = 1e-12;
  double ssr_poisson_tv = 1e-10;
  double ssr_phase_avg = 1e-10;
  double ssr_env_invariance = 1e-12;
};

struct SweepEntry {
  std::string path;  // dotted numeric field, e.g. "physics.box_volume_V"
  std::vector<double> values;
};

struct SweepSpec {
  int cap = 1024;
  std::vector<SweepEntry> grid;  // outer loop first, file order
};

struct RunConfig {
  StateSpec state;
  PhysicsSettings physics;
  double safety_c = 0.01;
  std::optional<double> energy_cutoff_Ec;
  double t_end = 0.0;
  bool density_update = false;
  int record_every = 1;
  std::optional<int> n_max;
  std::string out_csv = "timeseries.csv";
  std::string out_summary = "summary.json";
  std::string out_verify = "verify.json";
  std::string out_sweep = "sweep.csv";
  TwoBoxConfig ssr;
  VerifyTols verify;
  std::optional<SweepSpec> sweep;
  std::string source_text;  // verbatim, for reproducible round trips

  int resolved_n_max() const {
    if (n_max) return *n_max;
    return default_n_max(state.nominal_mean());
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& v, const std::string& where,
                           int line) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw config_error("line " + std::to_string(line) + ": " + where +
                       ": not a number: '" + v + "'");
  return x;
}

inline int parse_int(const std::string& v, const std::string& where,
                     int line) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw config_error("line " + std::to_string(line) + ": " + where +
                       ": not an integer: '" + v + "'");
  return static_cast<int>(x);
}

inline bool parse_bool(const std::string& v, const std::string& where,
                       int line) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw config_error("line " + std::to_string(line) + ": " + where +
                     ": expected true or false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& v,
                                      const std::string& where, int line) {
  std::vector<double> out;
  std::string cur;
  for (std::size_t i = 0; i <= v.size(); ++i) {
    if (i == v.size() || v[i] == ',') {
      const std::string item = trim(cur);
      if (item.empty())
        throw config_error("line " + std::to_string(line) + ": " + where +
                           ": empty list element");
      out.push_back(parse_double(item, where, line));
      cur.clear();
    } else {
      cur += v[i];
    }
  }
  return out;
}

struct NumericField {
  const char* path;
  void (*set)(RunConfig&, double);
};

// Fields a sweep grid may range over.
inline const std::vector<NumericField>& numeric_fields() {
  static const std::vector<NumericField> fields = {
      {"state.n", [](RunConfig& c, double v) { c.state.n = int(v); }},
      {"state.alpha_mag", [](RunConfig& c, double v) { c.state.alpha_mag = v; }},
      {"state.alpha_phase",
       [](RunConfig& c, double v) { c.state.alpha_phase = v; }},
      {"state.mean", [](RunConfig& c, double v) { c.state.mean = v; }},
      {"state.fano", [](RunConfig& c, double v) { c.state.fano = v; }},
      {"state.phase_slope",
       [](RunConfig& c, double v) { c.state.phase_slope = v; }},
      {"state.magnitude", [](RunConfig& c, double v) { c.state.magnitude = v; }},
      {"state.n_max", [](RunConfig& c, double v) { c.n_max = int(v); }},
      {"physics.coupling_lambda_sq",
       [](RunConfig& c, double v) { c.physics.coupling_lambda_sq = v; }},
      {"physics.wall_volume_v",
       [](RunConfig& c, double v) { c.physics.wall_volume_v = v; }},
      {"physics.box_volume_V",
       [](RunConfig& c, double v) { c.physics.box_volume_V = v; }},
      {"physics.condensate_fraction",
       [](RunConfig& c, double v) { c.physics.condensate_fraction = v; }},
      {"physics.order_unity_K",
       [](RunConfig& c, double v) { c.physics.order_unity_K = v; }},
      {"physics.mu_g", [](RunConfig& c, double v) { c.physics.mu_g = v; }},
      {"physics.dos_d0", [](RunConfig& c, double v) { c.physics.dos_d0 = v; }},
      {"policy.safety_c", [](RunConfig& c, double v) { c.safety_c = v; }},
      {"run.t_end", [](RunConfig& c, double v) { c.t_end = v; }},
  };
  return fields;
}

inline void apply_numeric_field(RunConfig& cfg, const std::string& path,
                                double value) {
  for (const auto& f : numeric_fields()) {
    if (path == f.path) {
      f.set(cfg, value);
      return;
    }
  }
  throw config_error("sweep: unknown or non-numeric field '" + path + "'");
}

inline bool is_numeric_field(const std::string& path) {
  for (const auto& f : numeric_fields())
    if (path == f.path) return true;
  return false;
}

}  // namespace detail

/// Parse the configuration text. Throws config_error with the offending
/// line and field path on any problem.
inline RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  cfg.source_text = text;

  std::string section;
  std::set<std::string> seen_keys;
  std::vector<double> env_re, env_im;
  bool have_kind = false, have_t_end = false;
  int env_re_line = 0, env_im_line = 0;

  std::vector<std::string> lines;
  {
    std::string cur;
    for (char c : text) {
      if (c == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    lines.push_back(cur);
  }

  for (int li = 0; li < static_cast<int>(lines.size()); ++li) {
    const int line = li + 1;
    std::string raw = lines[li];
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    const std::string s = detail::trim(raw);
    if (s.empty()) continue;

    if (s.front() == '[') {
      if (s.back() != ']')
        throw config_error("line " + std::to_string(line) +
                           ": malformed section header");
      section = s.substr(1, s.size() - 2);
      static const std::set<std::string> known = {
          "state", "physics", "policy", "run", "output", "ssr", "verify",
          "sweep"};
      if (!known.count(section))
        throw config_error("line " + std::to_string(line) +
                           ": unknown section [" + section + "]");
      continue;
    }

    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(line) +
                         ": expected key = value");
    if (section.empty())
      throw config_error("line " + std::to_string(line) +
                         ": key outside any [section]");
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string val = detail::trim(s.substr(eq + 1));
    const std::string path = section + "." + key;
    if (val.empty())
      throw config_error("line " + std::to_string(line) + ": " + path +
                         ": empty value");
    if (!seen_keys.insert(path).second)
      throw config_error("line " + std::to_string(line) + ": duplicate key " +
                         path);

    using detail::parse_bool;
    using detail::parse_double;
    using detail::parse_int;
    using detail::parse_list;

    if (section == "sweep") {
      if (key == "cap") {
        if (!cfg.sweep) cfg.sweep.emplace();
        cfg.sweep->cap = parse_int(val, path, line);
        if (cfg.sweep->cap < 0)
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": cap must be >= 0");
      } else {
        if (!detail::is_numeric_field(key))
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": '" + key + "' is not a sweepable numeric field");
        if (!cfg.sweep) cfg.sweep.emplace();
        cfg.sweep->grid.push_back({key, parse_list(val, path, line)});
      }
      continue;
    }

    if (section == "state") {
      if (key == "kind") {
        have_kind = true;
        if (val == "number") cfg.state.kind = StateKind::kNumber;
        else if (val == "csib") cfg.state.kind = StateKind::kCsib;
        else if (val == "gaussian") cfg.state.kind = StateKind::kGaussian;
        else if (val == "poisson") cfg.state.kind = StateKind::kPoisson;
        else if (val == "phase_avg") cfg.state.kind = StateKind::kPhaseAvg;
        else
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": unknown state kind '" + val + "'");
      } else if (key == "n") {
        cfg.state.n = parse_int(val, path, line);
        if (cfg.state.n < 0)
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": must be >= 0");
      } else if (key == "alpha_mag") {
        cfg.state.alpha_mag = parse_double(val, path, line);
        if (cfg.state.alpha_mag < 0)
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": must be >= 0");
      } else if (key == "alpha_phase") {
        cfg.state.alpha_phase = parse_double(val, path, line);
      } else if (key == "mean") {
        cfg.state.mean = parse_double(val, path, line);
        if (cfg.state.mean < 0)
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": must be >= 0");
      } else if (key == "fano") {
        cfg.state.fano = parse_double(val, path, line);
        if (cfg.state.fano < 0)
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": must be > 0 (or 0 for the number-state limit)");
      } else if (key == "phase_slope") {
        cfg.state.phase_slope = parse_double(val, path, line);
      } else if (key == "magnitude") {
        cfg.state.magnitude = parse_double(val, path, line);
        if (cfg.state.magnitude < 0)
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": must be >= 0");
      } else if (key == "quadrature_points") {
        cfg.state.quadrature_points = parse_int(val, path, line);
      } else if (key == "n_max") {
        cfg.n_max = parse_int(val, path, line);
        if (*cfg.n_max < 1)
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": must be >= 1");
      } else {
        throw config_error("line " + std::to_string(line) + ": unknown key " +
                           path);
      }
    } else if (section == "physics") {
      auto positive = [&](double v) {
        if (!(v > 0))
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": must be > 0");
        return v;
      };
      if (key == "coupling_lambda_sq")
        cfg.physics.coupling_lambda_sq = positive(parse_double(val, path, line));
      else if (key == "wall_volume_v")
        cfg.physics.wall_volume_v = positive(parse_double(val, path, line));
      else if (key == "box_volume_V")
        cfg.physics.box_volume_V = positive(parse_double(val, path, line));
      else if (key == "condensate_fraction") {
        cfg.physics.condensate_fraction = parse_double(val, path, line);
        if (!(cfg.physics.condensate_fraction > 0) ||
            cfg.physics.condensate_fraction > 1)
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": must be in (0,1]");
      } else if (key == "order_unity_K")
        cfg.physics.order_unity_K = positive(parse_double(val, path, line));
      else if (key == "mu_model") {
        if (val != "linear" && val != "sqrt" && val != "const")
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": expected linear|sqrt|const");
        cfg.physics.mu_model = val;
      } else if (key == "mu_g")
        cfg.physics.mu_g = positive(parse_double(val, path, line));
      else if (key == "dos_model") {
        if (val != "const" && val != "sqrt")
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": expected const|sqrt");
        cfg.physics.dos_model = val;
      } else if (key == "dos_d0")
        cfg.physics.dos_d0 = positive(parse_double(val, path, line));
      else
        throw config_error("line " + std::to_string(line) + ": unknown key " +
                           path);
    } else if (section == "policy") {
      if (key == "safety_c") {
        cfg.safety_c = parse_double(val, path, line);
        if (!(cfg.safety_c > 0) || cfg.safety_c > 0.1)
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": must be in (0, 0.1]");
      } else if (key == "energy_cutoff_Ec") {
        cfg.energy_cutoff_Ec = parse_double(val, path, line);
        if (!(*cfg.energy_cutoff_Ec > 0))
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": must be > 0");
      } else {
        throw config_error("line " + std::to_string(line) + ": unknown key " +
                           path);
      }
    } else if (section == "run") {
      if (key == "t_end") {
        have_t_end = true;
        cfg.t_end = parse_double(val, path, line);
        if (!(cfg.t_end > 0))
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": must be > 0");
      } else if (key == "density_update") {
        cfg.density_update = parse_bool(val, path, line);
      } else if (key == "record_every") {
        cfg.record_every = parse_int(val, path, line);
        if (cfg.record_every < 1)
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": must be >= 1");
      } else {
        throw config_error("line " + std::to_string(line) + ": unknown key " +
                           path);
      }
    } else if (section == "output") {
      if (key == "csv") cfg.out_csv = val;
      else if (key == "summary") cfg.out_summary = val;
      else if (key == "verify") cfg.out_verify = val;
      else if (key == "sweep") cfg.out_sweep = val;
      else
        throw config_error("line " + std::to_string(line) + ": unknown key " +
                           path);
    } else if (section == "ssr") {
      if (key == "n_total") {
        cfg.ssr.n_total = parse_int(val, path, line);
        if (cfg.ssr.n_total < 1)
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": must be >= 1");
      } else if (key == "alpha_mag")
        cfg.ssr.alpha_mag = parse_double(val, path, line);
      else if (key == "alpha_phase")
        cfg.ssr.alpha_phase = parse_double(val, path, line);
      else if (key == "alpha_prime_mag")
        cfg.ssr.alpha_prime_mag = parse_double(val, path, line);
      else if (key == "env_coeffs_re") {
        env_re = parse_list(val, path, line);
        env_re_line = line;
      } else if (key == "env_coeffs_im") {
        env_im = parse_list(val, path, line);
        env_im_line = line;
      } else
        throw config_error("line " + std::to_string(line) + ": unknown key " +
                           path);
    } else if (section == "verify") {
      auto tol = [&](double VerifyTols::*member) {
        const double v = parse_double(val, path, line);
        if (!(v > 0))
          throw config_error("line " + std::to_string(line) + ": " + path +
                             ": tolerance must be > 0");
        cfg.verify.*member = v;
      };
      if (key == "tol_order_ratio_dev") tol(&VerifyTols::order_ratio_dev);
      else if (key == "tol_channel_vs_generator")
        tol(&VerifyTols::channel_vs_generator);
      else if (key == "tol_single_step") tol(&VerifyTols::single_step);
      else if (key == "tol_single_step_ratio_dev")
        tol(&VerifyTols::single_step_ratio_dev);
      else if (key == "tol_eigenrelation") tol(&VerifyTols::eigenrelation);
      else if (key == "tol_ssr_norm_deficit") tol(&VerifyTols::ssr_norm_deficit);
      else if (key == "tol_ssr_offdiag") tol(&VerifyTols::ssr_offdiag);
      else if (key == "tol_ssr_poisson_tv") tol(&VerifyTols::ssr_poisson_tv);
      else if (key == "tol_ssr_phase_avg") tol(&VerifyTols::ssr_phase_avg);
      else if (key == "tol_ssr_env_invariance")
        tol(&VerifyTols::ssr_env_invariance);
      else
        throw config_error("line " + std::to_string(line) + ": unknown key " +
                           path);
    }
  }

  if (!env_re.empty() || !env_im.empty()) {
    if (env_im.empty()) env_im.assign(env_re.size(), 0.0);
    if (env_re.empty())
      throw config_error("line " + std::to_string(env_im_line) +
                         ": ssr.env_coeffs_im given without env_coeffs_re");
    if (env_re.size() != env_im.size())
      throw config_error("line " + std::to_string(env_re_line) +
                         ": ssr.env_coeffs_re and env_coeffs_im lengths differ");
    cfg.ssr.env_coeffs.clear();
    for (std::size_t i = 0; i < env_re.size(); ++i)
      cfg.ssr.env_coeffs.emplace_back(env_re[i], env_im[i]);
  }

  if (!have_kind)
    throw config_error("missing required field state.kind");
  if (!have_t_end && !cfg.sweep)
    throw config_error("missing required field run.t_end");
  if (!have_t_end && cfg.sweep) {
    bool sweeps_t_end = false;
    for (const auto& e : cfg.sweep->grid)
      if (e.path == "run.t_end") sweeps_t_end = true;
    if (!sweeps_t_end)
      throw config_error("missing required field run.t_end");
  }
  return cfg;
}

/// Materialize the pluggable models.
inline PhysicsParams make_physics(const PhysicsSettings& s) {
  PhysicsParams p;
  p.coupling_lambda_sq = s.coupling_lambda_sq;
  p.wall_volume_v = s.wall_volume_v;
  p.box_volume_V = s.box_volume_V;
  p.condensate_fraction = s.condensate_fraction;
  p.order_unity_K = s.order_unity_K;
  const double g = s.mu_g;
  if (s.mu_model == "linear")
    p.mu_model = [g](double n) { return g * n; };
  else if (s.mu_model == "sqrt")
    p.mu_model = [g](double n) { return g * std::sqrt(n); };
  else
    p.mu_model = [g](double) { return g; };
  const double d0 = s.dos_d0;
  if (s.dos_model == "const")
    p.dos_model = [d0](double) { return d0; };
  else
    p.dos_model = [d0](double mu) { return d0 * std::sqrt(mu); };
  p.validate();
  return p;
}

/// Build the configured initial state. gaussian with fano = 0 is the exact
/// number-state limit.
inline DensityMatrix make_initial_state(const RunConfig& cfg) {
  const BasisSpec basis(cfg.resolved_n_max());
  switch (cfg.state.kind) {
    case StateKind::kNumber:
      return DensityMatrix::from_pure(number_state(cfg.state.n, basis));
    case StateKind::kCsib:
      return DensityMatrix::from_pure(
          csib(std::polar(cfg.state.alpha_mag, cfg.state.alpha_phase), basis));
    case StateKind::kGaussian: {
      if (cfg.state.fano == 0.0)
        return DensityMatrix::from_pure(number_state(
            static_cast<int>(std::llround(cfg.state.mean)), basis));
      GaussianNumberProfile p{cfg.state.mean, cfg.state.fano,
                              cfg.state.phase_slope};
      return DensityMatrix::from_pure(gaussian_profile_state(p, basis));
    }
    case StateKind::kPoisson:
      return poisson_mixture(cfg.state.mean, basis);
    case StateKind::kPhaseAvg: {
      const int q = cfg.state.quadrature_points
                        ? *cfg.state.quadrature_points
                        : 2 * basis.n_max + 2;
      return phase_average(cfg.state.magnitude, basis, q);
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace leakybox
