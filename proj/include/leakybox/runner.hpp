#pragma once

// Configuration-driven runs: single evolutions with CSV/JSON output, the
// named verification checks, and parameter sweeps. Everything here is
// deterministic: fixed formatting, no timestamps, sweep rows in grid order
// regardless of worker count.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <vector>

#include <json.hpp>

#include "leakybox/config.hpp"

namespace leakybox {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// evolve

inline std::string render_csv(const RunRecord& rec) {
  std::string out = "t,mean_N,var_N,fano,purity,fidelity_csib,phase,j_t,mu_t\n";
  for (std::size_t i = 0; i < rec.size(); ++i) {
    out += format_full(rec.times[i]) + ',' + format_full(rec.mean_N[i]) + ',' +
           format_full(rec.var_N[i]) + ',' + format_full(rec.fano[i]) + ',' +
           format_full(rec.purity[i]) + ',' + format_full(rec.fidelity_csib[i]) +
           ',' + format_full(rec.phase[i]) + ',' + format_full(rec.j_t[i]) +
           ',' + format_full(rec.mu_t[i]) + '\n';
  }
  return out;
}

namespace detail {

// cumulative trapezoid of j over the recorded times
inline std::vector<double> integrated_rate(const RunRecord& rec) {
  std::vector<double> jint(rec.size(), 0.0);
  for (std::size_t i = 1; i < rec.size(); ++i)
    jint[i] = jint[i - 1] + 0.5 * (rec.j_t[i] + rec.j_t[i - 1]) *
                                (rec.times[i] - rec.times[i - 1]);
  return jint;
}

inline double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

}  // namespace detail

/// Residuals of the run against the closed-form expectations:
/// <N(t)> = <N(0)> e^{-int j dt} and F(t) = 1 + (F(0)-1) e^{-int j dt},
/// plus the per-row phase advance against -mu dt.
struct RunResiduals {
  double mean_decay_max_rel = 0.0;
  double fano_relax_max_abs = 0.0;
  double fano_relax_max_rel = 0.0;
  double phase_advance_max_rel = 0.0;
  std::size_t phase_rows_checked = 0;
};

inline RunResiduals analyze_record(const RunRecord& rec) {
  RunResiduals r;
  if (rec.size() < 2) return r;
  const std::vector<double> jint = detail::integrated_rate(rec);
  const double n0 = rec.mean_N[0];
  const double f0 = rec.fano[0];
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const double decay = std::exp(-jint[i]);
    const double mean_t = n0 * decay;
    r.mean_decay_max_rel = std::max(
        r.mean_decay_max_rel, std::abs(rec.mean_N[i] - mean_t) / mean_t);
    const double fano_t = 1.0 + (f0 - 1.0) * decay;
    const double abs_err = std::abs(rec.fano[i] - fano_t);
    r.fano_relax_max_abs = std::max(r.fano_relax_max_abs, abs_err);
    if (fano_t > 0.0)
      r.fano_relax_max_rel = std::max(r.fano_relax_max_rel, abs_err / fano_t);
  }
  for (std::size_t i = 0; i + 1 < rec.size(); ++i) {
    if (rec.phase_flagged[i] || rec.phase_flagged[i + 1]) continue;
    const double expect = -rec.mu_t[i] * (rec.times[i + 1] - rec.times[i]);
    if (std::abs(expect) < 1e-12) continue;
    const double got = detail::wrap_angle(rec.phase[i + 1] - rec.phase[i]);
    const double dev =
        std::abs(detail::wrap_angle(got - expect)) / std::abs(expect);
    r.phase_advance_max_rel = std::max(r.phase_advance_max_rel, dev);
    ++r.phase_rows_checked;
  }
  return r;
}

/// Least-squares slope of ln<N> over t, negated.
inline double fitted_decay_rate(const RunRecord& rec) {
  if (rec.size() < 2) return 0.0;
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double n = static_cast<double>(rec.size());
  for (std::size_t i = 0; i < rec.size(); ++i) {
    st += rec.times[i];
    sy += std::log(rec.mean_N[i]);
  }
  const double tbar = st / n, ybar = sy / n;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    stt += (rec.times[i] - tbar) * (rec.times[i] - tbar);
    sty += (rec.times[i] - tbar) * (std::log(rec.mean_N[i]) - ybar);
  }
  return stt > 0 ? -sty / stt : 0.0;
}

struct EvolveArtifacts {
  RunRecord record;
  DensityMatrix final_state;
  ordered_json summary;
};

inline EvolveArtifacts do_evolve(const RunConfig& cfg) {
  DensityMatrix rho0 = make_initial_state(cfg);

  EvolutionConfig ec;
  ec.params = make_physics(cfg.physics);
  ec.policy.safety_c = cfg.safety_c;
  ec.policy.energy_cutoff_Ec = cfg.energy_cutoff_Ec;
  ec.t_end = cfg.t_end;
  ec.density_update = cfg.density_update;
  ec.record_every = cfg.record_every;

  EvolveResult res = evolve(rho0, ec);
  if (cfg.state.kind == StateKind::kGaussian && cfg.state.fano > 0.0) {
    GaussianNumberProfile p{cfg.state.mean, cfg.state.fano,
                            cfg.state.phase_slope};
    if (auto w = profile_warning(p)) res.record.warnings.push_back(*w);
  }

  const RunRecord& rec = res.record;
  const RunResiduals resid = analyze_record(rec);

  ordered_json summary;
  summary["config_text"] = cfg.source_text;
  summary["n_max"] = cfg.resolved_n_max();
  summary["initial_tail_mass"] = rho0.discarded_tail;
  summary["rows"] = rec.size();
  summary["final"] = {{"t", rec.times.back()},
                      {"mean_N", rec.mean_N.back()},
                      {"fano", rec.fano.back()},
                      {"purity", rec.purity.back()},
                      {"fidelity_csib", rec.fidelity_csib.back()}};
  summary["purity_min"] =
      *std::min_element(rec.purity.begin(), rec.purity.end());
  summary["fidelity_min"] =
      *std::min_element(rec.fidelity_csib.begin(), rec.fidelity_csib.end());
  summary["fitted_decay_rate"] = fitted_decay_rate(rec);
  summary["residuals"] = {
      {"mean_decay_max_rel", resid.mean_decay_max_rel},
      {"fano_relax_max_abs", resid.fano_relax_max_abs},
      {"fano_relax_max_rel", resid.fano_relax_max_rel},
      {"phase_advance_max_rel", resid.phase_advance_max_rel}};
  std::size_t degenerate = 0;
  for (bool f : rec.phase_flagged) degenerate += f ? 1 : 0;
  summary["phase_degenerate_rows"] = degenerate;
  summary["warnings"] = rec.warnings;

  return EvolveArtifacts{std::move(res.record), std::move(res.final_state),
                         std::move(summary)};
}

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + p.string());
  f << s;
}

}  // namespace detail

inline int run_evolve(const RunConfig& cfg,
                      const std::filesystem::path& outdir) {
  EvolveArtifacts art = do_evolve(cfg);
  std::filesystem::create_directories(outdir);
  detail::write_file(outdir / cfg.out_csv, render_csv(art.record));
  detail::write_file(outdir / cfg.out_summary, art.summary.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// verify

struct CheckResult {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

namespace detail {

inline double max_abs_diff(const Eigen::MatrixXcd& a,
                           const Eigen::MatrixXcd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// Closed-form single step of the coherent projector: the map must
// reproduce it entrywise to O((j dt)^2).
inline Eigen::MatrixXcd csib_step_closed_form(double mean, double phi,
                                              double mu, double j, double dt,
                                              int n_max) {
  const int d = n_max + 1;
  Eigen::VectorXcd v(d);
  for (int n = 0; n < d; ++n) {
    const double logw =
        0.5 * (n * std::log(mean) - std::lgamma(n + 1.0)) +
        0.5 * n * std::log1p(-j * dt);
    v[n] = std::polar(std::exp(logw), n * (phi - mu * dt));
  }
  return std::exp(-mean * (1.0 - j * dt)) * (v * v.adjoint());
}

}  // namespace detail

/// The named verification checks with their default (pinned) tolerances.
inline std::vector<CheckResult> verify_checks(const RunConfig& cfg) {
  std::vector<CheckResult> out;
  const VerifyTols& tol = cfg.verify;

  auto push = [&](const std::string& name, double residual, double tolerance,
                  const std::string& note = "") {
    out.push_back({name, residual, tolerance, residual <= tolerance, note});
  };

  // Map vs exact channel: the gap must shrink fourfold when dt halves.
  {
    const BasisSpec basis(60);
    const DensityMatrix rho =
        DensityMatrix::from_pure(csib(std::polar(5.0, 0.4), basis, 1e-8));
    const double j = 1e-3, mu = 0.7;
    std::vector<double> gaps;
    for (double jdt : {1e-2, 5e-3, 2.5e-3}) {
      const double dt = jdt / j;
      gaps.push_back(detail::max_abs_diff(step_master(rho, mu, j, dt).rho,
                                          step_channel_oracle(rho, mu, j, dt).rho));
    }
    const double dev = std::max(std::abs(gaps[0] / gaps[1] - 4.0),
                                std::abs(gaps[1] / gaps[2] - 4.0));
    push("master_vs_channel_order", dev, tol.order_ratio_dev,
         "gap ratios " + format_full(gaps[0] / gaps[1]) + ", " +
             format_full(gaps[1] / gaps[2]));
  }

  // The two independent oracles must agree at constant parameters.
  {
    const BasisSpec basis(60);
    const DensityMatrix rho =
        DensityMatrix::from_pure(csib(std::polar(5.0, 0.4), basis, 1e-8));
    const double j = 1e-3, dt = 50.0, mu = 0.01;  // j dt = 0.05, mu dt = 0.5
    const double gap = detail::max_abs_diff(
        step_channel_oracle(rho, mu, j, dt).rho,
        step_generator_oracle(rho, mu, j, dt, 1000).rho);
    push("channel_vs_generator", gap, tol.channel_vs_generator);
  }

  // One map application to the coherent projector vs the closed form.
  {
    const int n_max = 60;
    const double mean = 25.0, phi = 0.4, mu = 1.3, j = 1e-3;
    const BasisSpec basis(n_max);
    const DensityMatrix rho = DensityMatrix::from_pure(
        csib(std::polar(std::sqrt(mean), phi), basis, 1e-8));
    auto residual_at = [&](double jdt) {
      const double dt = jdt / j;
      return detail::max_abs_diff(
          step_master(rho, mu, j, dt).rho,
          detail::csib_step_closed_form(mean, phi, mu, j, dt, n_max));
    };
    const double r1 = residual_at(1e-3);
    const double r2 = residual_at(5e-4);
    push("single_step_literal", r1, tol.single_step);
    push("single_step_order", std::abs(r1 / r2 - 4.0),
         tol.single_step_ratio_dev, "halving ratio " + format_full(r1 / r2));
  }

  // Ladder eigenvalue relation at the default truncation.
  {
    const std::vector<cd> alphas = {cd(1.0, 0.0), std::polar(2.0, M_PI / 4.0),
                                    cd(std::sqrt(30.0), 0.0)};
    double worst = 0.0;
    std::string note;
    for (const cd& alpha : alphas) {
      const double a = std::abs(alpha);
      const BasisSpec basis(default_n_max(a * a));
      // no tail gate: the point is to measure the truncation residual
      const PureState psi = detail::csib_amplitudes(alpha, basis);
      const PureState low = lowering_apply(psi);
      const double res = (low.amp - alpha * psi.amp).norm();
      worst = std::max(worst, res);
      note += (note.empty() ? "" : "; ") + format_full(res);
    }
    push("eigenrelation_csib", worst, tol.eigenrelation, note);
  }

  // SSR suite on the configured two-box state.
  {
    TotalStateBuild built = build_total_state_report(cfg.ssr);
    push("ssr_norm_deficit", built.norm_deficit, tol.ssr_norm_deficit);

    const DensityMatrix red = reduce_to_box_one(built.state);
    const int d = red.basis.dim();
    double offdiag = 0.0;
    for (int n = 0; n < d; ++n)
      for (int m = 0; m < d; ++m)
        if (n != m) offdiag = std::max(offdiag, std::abs(red.rho(n, m)));
    push("ssr_offdiag", offdiag, tol.ssr_offdiag);

    const DensityMatrix pm =
        poisson_mixture(cfg.ssr.alpha_mag * cfg.ssr.alpha_mag, red.basis);
    double tv = 0.0;
    for (int n = 0; n < d; ++n)
      tv += 0.5 * std::abs(red.rho(n, n).real() - pm.rho(n, n).real());
    push("ssr_vs_poisson_tv", tv, tol.ssr_poisson_tv);

    const DensityMatrix pa =
        phase_average(cfg.ssr.alpha_mag, red.basis, 2 * red.basis.n_max + 2);
    push("ssr_vs_phase_average", detail::max_abs_diff(red.rho, pa.rho),
         tol.ssr_phase_avg);

    TwoBoxConfig alt = cfg.ssr;
    alt.env_coeffs = {cd(1.0 / std::sqrt(2.0), 0.0),
                      cd(0.0, 1.0 / std::sqrt(2.0))};
    const DensityMatrix red2 =
        reduce_to_box_one(build_total_state_report(alt).state);
    push("ssr_env_invariance", detail::max_abs_diff(red.rho, red2.rho),
         tol.ssr_env_invariance);
  }

  return out;
}

inline ordered_json verify_report(const std::vector<CheckResult>& checks) {
  ordered_json j;
  j["checks"] = ordered_json::array();
  bool all = true;
  for (const auto& c : checks) {
    ordered_json e;
    e["name"] = c.name;
    e["residual"] = c.residual;
    e["tolerance"] = c.tolerance;
    e["pass"] = c.pass;
    if (!c.note.empty()) e["note"] = c.note;
    j["checks"].push_back(e);
    all = all && c.pass;
  }
  j["all_pass"] = all;
  return j;
}

inline int run_verify(const RunConfig& cfg, const std::filesystem::path& outdir,
                      std::FILE* stream = stdout) {
  const std::vector<CheckResult> checks = verify_checks(cfg);
  std::filesystem::create_directories(outdir);
  detail::write_file(outdir / cfg.out_verify,
                     verify_report(checks).dump(2) + "\n");
  bool all = true;
  for (const auto& c : checks) {
    std::fprintf(stream, "%-26s %s  residual=%s tol=%s%s%s\n", c.name.c_str(),
                 c.pass ? "PASS" : "FAIL", format_full(c.residual).c_str(),
                 format_full(c.tolerance).c_str(), c.note.empty() ? "" : "  ",
                 c.note.c_str());
    all = all && c.pass;
  }
  return all ? 0 : 3;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepPoint {
  std::vector<double> values;  // one per grid entry, grid order
  RunConfig config;
};

inline std::vector<SweepPoint> expand_sweep(const RunConfig& base) {
  if (!base.sweep) throw config_error("sweep: no [sweep] section in config");
  const SweepSpec& spec = *base.sweep;
  if (spec.grid.empty()) return {};
  std::size_t total = 1;
  for (const auto& e : spec.grid) {
    total *= e.values.size();
    if (total > static_cast<std::size_t>(spec.cap))
      throw config_error("sweep: grid has more than cap = " +
                         std::to_string(spec.cap) + " points");
  }
  // Lexicographic order over the grid: first field most significant,
  // values in listed order.
  std::vector<SweepPoint> points;
  points.reserve(total);
  for (std::size_t t = 0; t < total; ++t) {
    std::vector<double> vals(spec.grid.size());
    std::size_t rem = t;
    for (std::size_t k = spec.grid.size(); k-- > 0;) {
      const auto& e = spec.grid[k];
      vals[k] = e.values[rem % e.values.size()];
      rem /= e.values.size();
    }
    SweepPoint p{{}, base};
    for (std::size_t k = 0; k < spec.grid.size(); ++k) {
      p.values.push_back(vals[k]);
      detail::apply_numeric_field(p.config, spec.grid[k].path, vals[k]);
    }
    points.push_back(std::move(p));
  }
  return points;
}

inline std::string sweep_csv_header(const SweepSpec& spec) {
  std::string h;
  for (const auto& e : spec.grid) h += e.path + ',';
  h +=
      "final_mean_N,final_fano,final_purity,fitted_decay_rate,"
      "mean_decay_max_rel_residual,fano_relax_max_abs_residual\n";
  return h;
}

inline std::string sweep_row(const SweepPoint& p) {
  EvolveArtifacts art = do_evolve(p.config);
  const RunRecord& rec = art.record;
  const RunResiduals resid = analyze_record(rec);
  std::string row;
  for (double v : p.values) row += format_full(v) + ',';
  row += format_full(rec.mean_N.back()) + ',' + format_full(rec.fano.back()) +
         ',' + format_full(rec.purity.back()) + ',' +
         format_full(fitted_decay_rate(rec)) + ',' +
         format_full(resid.mean_decay_max_rel) + ',' +
         format_full(resid.fano_relax_max_abs) + '\n';
  return row;
}

/// Runs grid points (concurrently when jobs > 1) and writes one row per
/// point in deterministic grid order.
inline int run_sweep(const RunConfig& cfg, const std::filesystem::path& outdir,
                     int jobs = 1) {
  const std::vector<SweepPoint> points = expand_sweep(cfg);
  std::vector<std::string> rows(points.size());

  if (jobs < 1) jobs = 1;
  jobs = static_cast<int>(std::min<std::size_t>(
      static_cast<std::size_t>(jobs), std::max<std::size_t>(points.size(), 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      try {
        rows[i] = sweep_row(points[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::string csv = sweep_csv_header(cfg.sweep ? *cfg.sweep : SweepSpec{});
  for (const auto& r : rows) csv += r;
  std::filesystem::create_directories(outdir);
  detail::write_file(outdir / cfg.out_sweep, csv);
  return 0;
}

}  // namespace leakybox
