// latticewalk: simulate, analyze, fpe and sweep subcommands.

#include <cstdio>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "latticewalk/config.hpp"
#include "latticewalk/csv.hpp"
#include "latticewalk/ensemble.hpp"
#include "latticewalk/fokker_planck.hpp"
#include "latticewalk/observables.hpp"
#include "latticewalk/statistics.hpp"

namespace fs = std::filesystem;
using namespace latticewalk;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Raised for command-line misuse that CLI11 cannot catch itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path default_output_dir() {
  if (const char* env = std::getenv("LATTICEWALK_OUTPUT_DIR"); env && *env) return env;
  return "latticewalk_out";
}

struct CommonOptions {
  std::optional<fs::path> config;
  std::vector<std::string> overrides;
  std::optional<fs::path> out;
  std::optional<unsigned> workers;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_workers) {
  cmd->add_option("--config", o.config, "Config file (sectioned key = value)");
  cmd->add_option("-s,--set", o.overrides, "Override a config value, e.g. params.delta=-0.001")
      ->allow_extra_args(false);
  cmd->add_option("-o,--out", o.out, "Output directory");
  if (with_workers) cmd->add_option("-w,--workers", o.workers, "Worker threads (0 = all cores)");
  cmd->add_flag("-q,--quiet", o.quiet, "No progress output");
}

RunConfig build_config(const CommonOptions& o, RunConfig base = {}) {
  RunConfig cfg = o.config ? load_config(*o.config, base) : base;
  for (const auto& s : o.overrides) apply_override(cfg, s);
  if (o.workers) cfg.ensemble.workers = *o.workers;
  return cfg;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

ProgressFn progress_printer(bool quiet) {
  if (quiet) return {};
  return [](std::size_t done, std::size_t total) {
    std::fprintf(stderr, "\r%zu/%zu trajectories", done, total);
    if (done == total) std::fputc('\n', stderr);
    std::fflush(stderr);
  };
}

// ---------------------------------------------------------------------------

int cmd_simulate(const CommonOptions& o) {
  RunConfig cfg = build_config(o);
  if (o.out) cfg.ensemble.output_dir = *o.out;
  if (!cfg.ensemble.output_dir) cfg.ensemble.output_dir = default_output_dir();
  cfg.ensemble.keep_logs = false;
  cfg.validate();

  const fs::path dir = *cfg.ensemble.output_dir;
  ensure_dir(dir);
  write_text(dir / "config.toml", to_toml(cfg));
  const EnsembleResult result = run_ensemble(cfg.ensemble, progress_printer(o.quiet));

  const EnsembleSummary& s = result.summary;
  std::printf("trajectories: %zu\n", cfg.ensemble.n_trajectories);
  std::printf("SE events:    %llu\n", static_cast<unsigned long long>(s.total_jumps));
  std::printf("flights:      %llu\n", static_cast<unsigned long long>(s.total_flights));
  std::printf("aborted:      %zu\n", s.aborted);
  std::printf("output:       %s\n", dir.string().c_str());
  for (const auto& t : s.trajectories) {
    if (t.status == TrajectoryStatus::aborted) {
      std::printf("  trajectory %zu aborted at tau=%s: %s\n", t.trajectory_id,
                  format_double(t.last_good_tau).c_str(), t.diagnostic.c_str());
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_analyze(const CommonOptions& o, const fs::path& events_dir) {
  EnsembleManifest manifest;
  const std::vector<TrajectoryLog> logs = read_events_dir(events_dir, &manifest);
  RunConfig base;
  base.ensemble = manifest.config;
  RunConfig cfg = build_config(o, base);
  cfg.validate();
  const LatticeParams& params = cfg.ensemble.params;
  const fs::path out = o.out.value_or(events_dir);
  ensure_dir(out);

  const FlightSet flights = collect_flights(logs);
  write_flights_csv(out / "flights.csv", flights, params);
  const std::vector<double> durations = flights.durations();

  std::printf("trajectories: %zu (%zu aborted, excluded)\n", logs.size(),
              flights.aborted_trajectories);
  std::printf("flights:      %zu\n", durations.size());
  std::printf("censored:     %zu intervals, fraction of time %.4f\n", flights.censored,
              flights.censored_fraction());
  if (flights.sign_changes > 0) {
    std::printf("exposure:     %.6g us per sign change\n",
                tau_to_microseconds(flights.exposure_mean(), params));
  }

  LogHistogram hist;
  if (durations.empty()) {
    std::fprintf(stderr, "warning: no complete flights; flight tables are empty\n");
  } else {
    const DurationSummary ds = summarize_durations(durations);
    std::printf("<T>:          %.6g tau = %.6g us (median %.6g us)\n", ds.mean,
                tau_to_microseconds(ds.mean, params), tau_to_microseconds(ds.median, params));
    hist = log_binned_pdf(durations, cfg.statistics.bins_per_decade);
    try {
      hist.fit = fit_power_law_slope(hist, cfg.statistics.fit_options(params));
      std::printf("alpha:        %.4f +- %.4f over T in [%.6g, %.6g] (R^2 %.4f, %zu bins)\n",
                  hist.fit->alpha, hist.fit->std_error, hist.fit->t_lo, hist.fit->t_hi,
                  hist.fit->r2, hist.fit->n_bins);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "warning: power-law fit failed: %s\n", e.what());
    }
  }
  write_pdf_csv(out / "pdf.csv", hist, params);

  const DiffusionEstimate diffusion = estimate_diffusion(logs, cfg.statistics.diffusion);
  write_diffusion_csv(out / "diffusion.csv", diffusion, params, cfg.fpe.d_denominator);
  if (!diffusion.bins.empty()) {
    std::printf("\n%10s %12s %12s %12s %8s\n", "H", "D_hat", "D_analytic", "C_hat", "n");
    for (const auto& b : diffusion.bins) {
      std::printf("%10.4f %12.4e %12.4e %12.4e %8zu\n", b.h_center, b.d_hat,
                  analytic_diffusion(b.h_center, params, cfg.fpe.d_denominator), b.c_hat,
                  b.n_events);
    }
  }
  if (!diffusion.dropped.empty()) {
    std::printf("%zu energy bins under %zu events dropped\n", diffusion.dropped.size(),
                cfg.statistics.diffusion.min_count);
  }

  bool have_samples = false;
  for (const auto& log : logs) have_samples = have_samples || !log.samples.empty();
  if (have_samples) {
    try {
      const CaptureMomentum cm = detect_capture_momentum(logs, params, cfg.statistics.capture);
      std::printf("\np_g:          %s (%zu samples)%s\n", format_double(cm.p_g).c_str(),
                  cm.n_samples, cm.multimodal ? ", multimodal" : "");
      if (cm.multimodal) {
        for (double c : cm.candidates) std::printf("  candidate %s\n", format_double(c).c_str());
      }
    } catch (const std::exception& e) {
      std::fprintf(stderr, "warning: capture momentum: %s\n", e.what());
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct FpeCli {
  std::string mode = "solve";
  bool fpt = false;
  std::optional<double> c;
  std::optional<double> d;
  std::optional<double> h0;
  std::optional<double> tau_max;
};

int cmd_fpe(const CommonOptions& o, const FpeCli& f) {
  RunConfig cfg = build_config(o);
  if (f.c || f.d) cfg.fpe.coefficients = FpeCoefficientMode::constant;
  if (f.c) cfg.fpe.c = *f.c;
  if (f.d) cfg.fpe.d = *f.d;
  if (f.h0) cfg.fpe.h0 = *f.h0;
  if (f.tau_max) cfg.fpe.tau_max = *f.tau_max;
  cfg.validate();
  const FpeCoefficients coeffs = cfg.fpe_coefficients();
  const fs::path out = o.out.value_or(cfg.ensemble.output_dir.value_or(default_output_dir()));
  ensure_dir(out);

  if (f.mode == "gaussian-check") {
    const double c = coeffs.drift(cfg.fpe.h0);
    const double d = coeffs.diffusion(cfg.fpe.h0);
    const GaussianCheck g = gaussian_check(c, d, cfg.fpe.grid);
    std::printf("c = %s, D = %s, tau = %s\n", format_double(c).c_str(), format_double(d).c_str(),
                format_double(g.tau).c_str());
    std::printf("mean:     %.10g (exact %.10g)\n", g.numerical_mean, g.expected_mean);
    std::printf("variance: %.10g (exact %.10g)\n", g.numerical_var, g.expected_var);
    std::printf("L2 error: %.3e\n", g.l2_error);
    const bool ok = g.l2_error < 1e-3;
    std::printf("%s\n", ok ? "PASS" : "FAIL (L2 error >= 1e-3)");
    return ok ? 0 : kExitRuntime;
  }
  if (f.mode != "solve") throw UsageError("unknown fpe mode '" + f.mode + "'");

  if (f.fpt) {
    FirstPassageOptions fo;
    fo.tau_max = cfg.fpe.tau_max;
    fo.dtau0 = cfg.fpe.dtau0;
    fo.growth = cfg.fpe.growth;
    fo.form = cfg.fpe.form;
    const FirstPassageResult r = first_passage_pdf(cfg.fpe.h0, coeffs, cfg.fpe.grid, fo);
    write_fpt_csv(out / "fpt.csv", r);
    std::printf("absorbed:  %.6f\nremainder: %.6f\n", r.absorbed, r.remainder);
    if (r.remainder_warning) {
      std::fprintf(stderr, "warning: %.1f%% of the probability is unabsorbed at tau_max\n",
                   100.0 * r.remainder);
    }
    const double c = coeffs.drift(0.0);
    const double d = coeffs.diffusion(0.0);
    if (c == 0.0) {
      const double hi = fo.tau_max / 10.0;
      const SlopeFit s = fit_loglog_slope(r.t, r.density, hi / 10.0, hi);
      std::printf("tail slope over [%s, %s]: %.4f\n", format_double(hi / 10.0).c_str(),
                  format_double(hi).c_str(), s.slope);
    } else if (d > 0.0) {
      const double k = c * c / d;
      const double lo = 2.0 / k;
      const double hi = std::min(8.0 / k, fo.tau_max);
      if (lo < hi) {
        const double fitted = fit_cutoff_rate(r.t, r.density, lo, hi);
        std::printf("cutoff rate: %.6e (c^2/D = %.6e, ratio %.4f)\n", fitted, k, fitted / k);
      } else {
        std::printf("cutoff rate: tau_max too short for c^2/D = %.6e\n", k);
      }
    }
  } else {
    FpeOptions fo;
    fo.form = cfg.fpe.form;
    fo.snapshots = cfg.fpe.snapshots;
    const FpeResult r = solve_fpe(point_density(cfg.fpe.grid, cfg.fpe.h0), coeffs, cfg.fpe.grid,
                                  cfg.fpe.tau_span, fo);
    write_fpe_csv(out / "fpe.csv", r);
    const double mass = r.final_mass(cfg.fpe.grid.dh());
    std::printf("steps:     %llu\n", static_cast<unsigned long long>(r.steps));
    std::printf("mass:      %.12f\nabsorbed:  %.12f (lower) %.12f (upper)\n", mass,
                r.absorbed_lower, r.absorbed_upper);
    std::printf("balance:   %.3e\n", mass + r.absorbed_lower + r.absorbed_upper - 1.0);
  }
  write_text(out / "config.toml", to_toml(cfg));
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_sweep(const CommonOptions& o, const std::vector<double>& deltas) {
  if (deltas.size() < 2) throw UsageError(">=2 points required for a sweep");
  RunConfig cfg = build_config(o);
  if (o.out) cfg.ensemble.output_dir = *o.out;
  if (!cfg.ensemble.output_dir) cfg.ensemble.output_dir = default_output_dir();
  cfg.validate();
  const fs::path dir = *cfg.ensemble.output_dir;
  ensure_dir(dir);
  write_text(dir / "config.toml", to_toml(cfg));

  SweepOptions so;
  so.bins_per_decade = cfg.statistics.bins_per_decade;
  so.fit = cfg.statistics.fit_options(cfg.ensemble.params);
  so.auto_t_min = !cfg.statistics.fit_t_min.has_value();
  if (!o.quiet) {
    so.progress = [](double delta, std::size_t done, std::size_t total) {
      std::fprintf(stderr, "delta %s done (%zu/%zu)\n", format_double(delta).c_str(), done,
                   total);
    };
  }
  const std::vector<SweepRow> rows = detuning_sweep(deltas, cfg.ensemble, so);
  write_sweep_csv(dir / "sweep.csv", rows);

  std::printf("%10s %10s %12s %10s %10s %9s %8s  %s\n", "delta", "mean_T_us", "exposure_us",
              "alpha", "stderr", "flights", "p_g", "note");
  bool any_ok = false;
  for (const auto& r : rows) {
    any_ok = any_ok || r.ok;
    const std::string alpha = r.fitted ? std::to_string(r.alpha) : "-";
    const std::string stderr_ = r.fitted ? std::to_string(r.alpha_stderr) : "-";
    char p_g[32] = "-";
    if (r.p_g) std::snprintf(p_g, sizeof p_g, "%.1f", *r.p_g);
    std::printf("%10s %10.4g %12.4g %10s %10s %9zu %8s  %s\n", format_double(r.delta).c_str(),
                r.mean_T_us, r.exposure_T_us, alpha.c_str(), stderr_.c_str(), r.n_flights, p_g,
                r.note.c_str());
  }
  return any_ok ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo wavefunction simulation of an atom in a 1D optical lattice"};
  app.require_subcommand(1);
  app.set_version_flag("--version", LATTICEWALK_VERSION);

  CommonOptions sim_opts;
  auto* sim = app.add_subcommand("simulate", "Run an ensemble and write event files");
  add_common(sim, sim_opts, true);

  CommonOptions an_opts;
  fs::path events_dir;
  auto* an = app.add_subcommand("analyze", "Flight statistics and energy diffusion from events");
  an->add_option("events", events_dir, "Events directory written by simulate")->required();
  add_common(an, an_opts, false);

  CommonOptions fpe_opts;
  FpeCli fpe_cli;
  auto* fpe = app.add_subcommand("fpe", "Energy-space Fokker-Planck solver");
  add_common(fpe, fpe_opts, false);
  fpe->add_option("--mode", fpe_cli.mode, "solve or gaussian-check")
      ->check(CLI::IsMember({"solve", "gaussian-check"}));
  fpe->add_flag("--fpt", fpe_cli.fpt, "First-passage density to H = 0 (writes fpt.csv)");
  fpe->add_option("--c", fpe_cli.c, "Constant drift c");
  fpe->add_option("--D", fpe_cli.d, "Constant diffusion D");
  fpe->add_option("--h0", fpe_cli.h0, "Starting energy");
  fpe->add_option("--tau-max", fpe_cli.tau_max, "First-passage horizon");

  CommonOptions sw_opts;
  std::vector<double> deltas;
  auto* sw = app.add_subcommand("sweep", "Flight statistics across detunings");
  sw->add_option("--deltas", deltas, "Comma-separated detunings")->delimiter(',')->required();
  add_common(sw, sw_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*sim) return cmd_simulate(sim_opts);
    if (*an) return cmd_analyze(an_opts, events_dir);
    if (*fpe) return cmd_fpe(fpe_opts, fpe_cli);
    if (*sw) return cmd_sweep(sw_opts, deltas);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
