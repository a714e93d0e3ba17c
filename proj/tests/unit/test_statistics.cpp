#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "latticewalk/csv.hpp"
#include "latticewalk/fokker_planck.hpp"
#include "latticewalk/rng.hpp"
#include "latticewalk/statistics.hpp"

using namespace latticewalk;
namespace fs = std::filesystem;

namespace {

// Inverse-CDF draws from a T^-1.5 density on [1, t_max].
std::vector<double> power_law_sample(std::size_t n, double t_max, std::uint64_t seed) {
  RandomStream rng(seed);
  const double tail = 1.0 - 1.0 / std::sqrt(t_max);
  std::vector<double> out(n);
  for (auto& t : out) {
    const double a = 1.0 - rng.uniform() * tail;
    t = 1.0 / (a * a);
  }
  return out;
}

// Histogram whose counts are the exact bin integrals of `cdf` times n.
template <class Cdf>
LogHistogram exact_histogram(double lo, double hi, int per_decade, double n, Cdf cdf) {
  std::vector<double> edges;
  const int bins = static_cast<int>(std::round(std::log10(hi / lo) * per_decade));
  for (int i = 0; i <= bins; ++i) edges.push_back(lo * std::pow(10.0, double(i) / per_decade));
  std::vector<double> counts;
  for (int i = 0; i < bins; ++i) counts.push_back(n * (cdf(edges[i + 1]) - cdf(edges[i])));
  return make_histogram(edges, counts);
}

double integral(const LogHistogram& h) {
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) s += h.density[i] * h.width(i);
  return s;
}

}  // namespace

TEST_SUITE("statistics") {

TEST_CASE("flights between sign changes") {
  const std::vector<double> sc{10.0, 25.0, 100.0};
  const FlightExtraction ex = extract_flights(sc, 0.0, 200.0);
  REQUIRE(ex.flights.size() == 2);
  CHECK(ex.flights[0].duration == 15.0);
  CHECK(ex.flights[1].duration == 75.0);
  CHECK(ex.censored == 2);
  CHECK(ex.censored_time == 10.0 + 100.0);
}

TEST_CASE("constant sign gives one censored interval") {
  const FlightExtraction ex = extract_flights(std::vector<double>{}, 0.0, 200.0);
  CHECK(ex.flights.empty());
  CHECK(ex.censored == 1);
  CHECK(ex.censored_time == 200.0);
  const FlightExtraction one = extract_flights(std::vector<double>{50.0}, 0.0, 200.0);
  CHECK(one.flights.empty());
  CHECK(one.censored == 2);
}

TEST_CASE("flights of a sine trace") {
  std::vector<double> sc;
  const double h = 0.01;
  double prev = 0.0;
  for (int i = 1; i * h <= 2000.0; ++i) {
    const double t = i * h;
    const double p = std::sin(0.01 * t);
    if (i > 1 && (p > 0) != (prev > 0)) sc.push_back(t - h + h * prev / (prev - p));
    prev = p;
  }
  const FlightExtraction ex = extract_flights(sc, 0.0, 2000.0);
  REQUIRE(ex.flights.size() == 5);
  for (const auto& f : ex.flights) CHECK(f.duration == doctest::Approx(314.159265).epsilon(1e-6));
}

TEST_CASE("flight and censored time add up to the run") {
  RandomStream rng(4);
  std::vector<double> sc;
  double t = 0.0;
  while ((t += rng.uniform(0.0, 50.0)) < 1e4) sc.push_back(t);
  const FlightExtraction ex = extract_flights(sc, 0.0, 1e4);
  double sum = ex.censored_time;
  for (const auto& f : ex.flights) sum += f.duration;
  CHECK(sum == doctest::Approx(1e4).epsilon(1e-12));
}

TEST_CASE("exposure mean keeps censored time") {
  TrajectoryLog a;
  a.tau_end = 100.0;
  a.sign_changes = {10.0, 30.0, 60.0};
  TrajectoryLog b;
  b.tau_end = 100.0;  // no sign change at all
  const std::vector<TrajectoryLog> logs{a, b};
  const FlightSet set = collect_flights(logs);
  CHECK(set.flights.size() == 2);
  CHECK(set.sign_changes == 3);
  CHECK(set.exposure_mean() == doctest::Approx(200.0 / 3.0));
  CHECK(set.censored_fraction() == doctest::Approx((10.0 + 40.0 + 100.0) / 200.0));
}

TEST_CASE("aborted trajectories are excluded and counted") {
  TrajectoryLog a;
  a.tau_end = 100.0;
  a.sign_changes = {10.0, 30.0, 60.0};
  TrajectoryLog bad = a;
  bad.status = TrajectoryStatus::aborted;
  const std::vector<TrajectoryLog> logs{a, bad};
  const FlightSet set = collect_flights(logs);
  CHECK(set.flights.size() == 2);
  CHECK(set.aborted_trajectories == 1);
}

TEST_CASE("duration summary") {
  const std::vector<double> d{1.0, 2.0, 3.0, 10.0};
  const DurationSummary s = summarize_durations(d);
  CHECK(s.n == 4);
  CHECK(s.mean == 4.0);
  CHECK(s.median == 2.5);
}

TEST_CASE("log-binned density is normalized") {
  const std::vector<double> d = power_law_sample(10000, 1e4, 1);
  const LogHistogram h = log_binned_pdf(d, 10);
  CHECK(std::abs(integral(h) - 1.0) < 1e-12);
  CHECK(std::abs(h.integral() - 1.0) < 1e-12);
  for (std::size_t i = 0; i + 1 < h.edges.size(); ++i) CHECK(h.edges[i] < h.edges[i + 1]);
}

TEST_CASE("a point mass gets one bin") {
  const std::vector<double> d(50, 7.5);
  const LogHistogram h = log_binned_pdf(d, 10);
  CHECK(h.size() == 1);
  CHECK(h.center(0) == doctest::Approx(7.5));
  CHECK(std::abs(integral(h) - 1.0) < 1e-12);
}

TEST_CASE("duplicating every sample leaves the density unchanged") {
  std::vector<double> d = power_law_sample(5000, 1e4, 2);
  const LogHistogram a = log_binned_pdf(d, 10);
  const std::vector<double> copy = d;
  d.insert(d.end(), copy.begin(), copy.end());
  const LogHistogram b = log_binned_pdf(d, 10);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.density[i] == doctest::Approx(b.density[i]));
}

TEST_CASE("bad input to the histogram") {
  CHECK_THROWS_AS(log_binned_pdf(std::vector<double>{}, 10), std::invalid_argument);
  CHECK_THROWS_AS(log_binned_pdf(std::vector<double>{1.0, 0.0}, 10), std::invalid_argument);
}

TEST_CASE("power-law sample recovers its slope") {
  const std::vector<double> d = power_law_sample(1000000, 1e6, 3);
  const LogHistogram h = log_binned_pdf(d, 10);
  const PowerLawFit fit = fit_power_law_slope(h);
  CHECK(fit.alpha == doctest::Approx(-1.5).epsilon(0.05 / 1.5));
  CHECK(fit.r2 >= 0.98);
  CHECK(fit.n_bins >= 5);
}

TEST_CASE("exact power-law density") {
  const auto cdf = [](double t) { return 1.0 - 1.0 / std::sqrt(t); };
  const LogHistogram h = exact_histogram(1.0, 1e6, 10, 1e6, cdf);
  const PowerLawFit fit = fit_power_law_slope(h);
  CHECK(std::abs(fit.alpha + 1.5) < 0.02);
}

TEST_CASE("power law with an exponential cutoff") {
  const FlightPdfModel model(std::sqrt(1e-5), 1.0, 1.0);  // c^2/D = 1e-5
  // Fine trapezoid integration of the model for the bin masses.
  const auto cdf = [&](double t) {
    const int n = 2000;
    double s = 0.0;
    const double a = std::log(1.0);
    const double b = std::log(t);
    for (int i = 0; i <= n; ++i) {
      const double u = a + (b - a) * i / n;
      const double w = (i == 0 || i == n) ? 0.5 : 1.0;
      s += w * model(std::exp(u)) * std::exp(u);
    }
    return t > 1.0 ? s * (b - a) / n : 0.0;
  };
  const LogHistogram h = exact_histogram(1.0, 1e6, 10, 1e6, cdf);
  FitOptions early;
  early.range = std::pair{1.0, 1e3};
  CHECK(std::abs(fit_power_law_slope(h, early).alpha + 1.5) < 0.02);
  FitOptions late;
  late.range = std::pair{2e4, 2e5};
  CHECK(fit_power_law_slope(h, late).alpha < -1.7);
}

TEST_CASE("slope is unchanged by rescaling the durations") {
  std::vector<double> d = power_law_sample(200000, 1e5, 5);
  FitOptions opt;
  opt.range = std::pair{10.0, 1e4};
  const double a = fit_power_law_slope(log_binned_pdf(d, 10), opt).alpha;
  for (double& t : d) t *= 1000.0;
  opt.range = std::pair{1e4, 1e7};
  const double b = fit_power_law_slope(log_binned_pdf(d, 10), opt).alpha;
  CHECK(a == doctest::Approx(b).epsilon(1e-9));
}

TEST_CASE("too few bins names the range") {
  const std::vector<double> d = power_law_sample(1000, 1e6, 6);
  const LogHistogram h = log_binned_pdf(d, 10);
  FitOptions opt;
  opt.range = std::pair{10.0, 20.0};
  try {
    fit_power_law_slope(h, opt);
    FAIL("expected a fit error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("[10") != std::string::npos);
  }
}

TEST_CASE("auto range respects the diffusive floor") {
  LatticeParams params;
  CHECK(diffusive_time_floor(params) == doctest::Approx(4.0 / params.gamma));
  params.gamma = 0.0;
  CHECK(diffusive_time_floor(params) == 0.0);

  const std::vector<double> d = power_law_sample(1000000, 1e6, 7);
  FitOptions opt;
  opt.t_min = 100.0;
  const PowerLawFit fit = fit_power_law_slope(log_binned_pdf(d, 10), opt);
  CHECK(fit.t_lo >= 100.0 / std::pow(10.0, 0.05) * 0.999);
}

TEST_CASE("diffusion estimate from a synthetic walk") {
  std::mt19937_64 gen(11);
  const double sigma = 0.02;
  const double dtau = 600.0;
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<EnergyIncrement> inc;
  for (int i = 0; i < 10000; ++i) inc.push_back({1.0, normal(gen), dtau, 500.0});
  DiffusionBinSpec spec;
  spec.h_min = 0.0;
  spec.h_max = 2.0;
  spec.width = 2.0;
  const DiffusionEstimate est = estimate_diffusion(inc, spec);
  REQUIRE(est.bins.size() == 1);
  CHECK(est.bins[0].d_hat == doctest::Approx(sigma * sigma / (4 * dtau)).epsilon(0.05));
  CHECK(est.bins[0].n_events == 10000);
}

TEST_CASE("diffusion estimate recovers drift and diffusion within their errors") {
  std::mt19937_64 gen(12);
  const double c = -1.6e-6;
  const double d = 6.5e-8;
  std::exponential_distribution<double> wait(1.0 / 606.0);
  std::vector<EnergyIncrement> inc;
  std::vector<double> rates;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const double dt = wait(gen);
    std::normal_distribution<double> step(c * dt, std::sqrt(4.0 * d * dt));
    inc.push_back({0.3 + 0.4 * (i % 3), step(gen), dt, 500.0});
  }
  DiffusionBinSpec spec;
  spec.h_min = 0.0;
  spec.h_max = 1.5;
  spec.width = 0.5;
  const DiffusionEstimate est = estimate_diffusion(inc, spec);
  REQUIRE(est.bins.size() == 3);
  for (const auto& b : est.bins) {
    const double m = static_cast<double>(b.n_events);
    // var(dH) = 4 D <dt> + c^2 var(dt); the second term is negligible here.
    const double se_d = d * std::sqrt(2.0 / m) * 1.5;
    const double se_c = std::sqrt(4.0 * d * 606.0 / m) / 606.0;
    CHECK(std::abs(b.d_hat - d) < 3.0 * se_d);
    CHECK(std::abs(b.c_hat - c) < 3.0 * se_c);
  }
}

TEST_CASE("undersized diffusion bins are dropped") {
  std::vector<EnergyIncrement> inc;
  for (int i = 0; i < 150; ++i) inc.push_back({0.1, 1e-3 * (i % 7), 10.0, 1.0});
  for (int i = 0; i < 20; ++i) inc.push_back({1.1, 1e-3 * (i % 5), 10.0, 1.0});
  const DiffusionEstimate est = estimate_diffusion(inc);
  CHECK(est.bins.size() == 1);
  CHECK(est.dropped.size() == 1);
  CHECK(est.dropped[0].n_events == 20);
}

TEST_CASE("capture momentum of a synthetic cloud") {
  std::mt19937_64 gen(13);
  std::normal_distribution<double> p(300.0, 30.0);
  TrajectoryLog log;
  log.tau_end = 1e6;
  log.sign_changes = {500.0, 900000.0};
  for (int i = 0; i < 20000; ++i) {
    StateSample s;
    s.tau = 1000.0 + 40.0 * i;
    s.p = (i % 2 ? 1.0 : -1.0) * p(gen);
    log.samples.push_back(s);
  }
  const std::vector<TrajectoryLog> logs{log};
  LatticeParams params;
  const CaptureMomentum cm = detect_capture_momentum(logs, params);
  CHECK(std::abs(cm.p_g - 300.0) < 25.0);
  CHECK(cm.n_samples < 20000);  // samples near the second sign change are excluded
}

TEST_CASE("capture momentum of a ballistic atom") {
  TrajectoryLog log;
  log.tau_end = 1e5;
  for (int i = 0; i < 1000; ++i) {
    StateSample s;
    s.tau = 100.0 * i;
    s.p = 812.0 + 1e-3 * std::sin(0.1 * i);
    log.samples.push_back(s);
  }
  LatticeParams params;
  params.gamma = 0.0;
  const std::vector<TrajectoryLog> logs{log};
  const CaptureMomentum cm = detect_capture_momentum(logs, params);
  CHECK(cm.p_g == doctest::Approx(812.0).epsilon(1e-5));
  CHECK_FALSE(cm.multimodal);
}

TEST_CASE("two equal clouds are flagged") {
  TrajectoryLog log;
  log.tau_end = 1e6;
  for (int i = 0; i < 2000; ++i) {
    StateSample s;
    s.tau = 10.0 * i;
    s.p = i % 2 ? 210.0 : 610.0;
    log.samples.push_back(s);
  }
  LatticeParams params;
  const std::vector<TrajectoryLog> logs{log};
  const CaptureMomentum cm = detect_capture_momentum(logs, params);
  CHECK(cm.multimodal);
  CHECK(cm.candidates.size() == 2);
}

TEST_CASE("a sweep needs two points") {
  EnsembleConfig base;
  CHECK_THROWS_AS(detuning_sweep(std::vector<double>{-0.1}, base), std::invalid_argument);
}

TEST_CASE("output tables carry the documented columns") {
  const fs::path dir = fs::temp_directory_path() / "lw_unit_tables";
  fs::remove_all(dir);
  fs::create_directories(dir);
  LatticeParams params;

  FlightSet set;
  set.flights.push_back({3, 10.0, 2e4, 2e4 - 10.0, std::nullopt});
  write_flights_csv(dir / "flights.csv", set, params);
  const CsvTable f = read_csv(dir / "flights.csv");
  CHECK(f.header == std::vector<std::string>{"trajectory_id", "t_start", "t_end", "T", "T_us"});
  CHECK(parse_double(f.rows[0][4]) == doctest::Approx(1.999));

  LogHistogram h = log_binned_pdf(power_law_sample(20000, 1e5, 8), 10);
  h.fit = fit_power_law_slope(h);
  write_pdf_csv(dir / "pdf.csv", h, params);
  const CsvTable p = read_csv(dir / "pdf.csv");
  CHECK(p.column("T_center") == 0);
  CHECK(p.column("density") == 1);
  double mass = 0.0;
  for (const auto& row : p.rows) {
    mass += parse_double(row[p.column("density")]) *
            (parse_double(row[p.column("T_hi")]) - parse_double(row[p.column("T_lo")]));
  }
  CHECK(std::abs(mass - 1.0) < 1e-12);
  CHECK(parse_double(p.rows[0][p.column("alpha")]) == doctest::Approx(h.fit->alpha));

  DiffusionEstimate est;
  est.bins.push_back({0.5, 6e-8, -1e-6, 120, 0, 0, 0});
  write_diffusion_csv(dir / "diffusion.csv", est, params);
  const CsvTable d = read_csv(dir / "diffusion.csv");
  CHECK(d.header == std::vector<std::string>{"H_center", "D_hat", "C_hat", "n", "D_analytic"});
  CHECK(parse_double(d.rows[0][4]) == doctest::Approx(analytic_diffusion(0.5, params)));

  SweepRow row;
  row.delta = -0.1;
  row.note = "a, b";
  const std::vector<SweepRow> rows{row, row};
  write_sweep_csv(dir / "sweep.csv", rows);
  const CsvTable s = read_csv(dir / "sweep.csv");
  const std::vector<std::string> first(s.header.begin(), s.header.begin() + 5);
  CHECK(first ==
        std::vector<std::string>{"delta", "mean_T_us", "alpha", "alpha_stderr", "n_flights"});
  CHECK(s.rows[0][s.column("note")] == "a; b");
}

}  // TEST_SUITE
