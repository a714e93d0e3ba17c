#include "latticewalk/fokker_planck.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "latticewalk/csv.hpp"

namespace latticewalk {

double analytic_diffusion(double h, const LatticeParams& params, double denominator) {
  return params.omega_r * std::max(h, 0.0) * params.gamma / 12.0 +
         params.delta * params.delta / denominator;
}

double analytic_drift(const LatticeParams& params) {
  return params.omega_r * params.gamma / 12.0 + params.delta * params.gamma / 2.0;
}

// ---------------------------------------------------------------------------
// Coefficients

FpeCoefficients FpeCoefficients::constant(double c, double d) {
  return {[c](double) { return c; }, [d](double) { return d; }};
}

FpeCoefficients FpeCoefficients::analytic(const LatticeParams& params, double denominator) {
  const double c = analytic_drift(params);
  return {[c](double) { return c; },
          [params, denominator](double h) { return analytic_diffusion(h, params, denominator); }};
}

namespace {

double interpolate(const std::vector<double>& x, const std::vector<double>& y, double at) {
  if (at <= x.front()) return y.front();
  if (at >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  const std::size_t j = static_cast<std::size_t>(it - x.begin());
  const double t = (at - x[j - 1]) / (x[j] - x[j - 1]);
  return y[j - 1] + t * (y[j] - y[j - 1]);
}

}  // namespace

FpeCoefficients FpeCoefficients::tabulated(std::vector<double> h, std::vector<double> c,
                                           std::vector<double> d) {
  if (h.empty() || h.size() != c.size() || h.size() != d.size()) {
    throw std::invalid_argument("tabulated coefficients need equal, non-empty columns");
  }
  for (std::size_t i = 1; i < h.size(); ++i) {
    if (!(h[i] > h[i - 1])) throw std::invalid_argument("tabulated H nodes must increase");
  }
  for (double v : d) {
    if (!(v >= 0.0)) throw std::invalid_argument("tabulated D must be nonnegative");
  }
  auto hs = std::make_shared<const std::vector<double>>(std::move(h));
  auto cs = std::make_shared<const std::vector<double>>(std::move(c));
  auto ds = std::make_shared<const std::vector<double>>(std::move(d));
  return {[hs, cs](double at) { return interpolate(*hs, *cs, at); },
          [hs, ds](double at) { return interpolate(*hs, *ds, at); }};
}

FpeCoefficients FpeCoefficients::from_diffusion_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const std::size_t ih = table.column("H_center");
  const std::size_t id = table.column("D_hat");
  const std::size_t ic = table.column("C_hat");
  std::vector<double> h, c, d;
  for (const auto& row : table.rows) {
    h.push_back(parse_double(row[ih]));
    d.push_back(parse_double(row[id]));
    c.push_back(parse_double(row[ic]));
  }
  if (h.empty()) throw IoError(path.string() + ": no coefficient rows");
  return tabulated(std::move(h), std::move(c), std::move(d));
}

// ---------------------------------------------------------------------------
// Grid

std::vector<double> FpeGrid::centers() const {
  std::vector<double> out(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) out[i] = center(i);
  return out;
}

void FpeGrid::validate() const {
  if (!(h_min < h_max) || !std::isfinite(h_min) || !std::isfinite(h_max)) {
    throw ConfigError("fpe grid needs h_min < h_max");
  }
  if (n_cells < 16) throw ConfigError("fpe grid needs at least 16 cells");
  if (!(dtau > 0.0) || !std::isfinite(dtau)) throw ConfigError("fpe dtau must be > 0");
}

void FpeGrid::validate(const FpeCoefficients& coeffs) const {
  validate();
  const double dx = dh();
  double max_c = 0.0;
  double max_d = 0.0;
  double worst_peclet = 0.0;
  double worst_h = h_min;
  for (std::size_t f = 0; f <= n_cells; ++f) {
    const double h = face(f);
    const double c = coeffs.drift(h);
    const double d = coeffs.diffusion(h);
    if (!std::isfinite(c) || !std::isfinite(d) || d < 0.0) {
      throw ConfigError("fpe coefficients invalid at H=" + format_double(h));
    }
    max_c = std::max(max_c, std::abs(c));
    max_d = std::max(max_d, d);
    const double pe = c == 0.0 ? 0.0 : (d > 0.0 ? 2.0 * std::abs(c) * dx / d : HUGE_VAL);
    if (pe > worst_peclet) {
      worst_peclet = pe;
      worst_h = h;
    }
  }
  if (!(worst_peclet < 2.0)) {
    std::ostringstream msg;
    msg << "fpe grid Peclet number " << format_double(worst_peclet) << " at H="
        << format_double(worst_h) << " is not below 2";
    if (std::isfinite(worst_peclet)) {
      const auto need = static_cast<std::size_t>(
          std::ceil(static_cast<double>(n_cells) * worst_peclet / 2.0 * 1.05));
      msg << "; refine to n_cells >= " << need;
    } else {
      msg << "; D vanishes where c does not";
    }
    throw ConfigError(msg.str());
  }
  if (max_c > 0.0 && dtau > dx / (2.0 * max_c)) {
    throw ConfigError("fpe dtau " + format_double(dtau) + " exceeds dH/(2|c|) = " +
                      format_double(dx / (2.0 * max_c)) + "; reduce dtau");
  }
  if (scheme == FpeScheme::explicit_euler && max_d > 0.0 && dtau > dx * dx / (2.0 * max_d)) {
    throw ConfigError("explicit fpe scheme unstable: dtau " + format_double(dtau) +
                      " exceeds dH^2/(2 max D) = " + format_double(dx * dx / (2.0 * max_d)) +
                      "; reduce dtau or use crank_nicolson");
  }
}

// ---------------------------------------------------------------------------
// Solver

FpeSolver::FpeSolver(const FpeGrid& grid, const FpeCoefficients& coeffs, FpeForm form)
    : grid_(grid) {
  grid_.validate();
  const std::size_t n = grid_.n_cells;
  const double dx = grid_.dh();
  sub_.assign(n, 0.0);
  diag_.assign(n, 0.0);
  sup_.assign(n, 0.0);

  if (form == FpeForm::conservative) {
    // Face flux J_f = c_f (P_{f-1} + P_f) - D_f (P_f - P_{f-1}) / dH, positive upward.
    for (std::size_t f = 1; f < n; ++f) {
      const double h = grid_.face(f);
      const double c = coeffs.drift(h);
      const double d = coeffs.diffusion(h);
      const double from_below = (c + d / dx) / dx;
      const double from_above = (c - d / dx) / dx;
      diag_[f - 1] -= from_below;
      sup_[f - 1] -= from_above;
      sub_[f] += from_below;
      diag_[f] += from_above;
    }
    // Absorbing walls hold P = 0 on the face, half a cell from the first centre.
    if (grid_.lower == Boundary::absorbing) {
      const double d = coeffs.diffusion(grid_.face(0));
      w_lower_ = 2.0 * d / dx;
      diag_[0] -= w_lower_ / dx;
    }
    if (grid_.upper == Boundary::absorbing) {
      const double d = coeffs.diffusion(grid_.face(n));
      w_upper_ = 2.0 * d / dx;
      diag_[n - 1] -= w_upper_ / dx;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double h = grid_.center(i);
      const double c = coeffs.drift(h);
      const double d = coeffs.diffusion(h);
      const double lo = c / dx + d / (dx * dx);
      const double hi = -c / dx + d / (dx * dx);
      diag_[i] = -2.0 * d / (dx * dx);
      // Ghost cells: P_ghost = -P (absorbing) or P_ghost = P (reflecting).
      if (i > 0) {
        sub_[i] = lo;
      } else {
        diag_[i] += grid_.lower == Boundary::absorbing ? -lo : lo;
        if (grid_.lower == Boundary::absorbing) w_lower_ = 2.0 * d / dx;
      }
      if (i + 1 < n) {
        sup_[i] = hi;
      } else {
        diag_[i] += grid_.upper == Boundary::absorbing ? -hi : hi;
        if (grid_.upper == Boundary::absorbing) w_upper_ = 2.0 * d / dx;
      }
    }
  }

  p_.assign(n, 0.0);
  work_a_.resize(n);
  work_b_.resize(n);
  work_c_.resize(n);
  work_d_.resize(n);
}

void FpeSolver::set_density(std::vector<double> density) {
  if (density.size() != grid_.n_cells) {
    throw std::invalid_argument("density has " + std::to_string(density.size()) +
                                " cells, grid has " + std::to_string(grid_.n_cells));
  }
  for (double v : density) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("initial density must be finite and nonnegative");
    }
  }
  p_ = std::move(density);
}

double FpeSolver::mass() const {
  return std::accumulate(p_.begin(), p_.end(), 0.0) * grid_.dh();
}

void FpeSolver::apply(const std::vector<double>& p, std::vector<double>& out) const {
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    double v = diag_[i] * p[i];
    if (i > 0) v += sub_[i] * p[i - 1];
    if (i + 1 < n) v += sup_[i] * p[i + 1];
    out[i] = v;
  }
}

void FpeSolver::step(double dt, bool damped) {
  if (!(dt > 0.0)) throw std::invalid_argument("fpe step must be > 0");
  double theta = 0.5;
  if (damped || grid_.scheme == FpeScheme::implicit_euler) theta = 1.0;
  if (!damped && grid_.scheme == FpeScheme::explicit_euler) theta = 0.0;

  const std::size_t n = p_.size();
  const double out_lo0 = outflow_lower(p_);
  const double out_hi0 = outflow_upper(p_);

  std::vector<double>& rhs = work_d_;
  if (theta < 1.0) {
    apply(p_, rhs);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = p_[i] + (1.0 - theta) * dt * rhs[i];
  } else {
    rhs = p_;
  }

  if (theta > 0.0) {
    // Thomas algorithm on (I - theta dt A) p = rhs.
    std::vector<double>& cp = work_a_;
    std::vector<double>& dp = work_b_;
    const double k = theta * dt;
    double b = 1.0 - k * diag_[0];
    cp[0] = -k * sup_[0] / b;
    dp[0] = rhs[0] / b;
    for (std::size_t i = 1; i < n; ++i) {
      const double a = -k * sub_[i];
      b = 1.0 - k * diag_[i] - a * cp[i - 1];
      cp[i] = i + 1 < n ? -k * sup_[i] / b : 0.0;
      dp[i] = (rhs[i] - a * dp[i - 1]) / b;
    }
    p_[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) p_[i] = dp[i] - cp[i] * p_[i + 1];
  } else {
    p_ = rhs;
  }

  absorbed_lower_ += dt * (theta * outflow_lower(p_) + (1.0 - theta) * out_lo0);
  absorbed_upper_ += dt * (theta * outflow_upper(p_) + (1.0 - theta) * out_hi0);
  tau_ += dt;

  const auto [lo, hi] = std::minmax_element(p_.begin(), p_.end());
  if (*lo < -1e-12 * std::max(*hi, 0.0) || !std::isfinite(*lo) || !std::isfinite(*hi)) {
    const auto i = static_cast<std::size_t>(lo - p_.begin());
    throw NumericalFault("fpe density " + format_double(*lo) + " at H=" +
                         format_double(grid_.center(i)) + ", tau=" + format_double(tau_));
  }
}

double FpeResult::final_mass(double dh) const {
  if (snapshots.empty()) return 0.0;
  const auto& d = snapshots.back().density;
  return std::accumulate(d.begin(), d.end(), 0.0) * dh;
}

namespace {

void check_initial(const std::vector<double>& initial, const FpeGrid& grid) {
  if (initial.size() != grid.n_cells) {
    throw std::invalid_argument("initial density has " + std::to_string(initial.size()) +
                                " cells, grid has " + std::to_string(grid.n_cells));
  }
  double mass = 0.0;
  for (double v : initial) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("initial density must be finite and nonnegative");
    }
    mass += v;
  }
  mass *= grid.dh();
  if (std::abs(mass - 1.0) > 1e-9) {
    throw std::invalid_argument("initial density integrates to " + format_double(mass) +
                                ", not 1");
  }
}

}  // namespace

FpeResult solve_fpe(const std::vector<double>& initial, const FpeCoefficients& coeffs,
                    const FpeGrid& grid, double tau_span, const FpeOptions& options) {
  grid.validate(coeffs);
  check_initial(initial, grid);
  if (!(tau_span > 0.0)) throw std::invalid_argument("fpe tau_span must be > 0");
  if (options.snapshots < 1) throw std::invalid_argument("fpe needs at least one snapshot");

  FpeSolver solver(grid, coeffs, options.form);
  solver.set_density(initial);
  FpeResult result;
  result.h = grid.centers();

  const auto n_steps = static_cast<std::uint64_t>(std::ceil(tau_span / grid.dtau - 1e-9));
  const double dt = tau_span / static_cast<double>(n_steps);
  std::size_t next_snapshot = 1;
  for (std::uint64_t k = 1; k <= n_steps; ++k) {
    if (k == 1 && options.startup_steps > 0) {
      for (unsigned s = 0; s < options.startup_steps; ++s) {
        solver.step(dt / options.startup_steps, true);
      }
    } else {
      solver.step(dt);
    }
    ++result.steps;
    // Snapshot j sits at the step closest to j * tau_span / snapshots.
    while (next_snapshot <= options.snapshots &&
           (k == n_steps || static_cast<double>(k) * static_cast<double>(options.snapshots) >=
                                static_cast<double>(next_snapshot * n_steps))) {
      result.snapshots.push_back({k == n_steps ? tau_span : solver.tau(), solver.density()});
      ++next_snapshot;
    }
  }
  result.absorbed_lower = solver.absorbed_lower();
  result.absorbed_upper = solver.absorbed_upper();
  return result;
}

std::vector<double> point_density(const FpeGrid& grid, double h0) {
  grid.validate();
  if (!(h0 > grid.h_min && h0 < grid.h_max)) {
    throw std::invalid_argument("h0 = " + format_double(h0) + " lies outside the grid");
  }
  const double dx = grid.dh();
  std::vector<double> p(grid.n_cells, 0.0);
  const double s = (h0 - grid.h_min) / dx - 0.5;  // fractional cell index
  if (s <= 0.0) {
    p.front() = 1.0 / dx;
  } else if (s >= static_cast<double>(grid.n_cells - 1)) {
    p.back() = 1.0 / dx;
  } else {
    const auto j = static_cast<std::size_t>(std::floor(s));
    const double t = s - static_cast<double>(j);
    p[j] = (1.0 - t) / dx;
    p[j + 1] = t / dx;
  }
  return p;
}

std::vector<double> gaussian_density(const FpeGrid& grid, double mean, double stddev) {
  grid.validate();
  if (!(stddev > 0.0)) throw std::invalid_argument("gaussian width must be > 0");
  const double dx = grid.dh();
  const double scale = 1.0 / (stddev * std::numbers::sqrt2);
  std::vector<double> p(grid.n_cells);
  double total = 0.0;
  for (std::size_t i = 0; i < grid.n_cells; ++i) {
    const double a = (grid.face(i) - mean) * scale;
    const double b = (grid.face(i + 1) - mean) * scale;
    // Cell mass; erfc of the far tail keeps precision away from the mean.
    const double m = a >= 0.0 ? 0.5 * (std::erfc(a) - std::erfc(b))
                              : 0.5 * (std::erfc(-b) - std::erfc(-a));
    p[i] = m / dx;
    total += m;
  }
  for (double& v : p) v /= total;
  return p;
}

// ---------------------------------------------------------------------------
// First passage

FirstPassageResult first_passage_pdf(double h0, const FpeCoefficients& coeffs,
                                     const FpeGrid& grid, const FirstPassageOptions& options) {
  if (grid.lower != Boundary::absorbing) {
    throw std::invalid_argument("first passage needs an absorbing lower boundary");
  }
  if (!(options.tau_max > 0.0) || !(options.dtau0 > 0.0) || !(options.growth >= 1.0)) {
    throw std::invalid_argument("first passage needs tau_max > 0, dtau0 > 0, growth >= 1");
  }
  grid.validate();
  double max_c = 0.0;
  for (std::size_t f = 0; f <= grid.n_cells; ++f) {
    max_c = std::max(max_c, std::abs(coeffs.drift(grid.face(f))));
  }
  double cap = options.dtau_max > 0.0 ? options.dtau_max : HUGE_VAL;
  if (max_c > 0.0) cap = std::min(cap, grid.dh() / (2.0 * max_c));
  cap = std::min(cap, options.tau_max);
  FpeGrid checked = grid;
  checked.dtau = std::max(cap, options.dtau0);
  checked.validate(coeffs);

  FpeSolver solver(grid, coeffs, options.form);
  solver.set_density(point_density(grid, h0));

  FirstPassageResult out;
  std::vector<double> flux;
  auto record = [&](double t0, double dt, double absorbed_before) {
    out.t.push_back(t0 + 0.5 * dt);
    flux.push_back((solver.absorbed_lower() - absorbed_before) / dt);
  };

  // The first step is replaced by implicit-Euler sub-steps to damp the
  // point initial condition.
  double dt = std::min(options.dtau0, options.tau_max);
  constexpr int kStartup = 4;
  for (int s = 0; s < kStartup; ++s) {
    const double t0 = solver.tau();
    const double before = solver.absorbed_lower();
    solver.step(dt / kStartup, true);
    record(t0, dt / kStartup, before);
  }
  while (solver.tau() < options.tau_max * (1.0 - 1e-12)) {
    dt = std::min({dt * options.growth, cap, options.tau_max - solver.tau()});
    const double t0 = solver.tau();
    const double before = solver.absorbed_lower();
    solver.step(dt);
    record(t0, dt, before);
  }

  out.absorbed = solver.absorbed_lower();
  out.remainder = solver.mass();
  out.remainder_warning = out.remainder > 0.5;
  out.density.resize(flux.size());
  for (std::size_t i = 0; i < flux.size(); ++i) {
    out.density[i] = out.absorbed > 0.0 ? flux[i] / out.absorbed : 0.0;
  }
  return out;
}

double inverse_gaussian_density(double t, double h0, double c, double d) {
  if (!(t > 0.0)) return 0.0;
  const double num = h0 + 2.0 * c * t;
  return h0 / std::sqrt(4.0 * std::numbers::pi * d * t * t * t) *
         std::exp(-num * num / (4.0 * d * t));
}

// ---------------------------------------------------------------------------
// Flight-duration model

namespace {

// Integral of exp(-k T) T^-1.5 over [t_min, inf).
double model_integral(double k, double t_min) {
  const double x = k * t_min;
  const double lead = 2.0 / std::sqrt(t_min);
  if (x < 30.0) {
    return lead * (std::exp(-x) - std::sqrt(std::numbers::pi * x) * std::erfc(std::sqrt(x)));
  }
  // Asymptotic form, avoiding the cancellation above.
  double term = 1.0 / (2.0 * x);
  double sum = term;
  for (int n = 1; n < 8; ++n) {
    term *= -(2.0 * n + 1.0) / (2.0 * x);
    sum += term;
  }
  return lead * std::exp(-x) * sum;
}

}  // namespace

FlightPdfModel::FlightPdfModel(double c, double d, double t_min) : t_min_(t_min) {
  if (!(d > 0.0)) throw std::invalid_argument("flight model needs D > 0");
  if (!(t_min > 0.0)) throw std::invalid_argument("flight model needs t_min > 0");
  rate_ = c * c / d;
  a_ = 1.0 / model_integral(rate_, t_min_);
}

double FlightPdfModel::operator()(double t) const {
  if (!(t > 0.0)) throw std::invalid_argument("flight model evaluated at T <= 0");
  if (t < t_min_) return 0.0;
  return a_ * std::exp(-rate_ * t) * std::pow(t, -1.5);
}

// ---------------------------------------------------------------------------
// Fits

namespace {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t n = 0;
};

template <class Fx, class Fy>
LineFit fit_line(std::span<const double> t, std::span<const double> density, double t_lo,
                 double t_hi, Fx fx, Fy fy) {
  if (t.size() != density.size()) throw std::invalid_argument("fit: size mismatch");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi || !(density[i] > 0.0)) continue;
    const double x = fx(t[i]);
    const double y = fy(t[i], density[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 3) {
    throw std::runtime_error("fit over [" + format_double(t_lo) + ", " + format_double(t_hi) +
                             "] has " + std::to_string(n) + " usable points");
  }
  const double dn = static_cast<double>(n);
  const double denom = dn * sxx - sx * sx;
  LineFit f;
  f.slope = (dn * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / dn;
  f.n = n;
  return f;
}

}  // namespace

SlopeFit fit_loglog_slope(std::span<const double> t, std::span<const double> density,
                          double t_lo, double t_hi) {
  const LineFit f = fit_line(
      t, density, t_lo, t_hi, [](double x) { return std::log(x); },
      [](double, double y) { return std::log(y); });
  return {f.slope, f.intercept, f.n};
}

double fit_cutoff_rate(std::span<const double> t, std::span<const double> density, double t_lo,
                       double t_hi) {
  const LineFit f = fit_line(
      t, density, t_lo, t_hi, [](double x) { return x; },
      [](double x, double y) { return std::log(y) + 1.5 * std::log(x); });
  return -f.slope;
}

// ---------------------------------------------------------------------------
// Gaussian oracle

GaussianCheck gaussian_check(double c, double d, const FpeGrid& grid_in) {
  FpeGrid grid = grid_in;
  grid.lower = Boundary::reflecting;
  grid.upper = Boundary::reflecting;
  grid.validate(FpeCoefficients::constant(c, d));

  const double width = grid.h_max - grid.h_min;
  const double sigma0 = width / 64.0;
  const double sigma1 = width / 16.0;
  double tau = HUGE_VAL;
  if (d > 0.0) tau = (sigma1 * sigma1 - sigma0 * sigma0) / (2.0 * d);
  if (c != 0.0) tau = std::min(tau, 0.25 * width / (2.0 * std::abs(c)));
  if (!std::isfinite(tau)) tau = 10.0 * grid.dtau;

  GaussianCheck out;
  out.tau = tau;
  out.h0 = 0.5 * (grid.h_min + grid.h_max) - c * tau;
  out.expected_mean = out.h0 + 2.0 * c * tau;
  out.expected_var = sigma0 * sigma0 + 2.0 * d * tau;

  FpeOptions options;
  options.startup_steps = 0;
  const FpeResult r = solve_fpe(gaussian_density(grid, out.h0, sigma0),
                                FpeCoefficients::constant(c, d), grid, tau, options);
  const std::vector<double>& p = r.snapshots.back().density;
  const std::vector<double> exact =
      gaussian_density(grid, out.expected_mean, std::sqrt(out.expected_var));

  const double dx = grid.dh();
  double m0 = 0.0, m1 = 0.0, m2 = 0.0, err2 = 0.0, ref2 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double h = grid.center(i);
    m0 += p[i] * dx;
    m1 += p[i] * h * dx;
    m2 += p[i] * h * h * dx;
    err2 += (p[i] - exact[i]) * (p[i] - exact[i]);
    ref2 += exact[i] * exact[i];
  }
  out.numerical_mean = m1 / m0;
  // Cell averaging adds dH^2 / 12 to the variance of the grid moments.
  out.numerical_var = m2 / m0 - out.numerical_mean * out.numerical_mean - dx * dx / 12.0;
  out.l2_error = std::sqrt(err2 / ref2);
  out.mass_error = std::abs(m0 - 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Output

void write_fpe_csv(const std::filesystem::path& path, const FpeResult& result) {
  CsvWriter csv(path, {"tau", "H_center", "density"});
  for (const auto& snap : result.snapshots) {
    for (std::size_t i = 0; i < result.h.size(); ++i) {
      csv.cell(snap.tau).cell(result.h[i]).cell(snap.density[i]);
      csv.end_row();
    }
  }
  csv.close();
}

void write_fpt_csv(const std::filesystem::path& path, const FirstPassageResult& result) {
  CsvWriter csv(path, {"T", "density"});
  for (std::size_t i = 0; i < result.t.size(); ++i) {
    csv.cell(result.t[i]).cell(result.density[i]);
    csv.end_row();
  }
  csv.close();
}

}  // namespace latticewalk
