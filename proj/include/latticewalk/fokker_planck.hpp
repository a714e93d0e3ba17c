#ifndef LATTICEWALK_FOKKER_PLANCK_HPP_
#define LATTICEWALK_FOKKER_PLANCK_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latticewalk/types.hpp"

namespace latticewalk {

/// Energy diffusion coefficient D = omega_r h gamma / 12 + delta^2 / denominator,
/// with h floored at 0.
double analytic_diffusion(double h, const LatticeParams& params, double denominator = 16.0);

/// Energy drift c = omega_r gamma / 12 + delta gamma / 2.
double analytic_drift(const LatticeParams& params);

enum class Boundary { absorbing, reflecting };
enum class FpeScheme { crank_nicolson, implicit_euler, explicit_euler };

/// Where an h-dependent D enters the equation.
/// conservative:     dP/dtau = -d(2cP)/dH + d/dH (D dP/dH)
/// non_conservative: dP/dtau = -2c dP/dH + D d2P/dH2
enum class FpeForm { conservative, non_conservative };

/// Drift c(H) and diffusion D(H) of the energy process.
struct FpeCoefficients {
  std::function<double(double)> drift;
  std::function<double(double)> diffusion;

  static FpeCoefficients constant(double c, double d);
  static FpeCoefficients analytic(const LatticeParams& params, double denominator = 16.0);
  /// Piecewise-linear in H through the given nodes, constant beyond the ends.
  static FpeCoefficients tabulated(std::vector<double> h, std::vector<double> c,
                                   std::vector<double> d);
  /// Nodes from a diffusion.csv (columns H_center, D_hat, C_hat).
  static FpeCoefficients from_diffusion_csv(const std::filesystem::path& path);
};

struct FpeGrid {
  double h_min = 0.0;
  double h_max = 10.0;
  std::size_t n_cells = 2000;
  double dtau = 1000.0;
  Boundary lower = Boundary::absorbing;
  Boundary upper = Boundary::reflecting;
  FpeScheme scheme = FpeScheme::crank_nicolson;

  double dh() const { return (h_max - h_min) / static_cast<double>(n_cells); }
  double center(std::size_t i) const { return h_min + (static_cast<double>(i) + 0.5) * dh(); }
  double face(std::size_t f) const { return h_min + static_cast<double>(f) * dh(); }
  std::vector<double> centers() const;

  /// Shape checks only: h_min < h_max, n_cells >= 16, dtau > 0.
  void validate() const;
  /// Full setup check against the coefficients: grid Peclet number
  /// 2|c| dH / D below 2, dtau <= dH / (2|c|), and for the explicit scheme
  /// dtau <= dH^2 / (2 max D). Throws ConfigError suggesting a refinement.
  void validate(const FpeCoefficients& coeffs) const;
};

/// Finite-volume solver on a fixed grid. Probability that leaves through an
/// absorbing boundary is accumulated per side, so that mass() plus the
/// absorbed totals stays at its initial value (conservative form).
class FpeSolver {
 public:
  FpeSolver(const FpeGrid& grid, const FpeCoefficients& coeffs,
            FpeForm form = FpeForm::conservative);

  const FpeGrid& grid() const { return grid_; }
  /// Cell-average densities; throws std::invalid_argument on a size mismatch
  /// or negative entries.
  void set_density(std::vector<double> density);
  const std::vector<double>& density() const { return p_; }

  /// Advances by dt with the grid's scheme, or with implicit Euler when
  /// `damped` is set. Throws NumericalFault when a density falls below
  /// -1e-12 times the peak density.
  void step(double dt, bool damped = false);

  double tau() const { return tau_; }
  double mass() const;
  double absorbed_lower() const { return absorbed_lower_; }
  double absorbed_upper() const { return absorbed_upper_; }

 private:
  double outflow_lower(const std::vector<double>& p) const { return w_lower_ * p.front(); }
  double outflow_upper(const std::vector<double>& p) const { return w_upper_ * p.back(); }
  void apply(const std::vector<double>& p, std::vector<double>& out) const;  // out = A p

  FpeGrid grid_;
  std::vector<double> sub_, diag_, sup_;  // tridiagonal A
  double w_lower_ = 0.0;
  double w_upper_ = 0.0;
  std::vector<double> p_;
  std::vector<double> work_a_, work_b_, work_c_, work_d_;
  double tau_ = 0.0;
  double absorbed_lower_ = 0.0;
  double absorbed_upper_ = 0.0;
};

struct FpeSnapshot {
  double tau = 0.0;
  std::vector<double> density;
};

struct FpeOptions {
  FpeForm form = FpeForm::conservative;
  std::size_t snapshots = 1;     // evenly spaced in tau, the last at tau_span
  unsigned startup_steps = 4;    // implicit-Euler sub-steps replacing the first step
};

struct FpeResult {
  std::vector<double> h;
  std::vector<FpeSnapshot> snapshots;
  double absorbed_lower = 0.0;
  double absorbed_upper = 0.0;
  std::uint64_t steps = 0;

  double final_mass(double dh) const;
};

/// Evolves `initial` over tau_span on the grid's fixed step.
/// Throws std::invalid_argument unless the initial density is nonnegative
/// and integrates to 1 within 1e-9, ConfigError for grid violations.
FpeResult solve_fpe(const std::vector<double>& initial, const FpeCoefficients& coeffs,
                    const FpeGrid& grid, double tau_span, const FpeOptions& options = {});

/// Density with its mass split between the two cells nearest h0, so that the
/// first moment equals h0.
std::vector<double> point_density(const FpeGrid& grid, double h0);

/// Cell averages of a normal density, renormalised on the grid.
std::vector<double> gaussian_density(const FpeGrid& grid, double mean, double stddev);

struct FirstPassageOptions {
  double tau_max = 1e8;
  double dtau0 = 1.0;     // first step
  double growth = 1.02;   // step ratio
  double dtau_max = 0.0;  // <= 0: limited only by the drift accuracy bound
  FpeForm form = FpeForm::conservative;
};

struct FirstPassageResult {
  std::vector<double> t;        // step midpoints
  std::vector<double> density;  // absorbed flux / total absorbed
  double absorbed = 0.0;        // through the lower boundary
  double remainder = 0.0;       // still inside at tau_max
  bool remainder_warning = false;  // remainder above 50%
};

/// Density of the first time H reaches the lower boundary from h0.
/// The grid's lower boundary must be absorbing.
FirstPassageResult first_passage_pdf(double h0, const FpeCoefficients& coeffs,
                                     const FpeGrid& grid, const FirstPassageOptions& options = {});

/// First-passage density to 0 of constant drift-diffusion started at h0:
/// h0 / sqrt(4 pi D T^3) exp(-(h0 + 2cT)^2 / (4 D T)).
double inverse_gaussian_density(double t, double h0, double c, double d);

/// Normalized flight-duration density A exp(-c^2 T / D) T^-1.5 on [t_min, inf).
class FlightPdfModel {
 public:
  /// Throws std::invalid_argument unless d > 0 and t_min > 0.
  FlightPdfModel(double c, double d, double t_min = 1.0);

  double operator()(double t) const;  // contract: t > 0; 0 below t_min
  double amplitude() const { return a_; }
  double rate() const { return rate_; }
  double t_min() const { return t_min_; }

 private:
  double rate_;
  double t_min_;
  double a_;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t n = 0;
};

/// Least-squares slope of log(density) against log(t) over [t_lo, t_hi].
SlopeFit fit_loglog_slope(std::span<const double> t, std::span<const double> density,
                          double t_lo, double t_hi);

/// Exponential cutoff rate k of density ~ T^-1.5 exp(-k T), from a linear fit
/// of log(density T^1.5) against T over [t_lo, t_hi].
double fit_cutoff_rate(std::span<const double> t, std::span<const double> density, double t_lo,
                       double t_hi);

struct GaussianCheck {
  double tau = 0.0;
  double h0 = 0.0;
  double expected_mean = 0.0;
  double numerical_mean = 0.0;
  double expected_var = 0.0;
  double numerical_var = 0.0;
  double l2_error = 0.0;  // ||P - P_exact||_2 / ||P_exact||_2 on the grid
  double mass_error = 0.0;
};

/// Constant-coefficient solve against the exact Gaussian (mean moving at 2c,
/// variance growing at 2D) on reflecting walls. The initial width is
/// 1/64 of the domain; the run stops when the width reaches 1/16 of the
/// domain or the mean has moved a quarter of it, whichever comes first.
GaussianCheck gaussian_check(double c, double d, const FpeGrid& grid);

void write_fpe_csv(const std::filesystem::path& path, const FpeResult& result);
void write_fpt_csv(const std::filesystem::path& path, const FirstPassageResult& result);

}  // namespace latticewalk

#endif  // LATTICEWALK_FOKKER_PLANCK_HPP_
