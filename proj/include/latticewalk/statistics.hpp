#ifndef LATTICEWALK_STATISTICS_HPP_
#define LATTICEWALK_STATISTICS_HPP_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latticewalk/ensemble.hpp"

namespace latticewalk {

// ---------------------------------------------------------------------------
// Flights

/// Interval between two successive sign changes of the momentum.
struct FlightRecord {
  std::size_t trajectory_id = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  double duration = 0.0;
  std::optional<double> peak_abs_p;  // only when state samples fall inside the flight
};

struct FlightExtraction {
  std::vector<FlightRecord> flights;
  std::size_t censored = 0;     // partial intervals at the run boundaries
  double censored_time = 0.0;   // total length of those intervals
};

/// Flights from sign-change times observed on [tau_start, tau_end]. The
/// leading and trailing partial intervals are censored: a run with no sign
/// change has one censored interval, otherwise two.
FlightExtraction extract_flights(std::span<const double> sign_changes, double tau_start,
                                 double tau_end, std::size_t trajectory_id = 0);

FlightExtraction extract_flights(const TrajectoryLog& log);

struct FlightSet {
  std::vector<FlightRecord> flights;
  std::size_t censored = 0;
  double censored_time = 0.0;
  double observed_time = 0.0;
  std::size_t sign_changes = 0;
  std::size_t aborted_trajectories = 0;  // excluded

  std::vector<double> durations() const;
  double censored_fraction() const;  // censored time / observed time
  /// Observed time per sign change. Unlike the mean of complete flights it
  /// keeps the censored time, so flights longer than the run still count.
  /// 0 without sign changes.
  double exposure_mean() const;
};

/// Flights of every finished trajectory; aborted trajectories are counted and skipped.
FlightSet collect_flights(std::span<const TrajectoryLog> logs);

struct DurationSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
};

DurationSummary summarize_durations(std::span<const double> durations);

// ---------------------------------------------------------------------------
// Log-binned densities and power-law slopes

struct PowerLawFit {
  double alpha = 0.0;
  double std_error = 0.0;
  double r2 = 0.0;
  double t_lo = 0.0;  // outer edges of the bins used
  double t_hi = 0.0;
  std::size_t first_bin = 0;
  std::size_t last_bin = 0;  // inclusive
  std::size_t n_bins = 0;    // occupied bins in the fit
};

/// Histogram on geometrically spaced bins with its normalized density.
struct LogHistogram {
  std::vector<double> edges;   // strictly increasing, size = counts.size() + 1
  std::vector<double> counts;  // may be fractional for model histograms
  std::vector<double> density; // count / (total * width)
  double total = 0.0;
  std::optional<PowerLawFit> fit;

  std::size_t size() const { return counts.size(); }
  double center(std::size_t i) const;  // geometric bin centre
  double width(std::size_t i) const { return edges[i + 1] - edges[i]; }
  double integral() const;
};

/// Builds a histogram from explicit edges and (possibly fractional) counts.
LogHistogram make_histogram(std::vector<double> edges, std::vector<double> counts);

/// Geometric bins covering [min, max] of the samples with the given number of
/// bins per decade; a single distinct value gets one bin centred on it.
/// Throws std::invalid_argument on empty input or a non-positive sample.
LogHistogram log_binned_pdf(std::span<const double> durations, int bins_per_decade = 10);

struct FitOptions {
  std::optional<std::pair<double, double>> range;  // [T_lo, T_hi] on bin centres
  double t_min = 0.0;  // auto-range only: windows start at bin centres >= t_min
  double min_r2 = 0.98;
  std::size_t min_bins = 5;
};

/// Start of the diffusive regime used to floor auto-ranged fits: twice the
/// mean time between spontaneous emissions, 4/gamma (0 when gamma = 0).
double diffusive_time_floor(const LatticeParams& params);

/// Weighted least-squares slope of log10(density) against log10(T), weights
/// equal to bin counts. Without an explicit range, the widest contiguous bin
/// window with R^2 >= min_r2 is used, starting after the first bin and ending
/// before the tail onset: the first bin past the most populated one that holds
/// less than one count. Empty bins inside a window are skipped.
/// Throws std::runtime_error naming the range when too few bins are occupied.
PowerLawFit fit_power_law_slope(const LogHistogram& hist, const FitOptions& options = {});

// ---------------------------------------------------------------------------
// Energy-space diffusion

/// Consecutive jumps j-1, j of one trajectory.
struct EnergyIncrement {
  double h_prev = 0.0;  // energy just after jump j-1
  double dh = 0.0;      // H_j - H_{j-1}
  double dtau = 0.0;    // tau_j - tau_{j-1}
  double p_pre = 0.0;   // momentum just before jump j
};

std::vector<EnergyIncrement> energy_increments(std::span<const TrajectoryLog> logs);

struct DiffusionBinSpec {
  double h_min = -0.5;
  double h_max = 3.0;
  double width = 0.25;
  std::size_t min_count = 100;
};

struct DiffusionBin {
  double h_center = 0.0;
  double d_hat = 0.0;  // var(dH) / (4 <dtau>)
  double c_hat = 0.0;  // <dH> / <dtau>
  std::size_t n_events = 0;
  double mean_dh = 0.0;
  double var_dh = 0.0;
  double mean_dtau = 0.0;
};

struct DiffusionEstimate {
  std::vector<DiffusionBin> bins;     // reported bins, increasing H
  std::vector<DiffusionBin> dropped;  // bins under min_count
};

DiffusionEstimate estimate_diffusion(std::span<const EnergyIncrement> increments,
                                     const DiffusionBinSpec& spec = {});
DiffusionEstimate estimate_diffusion(std::span<const TrajectoryLog> logs,
                                     const DiffusionBinSpec& spec = {});

// ---------------------------------------------------------------------------
// Capture momentum

struct CaptureOptions {
  double exclusion_window = 0.0;  // around each sign change; <= 0 means 2/gamma
  double bin_width = 25.0;
  double peak_ratio = 0.9;  // secondary peaks at or above this fraction are candidates
};

struct CaptureMomentum {
  double p_g = 0.0;
  std::vector<double> candidates;  // one per qualifying peak, strongest first
  bool multimodal = false;
  std::size_t n_samples = 0;
};

/// Mode of the |p| histogram of mid-flight samples.
/// Throws std::runtime_error when no sample survives the exclusion window.
CaptureMomentum detect_capture_momentum(std::span<const TrajectoryLog> logs,
                                        const LatticeParams& params,
                                        const CaptureOptions& options = {});

// ---------------------------------------------------------------------------
// Detuning sweep

struct SweepOptions {
  int bins_per_decade = 10;
  FitOptions fit;
  bool auto_t_min = true;  // replace fit.t_min by diffusive_time_floor at each point
  std::size_t min_flights = 1000;
  std::function<void(double delta, std::size_t done, std::size_t total)> progress;
};

struct SweepRow {
  double delta = 0.0;
  std::size_t n_flights = 0;
  double mean_T = 0.0;
  double mean_T_us = 0.0;
  double median_T_us = 0.0;
  double exposure_T_us = 0.0;  // FlightSet::exposure_mean in microseconds
  bool fitted = false;         // alpha and alpha_stderr are valid
  double alpha = 0.0;
  double alpha_stderr = 0.0;
  double censored_fraction = 0.0;
  std::optional<double> p_g;
  bool ok = false;
  std::string note;
};

/// Runs the ensemble and flight analysis at each detuning. A failing point is
/// recorded in its row and the sweep continues; a point whose slope fit fails
/// keeps its other columns and is still ok. Throws std::invalid_argument
/// for fewer than two points.
std::vector<SweepRow> detuning_sweep(std::span<const double> deltas, const EnsembleConfig& base,
                                     const SweepOptions& options = {});

// ---------------------------------------------------------------------------
// Output tables

/// flights.csv: trajectory_id, t_start, t_end, T, T_us.
void write_flights_csv(const std::filesystem::path& path, const FlightSet& flights,
                       const LatticeParams& params);

/// pdf.csv: T_center, density, then bin edges, count, in_fit, T_center_us and
/// the fitted alpha, alpha_stderr (empty without a fit).
void write_pdf_csv(const std::filesystem::path& path, const LogHistogram& hist,
                   const LatticeParams& params);

/// diffusion.csv: H_center, D_hat, C_hat, n, D_analytic.
void write_diffusion_csv(const std::filesystem::path& path, const DiffusionEstimate& estimate,
                         const LatticeParams& params, double d_denominator = 16.0);

/// sweep.csv: delta, mean_T_us, alpha, alpha_stderr, n_flights, then
/// median_T_us, exposure_T_us, censored_fraction, p_g, ok, note.
void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows);

}  // namespace latticewalk

#endif  // LATTICEWALK_STATISTICS_HPP_
