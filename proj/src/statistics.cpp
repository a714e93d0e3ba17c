#include "latticewalk/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "latticewalk/csv.hpp"
#include "latticewalk/fokker_planck.hpp"
#include "latticewalk/observables.hpp"

namespace latticewalk {

// ---------------------------------------------------------------------------
// Flights

FlightExtraction extract_flights(std::span<const double> sign_changes, double tau_start,
                                 double tau_end, std::size_t trajectory_id) {
  FlightExtraction out;
  if (sign_changes.empty()) {
    out.censored = 1;
    out.censored_time = tau_end - tau_start;
    return out;
  }
  out.censored = 2;
  out.censored_time = (sign_changes.front() - tau_start) + (tau_end - sign_changes.back());
  for (std::size_t i = 1; i < sign_changes.size(); ++i) {
    FlightRecord f;
    f.trajectory_id = trajectory_id;
    f.t_start = sign_changes[i - 1];
    f.t_end = sign_changes[i];
    f.duration = f.t_end - f.t_start;
    if (f.duration > 0.0) out.flights.push_back(f);
  }
  return out;
}

FlightExtraction extract_flights(const TrajectoryLog& log) {
  FlightExtraction out =
      extract_flights(log.sign_changes, log.tau_start, log.observed_end(), log.trajectory_id);
  if (log.samples.empty()) return out;

  // Peak |p| from the samples inside each flight; both lists are time ordered.
  auto it = log.samples.begin();
  for (auto& f : out.flights) {
    while (it != log.samples.end() && it->tau < f.t_start) ++it;
    double peak = -1.0;
    for (auto s = it; s != log.samples.end() && s->tau <= f.t_end; ++s) {
      peak = std::max(peak, std::abs(s->p));
    }
    if (peak >= 0.0) f.peak_abs_p = peak;
  }
  return out;
}

std::vector<double> FlightSet::durations() const {
  std::vector<double> d;
  d.reserve(flights.size());
  for (const auto& f : flights) d.push_back(f.duration);
  return d;
}

double FlightSet::censored_fraction() const {
  return observed_time > 0.0 ? censored_time / observed_time : 0.0;
}

double FlightSet::exposure_mean() const {
  return sign_changes > 0 ? observed_time / static_cast<double>(sign_changes) : 0.0;
}

FlightSet collect_flights(std::span<const TrajectoryLog> logs) {
  FlightSet set;
  for (const auto& log : logs) {
    if (log.status != TrajectoryStatus::finished) {
      ++set.aborted_trajectories;
      continue;
    }
    FlightExtraction ex = extract_flights(log);
    set.flights.insert(set.flights.end(), ex.flights.begin(), ex.flights.end());
    set.censored += ex.censored;
    set.censored_time += ex.censored_time;
    set.sign_changes += log.sign_changes.size();
    set.observed_time += log.observed_end() - log.tau_start;
  }
  return set;
}

DurationSummary summarize_durations(std::span<const double> durations) {
  DurationSummary s;
  s.n = durations.size();
  if (s.n == 0) return s;
  s.mean = std::accumulate(durations.begin(), durations.end(), 0.0) / static_cast<double>(s.n);
  std::vector<double> sorted(durations.begin(), durations.end());
  std::sort(sorted.begin(), sorted.end());
  s.median = s.n % 2 == 1 ? sorted[s.n / 2] : 0.5 * (sorted[s.n / 2 - 1] + sorted[s.n / 2]);
  return s;
}

// ---------------------------------------------------------------------------
// Histograms

double LogHistogram::center(std::size_t i) const { return std::sqrt(edges[i] * edges[i + 1]); }

double LogHistogram::integral() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < size(); ++i) sum += density[i] * width(i);
  return sum;
}

LogHistogram make_histogram(std::vector<double> edges, std::vector<double> counts) {
  if (edges.size() != counts.size() + 1 || counts.empty()) {
    throw std::invalid_argument("histogram needs edges.size() == counts.size() + 1 > 1");
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw std::invalid_argument("histogram edges must increase");
  }
  LogHistogram h;
  h.edges = std::move(edges);
  h.counts = std::move(counts);
  h.total = std::accumulate(h.counts.begin(), h.counts.end(), 0.0);
  h.density.resize(h.counts.size(), 0.0);
  if (h.total > 0.0) {
    for (std::size_t i = 0; i < h.size(); ++i) h.density[i] = h.counts[i] / (h.total * h.width(i));
  }
  return h;
}

LogHistogram log_binned_pdf(std::span<const double> durations, int bins_per_decade) {
  if (durations.empty()) throw std::invalid_argument("log_binned_pdf: no samples");
  if (bins_per_decade < 1) throw std::invalid_argument("log_binned_pdf: bins_per_decade < 1");
  double lo = durations.front();
  double hi = durations.front();
  for (double d : durations) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw std::invalid_argument("log_binned_pdf: durations must be positive and finite");
    }
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }

  const double ratio = std::pow(10.0, 1.0 / bins_per_decade);
  std::vector<double> edges;
  if (hi == lo) {
    const double half = std::sqrt(ratio);
    edges = {lo / half, lo * half};
  } else {
    const auto n = static_cast<std::size_t>(
        std::max(1.0, std::ceil(std::log10(hi / lo) * bins_per_decade - 1e-9)));
    edges.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      edges[k] = lo * std::pow(10.0, static_cast<double>(k) / bins_per_decade);
    }
    edges.back() = std::max(edges.back(), hi);
  }

  std::vector<double> counts(edges.size() - 1, 0.0);
  const double log_lo = std::log10(edges.front());
  for (double d : durations) {
    auto k = static_cast<std::ptrdiff_t>(std::floor((std::log10(d) - log_lo) * bins_per_decade));
    k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(counts.size()) - 1);
    // Repair rounding at the edges.
    while (k > 0 && d < edges[k]) --k;
    while (k + 1 < static_cast<std::ptrdiff_t>(counts.size()) && d >= edges[k + 1]) ++k;
    counts[k] += 1.0;
  }
  return make_histogram(std::move(edges), std::move(counts));
}

namespace {

struct LineFit {
  double slope = 0.0;
  double std_error = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

// Weighted fit of log10(density) vs log10(T) over occupied bins in [first, last].
LineFit fit_window(const LogHistogram& h, std::size_t first, std::size_t last) {
  double sw = 0.0, sx = 0.0, sy = 0.0;
  LineFit fit;
  for (std::size_t i = first; i <= last; ++i) {
    if (h.counts[i] <= 0.0) continue;
    const double w = h.counts[i];
    sw += w;
    sx += w * std::log10(h.center(i));
    sy += w * std::log10(h.density[i]);
    ++fit.n;
  }
  if (fit.n < 2) return fit;
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = first; i <= last; ++i) {
    if (h.counts[i] <= 0.0) continue;
    const double w = h.counts[i];
    const double dx = std::log10(h.center(i)) - mx;
    const double dy = std::log10(h.density[i]) - my;
    sxx += w * dx * dx;
    sxy += w * dx * dy;
    syy += w * dy * dy;
  }
  if (sxx <= 0.0) return fit;
  fit.slope = sxy / sxx;
  const double ss_res = std::max(0.0, syy - fit.slope * sxy);
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  // Poisson scatter of log10(count) is log10(e)/sqrt(count); inflate by the
  // reduced chi-square when the scatter is larger than that.
  const double log10e = 0.43429448190325176;
  double scale = 1.0;
  if (fit.n > 2) {
    const double chi2_red = ss_res / (log10e * log10e) / static_cast<double>(fit.n - 2);
    scale = std::max(1.0, std::sqrt(chi2_red));
  }
  fit.std_error = log10e / std::sqrt(sxx) * scale;
  return fit;
}

std::string range_text(double lo, double hi) {
  return "[" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
}

}  // namespace

double diffusive_time_floor(const LatticeParams& params) {
  return params.gamma > 0.0 ? 4.0 / params.gamma : 0.0;
}

PowerLawFit fit_power_law_slope(const LogHistogram& hist, const FitOptions& options) {
  const std::size_t n = hist.size();
  auto make_result = [&](std::size_t first, std::size_t last, const LineFit& lf) {
    PowerLawFit r;
    r.alpha = lf.slope;
    r.std_error = lf.std_error;
    r.r2 = lf.r2;
    r.first_bin = first;
    r.last_bin = last;
    r.n_bins = lf.n;
    r.t_lo = hist.edges[first];
    r.t_hi = hist.edges[last + 1];
    return r;
  };

  if (options.range) {
    const auto [lo, hi] = *options.range;
    std::size_t first = n, last = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = hist.center(i);
      if (c >= lo && c <= hi) {
        first = std::min(first, i);
        last = std::max(last, i);
      }
    }
    if (first == n) throw std::runtime_error("no bins in fit range " + range_text(lo, hi));
    const LineFit lf = fit_window(hist, first, last);
    if (lf.n < options.min_bins) {
      throw std::runtime_error("fit range " + range_text(lo, hi) + " has " +
                               std::to_string(lf.n) + " occupied bins, need " +
                               std::to_string(options.min_bins));
    }
    return make_result(first, last, lf);
  }

  // Tail onset: the first bin holding less than one count beyond the most
  // populated bin. Sparse bins at short T do not end the window.
  const auto mode = static_cast<std::size_t>(
      std::max_element(hist.counts.begin(), hist.counts.end()) - hist.counts.begin());
  std::size_t end = n;
  for (std::size_t i = std::max<std::size_t>(mode, 1); i < n; ++i) {
    if (hist.counts[i] < 1.0) {
      end = i;
      break;
    }
  }
  std::size_t start = 1;
  while (start < end && hist.center(start) < options.t_min) ++start;
  std::optional<PowerLawFit> best;
  for (std::size_t first = start; first < end; ++first) {
    for (std::size_t last = end - 1; last >= first && last + 1 > first; --last) {
      const std::size_t span = last - first + 1;
      if (best && span < best->last_bin - best->first_bin + 1) break;
      const LineFit lf = fit_window(hist, first, last);
      if (lf.n < options.min_bins) break;
      if (lf.r2 < options.min_r2) continue;
      const std::size_t best_span = best ? best->last_bin - best->first_bin + 1 : 0;
      if (!best || span > best_span || (span == best_span && lf.r2 > best->r2)) {
        best = make_result(first, last, lf);
      }
      break;  // shorter windows with this start cannot be wider
    }
  }
  if (!best) {
    const double lo = hist.edges[std::min(start, n)];
    const double hi = hist.edges[end];
    throw std::runtime_error("no window of >= " + std::to_string(options.min_bins) +
                             " occupied bins with R^2 >= " + std::to_string(options.min_r2) +
                             " in " + range_text(lo, hi));
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Diffusion

std::vector<EnergyIncrement> energy_increments(std::span<const TrajectoryLog> logs) {
  std::vector<EnergyIncrement> out;
  for (const auto& log : logs) {
    if (log.status != TrajectoryStatus::finished) continue;
    for (std::size_t j = 1; j < log.jumps.size(); ++j) {
      const SpontaneousEvent& prev = log.jumps[j - 1];
      const SpontaneousEvent& cur = log.jumps[j];
      out.push_back({prev.post_energy, cur.post_energy - prev.post_energy, cur.interval,
                     cur.pre_state.p});
    }
  }
  return out;
}

DiffusionEstimate estimate_diffusion(std::span<const EnergyIncrement> increments,
                                     const DiffusionBinSpec& spec) {
  if (!(spec.width > 0.0) || !(spec.h_max > spec.h_min)) {
    throw std::invalid_argument("diffusion bins need width > 0 and h_max > h_min");
  }
  const auto n_bins = static_cast<std::size_t>(std::ceil((spec.h_max - spec.h_min) / spec.width));
  struct Acc {
    double s_dh = 0.0, s_dh2 = 0.0, s_dtau = 0.0;
    std::size_t n = 0;
  };
  std::vector<Acc> acc(n_bins);
  for (const auto& inc : increments) {
    if (inc.h_prev < spec.h_min || inc.h_prev >= spec.h_max) continue;
    auto k = static_cast<std::size_t>((inc.h_prev - spec.h_min) / spec.width);
    k = std::min(k, n_bins - 1);
    acc[k].s_dh += inc.dh;
    acc[k].s_dh2 += inc.dh * inc.dh;
    acc[k].s_dtau += inc.dtau;
    ++acc[k].n;
  }

  DiffusionEstimate est;
  for (std::size_t k = 0; k < n_bins; ++k) {
    const Acc& a = acc[k];
    if (a.n == 0) continue;
    DiffusionBin b;
    b.h_center = spec.h_min + (static_cast<double>(k) + 0.5) * spec.width;
    b.n_events = a.n;
    const double nn = static_cast<double>(a.n);
    b.mean_dh = a.s_dh / nn;
    b.var_dh = a.n > 1 ? (a.s_dh2 - nn * b.mean_dh * b.mean_dh) / (nn - 1.0) : 0.0;
    b.mean_dtau = a.s_dtau / nn;
    b.d_hat = b.var_dh / (4.0 * b.mean_dtau);
    b.c_hat = b.mean_dh / b.mean_dtau;
    (a.n >= spec.min_count ? est.bins : est.dropped).push_back(b);
  }
  return est;
}

DiffusionEstimate estimate_diffusion(std::span<const TrajectoryLog> logs,
                                     const DiffusionBinSpec& spec) {
  const auto inc = energy_increments(logs);
  return estimate_diffusion(std::span<const EnergyIncrement>(inc), spec);
}

// ---------------------------------------------------------------------------
// Capture momentum

CaptureMomentum detect_capture_momentum(std::span<const TrajectoryLog> logs,
                                        const LatticeParams& params,
                                        const CaptureOptions& options) {
  double window = options.exclusion_window;
  if (window <= 0.0) window = params.gamma > 0.0 ? 2.0 / params.gamma : 0.0;
  if (!(options.bin_width > 0.0)) throw std::invalid_argument("bin_width must be > 0");

  std::map<long, std::pair<std::size_t, double>> bins;  // bin -> (count, sum |p|)
  std::size_t used = 0;
  for (const auto& log : logs) {
    if (log.status != TrajectoryStatus::finished) continue;
    const auto& sc = log.sign_changes;
    for (const auto& s : log.samples) {
      auto it = std::lower_bound(sc.begin(), sc.end(), s.tau - window);
      if (it != sc.end() && *it <= s.tau + window) continue;
      const double ap = std::abs(s.p);
      auto& b = bins[static_cast<long>(std::floor(ap / options.bin_width))];
      ++b.first;
      b.second += ap;
      ++used;
    }
  }
  if (used == 0) throw std::runtime_error("no mid-flight samples for capture momentum");

  auto count_at = [&](long k) -> std::size_t {
    auto it = bins.find(k);
    return it == bins.end() ? 0 : it->second.first;
  };
  std::size_t max_count = 0;
  for (const auto& [k, b] : bins) max_count = std::max(max_count, b.first);

  // Local maxima (plateaus count once, at their left end).
  std::vector<std::pair<std::size_t, long>> peaks;
  for (const auto& [k, b] : bins) {
    if (b.first < options.peak_ratio * static_cast<double>(max_count)) continue;
    if (count_at(k - 1) >= b.first) continue;
    long right = k + 1;
    while (count_at(right) == b.first) ++right;
    if (count_at(right) > b.first) continue;
    peaks.emplace_back(b.first, k);
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });

  // Centroid of |p| over the peak bin and its neighbours.
  auto centroid = [&](long k) {
    double sum = 0.0;
    std::size_t cnt = 0;
    for (long j = k - 1; j <= k + 1; ++j) {
      auto it = bins.find(j);
      if (it == bins.end()) continue;
      cnt += it->second.first;
      sum += it->second.second;
    }
    return sum / static_cast<double>(cnt);
  };

  CaptureMomentum out;
  out.n_samples = used;
  for (const auto& [cnt, k] : peaks) out.candidates.push_back(centroid(k));
  out.p_g = out.candidates.front();
  out.multimodal = out.candidates.size() > 1;
  return out;
}

// ---------------------------------------------------------------------------
// Sweep

std::vector<SweepRow> detuning_sweep(std::span<const double> deltas, const EnsembleConfig& base,
                                     const SweepOptions& options) {
  if (deltas.size() < 2) throw std::invalid_argument(">=2 points required for a sweep");
  std::vector<SweepRow> rows;
  std::size_t done = 0;
  for (double delta : deltas) {
    SweepRow row;
    row.delta = delta;
    try {
      EnsembleConfig cfg = base;
      cfg.params.delta = delta;
      cfg.keep_logs = true;
      if (cfg.output_dir) {
        cfg.output_dir = *cfg.output_dir / ("delta_" + format_double(delta));
      }
      const EnsembleResult result = run_ensemble(cfg);
      const FlightSet flights = collect_flights(result.logs);
      const auto durations = flights.durations();
      row.n_flights = durations.size();
      row.censored_fraction = flights.censored_fraction();
      row.exposure_T_us = tau_to_microseconds(flights.exposure_mean(), cfg.params);
      if (durations.empty()) throw std::runtime_error("no complete flights");
      const DurationSummary ds = summarize_durations(durations);
      row.mean_T = ds.mean;
      row.mean_T_us = tau_to_microseconds(ds.mean, cfg.params);
      row.median_T_us = tau_to_microseconds(ds.median, cfg.params);
      if (cfg.record.sample_decimation > 0) {
        try {
          row.p_g = detect_capture_momentum(result.logs, cfg.params).p_g;
        } catch (const std::exception&) {
        }
      }
      const LogHistogram hist = log_binned_pdf(durations, options.bins_per_decade);
      FitOptions fit_options = options.fit;
      if (options.auto_t_min) fit_options.t_min = diffusive_time_floor(cfg.params);
      row.ok = true;
      if (row.n_flights < options.min_flights) {
        row.note = "only " + std::to_string(row.n_flights) + " flights (< " +
                   std::to_string(options.min_flights) + ")";
      }
      try {
        const PowerLawFit fit = fit_power_law_slope(hist, fit_options);
        row.alpha = fit.alpha;
        row.alpha_stderr = fit.std_error;
        row.fitted = true;
      } catch (const std::exception& e) {
        row.note += (row.note.empty() ? "" : "; ") + std::string(e.what());
      }
    } catch (const std::exception& e) {
      row.ok = false;
      row.note = e.what();
    }
    rows.push_back(row);
    ++done;
    if (options.progress) options.progress(delta, done, deltas.size());
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Output tables

void write_flights_csv(const std::filesystem::path& path, const FlightSet& flights,
                       const LatticeParams& params) {
  CsvWriter csv(path, {"trajectory_id", "t_start", "t_end", "T", "T_us"});
  for (const auto& f : flights.flights) {
    csv.cell(static_cast<unsigned long long>(f.trajectory_id)).cell(f.t_start).cell(f.t_end);
    csv.cell(f.duration).cell(tau_to_microseconds(f.duration, params));
    csv.end_row();
  }
  csv.close();
}

void write_pdf_csv(const std::filesystem::path& path, const LogHistogram& hist,
                   const LatticeParams& params) {
  CsvWriter csv(path, {"T_center", "density", "T_lo", "T_hi", "count", "in_fit", "T_center_us",
                       "alpha", "alpha_stderr"});
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const bool in_fit = hist.fit && i >= hist.fit->first_bin && i <= hist.fit->last_bin &&
                        hist.counts[i] > 0.0;
    csv.cell(hist.center(i)).cell(hist.density[i]).cell(hist.edges[i]).cell(hist.edges[i + 1]);
    csv.cell(hist.counts[i]).cell(in_fit ? "1" : "0");
    csv.cell(tau_to_microseconds(hist.center(i), params));
    if (hist.fit) {
      csv.cell(hist.fit->alpha).cell(hist.fit->std_error);
    } else {
      csv.empty().empty();
    }
    csv.end_row();
  }
  csv.close();
}

void write_diffusion_csv(const std::filesystem::path& path, const DiffusionEstimate& estimate,
                         const LatticeParams& params, double d_denominator) {
  CsvWriter csv(path, {"H_center", "D_hat", "C_hat", "n", "D_analytic"});
  for (const auto& b : estimate.bins) {
    csv.cell(b.h_center).cell(b.d_hat).cell(b.c_hat);
    csv.cell(static_cast<unsigned long long>(b.n_events));
    csv.cell(analytic_diffusion(b.h_center, params, d_denominator));
    csv.end_row();
  }
  csv.close();
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows) {
  CsvWriter csv(path, {"delta", "mean_T_us", "alpha", "alpha_stderr", "n_flights", "median_T_us",
                       "exposure_T_us", "censored_fraction", "p_g", "ok", "note"});
  for (const auto& r : rows) {
    std::string note = r.note;
    for (char& ch : note) {
      if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
    }
    csv.cell(r.delta);
    if (r.n_flights > 0) {
      csv.cell(r.mean_T_us);
    } else {
      csv.empty();
    }
    if (r.fitted) {
      csv.cell(r.alpha).cell(r.alpha_stderr);
    } else {
      csv.empty().empty();
    }
    csv.cell(static_cast<unsigned long long>(r.n_flights));
    if (r.n_flights > 0) {
      csv.cell(r.median_T_us);
    } else {
      csv.empty();
    }
    if (r.ok) {
      csv.cell(r.exposure_T_us);
    } else {
      csv.empty();
    }
    csv.cell(r.censored_fraction);
    if (r.p_g) {
      csv.cell(*r.p_g);
    } else {
      csv.empty();
    }
    csv.cell(r.ok ? "1" : "0").cell(note);
    csv.end_row();
  }
  csv.close();
}

}  // namespace latticewalk
