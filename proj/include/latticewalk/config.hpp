#ifndef LATTICEWALK_CONFIG_HPP_
#define LATTICEWALK_CONFIG_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "latticewalk/ensemble.hpp"
#include "latticewalk/fokker_planck.hpp"
#include "latticewalk/statistics.hpp"

namespace latticewalk {

struct StatisticsConfig {
  int bins_per_decade = 10;
  std::optional<double> fit_t_lo;  // explicit fit range, both ends or neither
  std::optional<double> fit_t_hi;
  std::optional<double> fit_t_min;  // auto-range floor; unset means 4/gamma
  double min_r2 = 0.98;
  std::size_t min_bins = 5;
  DiffusionBinSpec diffusion;
  CaptureOptions capture;

  FitOptions fit_options(const LatticeParams& params) const;
};

enum class FpeCoefficientMode { analytic, constant, empirical };

struct FpeConfig {
  FpeGrid grid;
  FpeForm form = FpeForm::conservative;
  FpeCoefficientMode coefficients = FpeCoefficientMode::analytic;
  double d_denominator = 16.0;
  std::optional<double> c;  // constant mode; analytic values at h0 otherwise
  std::optional<double> d;
  std::optional<std::filesystem::path> diffusion_csv;  // empirical mode
  double h0 = 0.01;
  double tau_span = 1e6;
  std::size_t snapshots = 5;
  double tau_max = 1e8;
  double dtau0 = 1.0;
  double growth = 1.02;
};

/// Everything a run needs; round-trips through to_toml / parse_config.
struct RunConfig {
  EnsembleConfig ensemble;
  StatisticsConfig statistics;
  FpeConfig fpe;

  void validate() const;
  FpeCoefficients fpe_coefficients() const;
};

/// Parses the sectioned key = value format. Errors name the key path and line.
RunConfig parse_config(std::string_view text, const RunConfig& defaults = {});

/// Reads a config file; a missing file throws ConfigError naming it.
RunConfig load_config(const std::filesystem::path& path, const RunConfig& defaults = {});

/// Applies "section.key=value"; throws ConfigError naming the key path.
void apply_override(RunConfig& config, std::string_view assignment);

/// Serializes every field; parse_config(to_toml(c)) reproduces c exactly.
std::string to_toml(const RunConfig& config);

/// All known key paths, in serialization order.
std::vector<std::string> config_keys();

}  // namespace latticewalk

#endif  // LATTICEWALK_CONFIG_HPP_
