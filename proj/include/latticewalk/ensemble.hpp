#ifndef LATTICEWALK_ENSEMBLE_HPP_
#define LATTICEWALK_ENSEMBLE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "latticewalk/dynamics.hpp"
#include "latticewalk/types.hpp"

namespace latticewalk {

/// Starting point of every trajectory. The internal state is fixed; x and p
/// are drawn from the trajectory's own stream unless pinned.
struct InitialConditions {
  double p0 = 50.0;  // p uniform on [-p0, p0]
  std::optional<double> x;
  std::optional<double> p;
  double u = 0.0;
  double v = 0.0;
  double z = -1.0;

  void validate() const;
};

struct RecordOptions {
  bool jumps = true;
  bool sign_changes = true;
  std::uint64_t sample_decimation = 0;  // every k-th step; 0 = no samples
};

struct EnsembleConfig {
  std::size_t n_trajectories = 1;
  double tau_end = 1e5;
  std::uint64_t master_seed = 1;
  LatticeParams params;
  IntegratorOptions integrator;
  InitialConditions initial;
  RecordOptions record;
  unsigned workers = 0;  // 0 = one per hardware thread
  std::optional<std::filesystem::path> output_dir;
  bool keep_logs = true;

  void validate() const;
};

struct StateSample {
  double tau = 0.0;
  double x = 0.0;
  double p = 0.0;
  double u = 0.0;
  double v = 0.0;
  double z = -1.0;
  double h = 0.0;
};

/// Everything recorded for one trajectory.
struct TrajectoryLog {
  std::size_t trajectory_id = 0;
  double tau_start = 0.0;
  double tau_end = 0.0;
  AtomState initial;
  std::vector<SpontaneousEvent> jumps;
  std::vector<double> sign_changes;
  std::vector<StateSample> samples;
  TrajectoryStatus status = TrajectoryStatus::finished;
  double last_good_tau = 0.0;
  std::string diagnostic;

  /// End of the usable part of the trajectory.
  double observed_end() const {
    return status == TrajectoryStatus::finished ? tau_end : last_good_tau;
  }
};

struct TrajectorySummary {
  std::size_t trajectory_id = 0;
  TrajectoryStatus status = TrajectoryStatus::finished;
  double last_good_tau = 0.0;
  std::uint64_t n_jumps = 0;
  std::uint64_t n_sign_changes = 0;
  std::uint64_t n_samples = 0;
  std::string file;
  std::string diagnostic;
};

struct EnsembleSummary {
  std::uint64_t total_jumps = 0;
  std::uint64_t total_sign_changes = 0;
  std::uint64_t total_flights = 0;
  std::size_t aborted = 0;
  std::vector<TrajectorySummary> trajectories;  // ordered by trajectory id
};

struct EnsembleResult {
  std::vector<TrajectoryLog> logs;  // empty unless keep_logs
  EnsembleSummary summary;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Initial state of one trajectory, drawn from its stream.
AtomState initial_state(const InitialConditions& ic, RandomStream& rng);

/// Evolves n_trajectories independent atoms, possibly on several threads.
///
/// Trajectory i uses derive_stream(master_seed, i) for its initial condition
/// and all of its jumps, so results do not depend on the number of workers.
/// When output_dir is set, one events file per trajectory and a manifest are
/// written there. I/O failures are rethrown after all workers stop, naming the
/// trajectory.
EnsembleResult run_ensemble(const EnsembleConfig& config, const ProgressFn& progress = {});

std::string events_file_name(std::size_t trajectory_id);

/// Manifest of an events directory.
struct EnsembleManifest {
  std::string version;
  bool complete = false;
  EnsembleConfig config;
  EnsembleSummary summary;
};

void write_manifest(const std::filesystem::path& dir, const EnsembleConfig& config,
                    const EnsembleSummary& summary, bool complete);
EnsembleManifest read_manifest(const std::filesystem::path& dir);

/// Reads an events directory back into logs, checking every file against the manifest.
std::vector<TrajectoryLog> read_events_dir(const std::filesystem::path& dir,
                                           EnsembleManifest* manifest_out = nullptr);

}  // namespace latticewalk

#endif  // LATTICEWALK_ENSEMBLE_HPP_
