#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "latticewalk/csv.hpp"
#include "latticewalk/ensemble.hpp"
#include "latticewalk/rng.hpp"

using namespace latticewalk;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lw_unit_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

EnsembleConfig small_config() {
  EnsembleConfig c;
  c.n_trajectories = 4;
  c.tau_end = 1e5;
  c.master_seed = 2024;
  c.record.sample_decimation = 5000;
  return c;
}

}  // namespace

TEST_SUITE("ensemble") {

TEST_CASE("derived streams are reproducible and distinct") {
  RandomStream a = derive_stream(42, 0);
  RandomStream b = derive_stream(42, 0);
  RandomStream c = derive_stream(42, 1);
  int same_ab = 0;
  int same_ac = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t x = a.next_u64();
    same_ab += x == b.next_u64();
    same_ac += x == c.next_u64();
  }
  CHECK(same_ab == 1000);
  CHECK(same_ac < 1000);
}

TEST_CASE("pooled draws pass a chi-square uniformity test") {
  const int bins = 100;
  std::vector<double> counts(bins, 0.0);
  int n = 0;
  for (std::uint64_t id = 0; id < 100; ++id) {
    RandomStream s = derive_stream(7, id);
    for (int i = 0; i < 1000; ++i, ++n) counts[static_cast<int>(s.uniform() * bins)] += 1.0;
  }
  const double expected = static_cast<double>(n) / bins;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 134.64);  // 99 degrees of freedom, upper 1% point
}

TEST_CASE("uniform_open never returns the endpoints") {
  RandomStream s(0);
  for (int i = 0; i < 100000; ++i) {
    const double u = s.uniform_open();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("initial conditions") {
  InitialConditions ic;
  ic.p0 = 10.0;
  RandomStream rng(1);
  for (int i = 0; i < 1000; ++i) {
    const AtomState s = initial_state(ic, rng);
    CHECK(std::abs(s.p) <= 10.0);
    CHECK(s.x >= 0.0);
    CHECK(s.x < 2.0 * 3.141592653589794);
    CHECK(s.z == -1.0);
  }
  ic.x = 0.5;
  ic.p = 3.0;
  const AtomState pinned = initial_state(ic, rng);
  CHECK(pinned.x == 0.5);
  CHECK(pinned.p == 3.0);
  ic.z = 0.5;
  CHECK_THROWS_AS(ic.validate(), ConfigError);
}

TEST_CASE("event files are identical across repeats and worker counts") {
  EnsembleConfig c = small_config();
  c.n_trajectories = 11;  // one full batch and one partial batch
  const fs::path one = scratch("w1");
  const fs::path two = scratch("w1b");
  const fs::path many = scratch("wn");
  c.workers = 1;
  c.output_dir = one;
  run_ensemble(c);
  c.output_dir = two;
  run_ensemble(c);
  c.workers = 3;
  c.output_dir = many;
  run_ensemble(c);
  for (std::size_t i = 0; i < c.n_trajectories; ++i) {
    const std::string name = events_file_name(i);
    const std::string ref = slurp(one / name);
    CHECK(!ref.empty());
    CHECK(ref == slurp(two / name));
    CHECK(ref == slurp(many / name));
  }
}

TEST_CASE("results do not depend on the trajectory count") {
  EnsembleConfig c = small_config();
  c.n_trajectories = 3;
  const EnsembleResult few = run_ensemble(c);
  c.n_trajectories = 10;
  const EnsembleResult more = run_ensemble(c);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(few.logs[i].jumps.size() == more.logs[i].jumps.size());
    CHECK(few.logs[i].sign_changes == more.logs[i].sign_changes);
  }
}

TEST_CASE("no decay means no jumps") {
  EnsembleConfig c = small_config();
  c.params.gamma = 0.0;
  const EnsembleResult r = run_ensemble(c);
  CHECK(r.summary.total_jumps == 0);
  for (const auto& log : r.logs) CHECK(log.jumps.empty());
}

TEST_CASE("event directory round trip") {
  EnsembleConfig c = small_config();
  const fs::path dir = scratch("roundtrip");
  c.output_dir = dir;
  const EnsembleResult r = run_ensemble(c);
  EnsembleManifest m;
  const std::vector<TrajectoryLog> logs = read_events_dir(dir, &m);
  CHECK(m.complete);
  CHECK(m.version == LATTICEWALK_VERSION);
  CHECK(m.config.master_seed == c.master_seed);
  CHECK(m.config.params.delta == c.params.delta);
  CHECK(m.summary.total_jumps == r.summary.total_jumps);
  REQUIRE(logs.size() == r.logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) {
    CHECK(logs[i].trajectory_id == i);
    REQUIRE(logs[i].jumps.size() == r.logs[i].jumps.size());
    for (std::size_t j = 0; j < logs[i].jumps.size(); ++j) {
      CHECK(logs[i].jumps[j].tau == r.logs[i].jumps[j].tau);
      CHECK(logs[i].jumps[j].recoil == r.logs[i].jumps[j].recoil);
      CHECK(logs[i].jumps[j].pre_state.u == r.logs[i].jumps[j].pre_state.u);
    }
    CHECK(logs[i].sign_changes == r.logs[i].sign_changes);
    CHECK(logs[i].samples.size() == r.logs[i].samples.size());
    for (std::size_t j = 1; j < logs[i].jumps.size(); ++j) {
      CHECK(logs[i].jumps[j].tau > logs[i].jumps[j - 1].tau);
    }
    if (!logs[i].jumps.empty()) CHECK(logs[i].jumps.back().tau <= c.tau_end);
  }

  const CsvTable t = read_csv(dir / events_file_name(0));
  CHECK(t.header ==
        std::vector<std::string>{"kind", "tau", "x", "p", "u", "v", "z", "recoil", "H"});
}

TEST_CASE("a missing events file is reported") {
  EnsembleConfig c = small_config();
  const fs::path dir = scratch("missing");
  c.output_dir = dir;
  run_ensemble(c);
  fs::remove(dir / events_file_name(2));
  CHECK_THROWS_AS(read_events_dir(dir), IoError);
}

TEST_CASE("unwritable output names the trajectory") {
  EnsembleConfig c = small_config();
  const fs::path dir = scratch("blocked");
  fs::create_directories(dir);
  fs::create_directories(dir / events_file_name(1));  // a directory where a file should go
  c.output_dir = dir;
  try {
    run_ensemble(c);
    FAIL("expected an I/O error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("trajectory 1") != std::string::npos);
  }
}

TEST_CASE("jump count matches the mean rate") {
  EnsembleConfig c = small_config();
  c.n_trajectories = 8;
  c.tau_end = 2e5;
  c.record.sample_decimation = 0;
  const EnsembleResult r = run_ensemble(c);
  const double expected = c.n_trajectories * c.tau_end * c.params.gamma / 2;
  CHECK(static_cast<double>(r.summary.total_jumps) == doctest::Approx(expected).epsilon(0.1));
}

TEST_CASE("config validation") {
  EnsembleConfig c;
  c.n_trajectories = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.n_trajectories = 1;
  c.tau_end = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.tau_end = 10.0;
  c.params.omega_r = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

}  // TEST_SUITE
