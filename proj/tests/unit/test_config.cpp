#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "latticewalk/config.hpp"

using namespace latticewalk;

namespace {

std::string error_of(auto&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults are valid") {
  const RunConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.ensemble.params.omega_r == 1e-5);
  CHECK(c.ensemble.params.gamma == 3.3e-3);
  CHECK(c.ensemble.initial.p0 == 50.0);
  CHECK(c.ensemble.integrator.dtau == 1e-2);
  CHECK(c.fpe.grid.n_cells == 2000);
  CHECK(c.statistics.bins_per_decade == 10);
}

TEST_CASE("sections and comments") {
  const RunConfig c = parse_config(R"(
# lattice
[params]
delta = -0.1   # medium detuning
gamma = 0.0033

[ensemble]
n_trajectories = 16
tau_end = 1e7

[initial]
x = none
p = 250

[fpe]
lower = "reflecting"
diffusion_csv = "out/diffusion.csv"
)");
  CHECK(c.ensemble.params.delta == -0.1);
  CHECK(c.ensemble.n_trajectories == 16);
  CHECK(c.ensemble.tau_end == 1e7);
  CHECK_FALSE(c.ensemble.initial.x.has_value());
  CHECK(c.ensemble.initial.p == 250.0);
  CHECK(c.fpe.grid.lower == Boundary::reflecting);
  CHECK(*c.fpe.diffusion_csv == std::filesystem::path("out/diffusion.csv"));
}

TEST_CASE("serialization round trip") {
  RunConfig c;
  c.ensemble.params.delta = -0.012345678901234567;
  c.ensemble.params.rabi_hz.reset();
  c.ensemble.master_seed = 18446744073709551615ull;
  c.ensemble.initial.x = 0.125;
  c.ensemble.record.sample_decimation = 100;
  c.ensemble.output_dir = "runs/a b";
  c.statistics.fit_t_lo = 10.0;
  c.statistics.fit_t_hi = 1e4;
  c.fpe.grid.scheme = FpeScheme::implicit_euler;
  c.fpe.form = FpeForm::non_conservative;
  c.fpe.c = -1.5e-6;
  const std::string text = to_toml(c);
  const RunConfig back = parse_config(text);
  CHECK(to_toml(back) == text);
  CHECK(back.ensemble.params.delta == c.ensemble.params.delta);
  CHECK_FALSE(back.ensemble.params.rabi_hz.has_value());
  CHECK(back.ensemble.master_seed == c.ensemble.master_seed);
  CHECK(*back.ensemble.output_dir == *c.ensemble.output_dir);
  CHECK(back.fpe.form == FpeForm::non_conservative);
}

TEST_CASE("every key is serialized") {
  const std::string text = to_toml(RunConfig{});
  for (const auto& key : config_keys()) {
    const std::string name = key.substr(key.find('.') + 1);
    CHECK_MESSAGE(text.find("\n" + name + " = ") != std::string::npos, key);
  }
}

TEST_CASE("overrides") {
  RunConfig c;
  apply_override(c, "params.delta=-0.001");
  apply_override(c, "ensemble.master_seed = 1");
  apply_override(c, "fpe.scheme=explicit_euler");
  apply_override(c, "output.dir=\"x/y\"");
  apply_override(c, "initial.p=none");
  CHECK(c.ensemble.params.delta == -0.001);
  CHECK(c.ensemble.master_seed == 1);
  CHECK(c.fpe.grid.scheme == FpeScheme::explicit_euler);
  CHECK(*c.ensemble.output_dir == std::filesystem::path("x/y"));
  CHECK_FALSE(c.ensemble.initial.p.has_value());
}

TEST_CASE("errors name the key path") {
  RunConfig c;
  CHECK(error_of([&] { apply_override(c, "params.detla=1"); }).find("params.detla") !=
        std::string::npos);
  CHECK(error_of([&] { apply_override(c, "ensemble.n_trajectories=-3"); })
            .find("ensemble.n_trajectories") != std::string::npos);
  CHECK(error_of([&] { apply_override(c, "params.gamma=fast"); }).find("params.gamma") !=
        std::string::npos);
  CHECK(error_of([&] { apply_override(c, "fpe.lower=open"); }).find("absorbing") !=
        std::string::npos);
  CHECK(!error_of([&] { apply_override(c, "params.delta"); }).empty());
}

TEST_CASE("parse errors give the line") {
  const std::string dup = error_of([] { parse_config("[params]\ndelta = 1\ndelta = 2\n"); });
  CHECK(dup.find("params.delta") != std::string::npos);
  CHECK(dup.find("line 3") != std::string::npos);
  const std::string bad = error_of([] { parse_config("[ensemble]\n\ntau_end 5\n"); });
  CHECK(bad.find("line 3") != std::string::npos);
  const std::string unknown = error_of([] { parse_config("[nope]\nx = 1\n"); });
  CHECK(unknown.find("nope.x") != std::string::npos);
}

TEST_CASE("missing file names the file") {
  const std::string e = error_of([] { load_config("/nonexistent/run.toml"); });
  CHECK(e.find("/nonexistent/run.toml") != std::string::npos);
}

TEST_CASE("load_config reads a file over defaults") {
  const auto path = std::filesystem::temp_directory_path() / "lw_unit_config.toml";
  {
    std::ofstream out(path);
    out << "[params]\ndelta = -1e-05\n";
  }
  RunConfig base;
  base.ensemble.n_trajectories = 7;
  const RunConfig c = load_config(path, base);
  CHECK(c.ensemble.params.delta == -1e-5);
  CHECK(c.ensemble.n_trajectories == 7);
}

TEST_CASE("validation") {
  RunConfig c;
  c.statistics.fit_t_lo = 10.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.statistics.fit_t_hi = 5.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.ensemble.integrator.dtau = 0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.fpe.coefficients = FpeCoefficientMode::empirical;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.fpe.h0 = 20.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("fit options follow the statistics section") {
  RunConfig c;
  const LatticeParams& p = c.ensemble.params;
  FitOptions f = c.statistics.fit_options(p);
  CHECK_FALSE(f.range.has_value());
  CHECK(f.t_min == doctest::Approx(4.0 / p.gamma));
  c.statistics.fit_t_min = 0.0;
  c.statistics.fit_t_lo = 100.0;
  c.statistics.fit_t_hi = 1e5;
  f = c.statistics.fit_options(p);
  CHECK(f.t_min == 0.0);
  REQUIRE(f.range.has_value());
  CHECK(f.range->second == 1e5);
}

TEST_CASE("coefficient modes") {
  RunConfig c;
  c.ensemble.params.delta = -0.001;
  FpeCoefficients k = c.fpe_coefficients();
  CHECK(k.drift(1.0) == doctest::Approx(analytic_drift(c.ensemble.params)));
  CHECK(k.diffusion(1.0) == doctest::Approx(analytic_diffusion(1.0, c.ensemble.params)));
  c.fpe.coefficients = FpeCoefficientMode::constant;
  c.fpe.c = 0.0;
  c.fpe.d = 1e-7;
  k = c.fpe_coefficients();
  CHECK(k.drift(3.0) == 0.0);
  CHECK(k.diffusion(3.0) == 1e-7);
}

}  // TEST_SUITE
