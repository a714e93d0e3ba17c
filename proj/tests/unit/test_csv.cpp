#include <clocale>
#include <cmath>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "latticewalk/csv.hpp"
#include "latticewalk/rng.hpp"

using namespace latticewalk;
namespace fs = std::filesystem;

TEST_SUITE("csv") {

TEST_CASE("doubles round trip exactly") {
  RandomStream rng(21);
  for (int i = 0; i < 10000; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform(-300.0, 300.0));
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-1e-5) == "-1e-05");
  CHECK(parse_double(format_double(std::numeric_limits<double>::denorm_min())) ==
        std::numeric_limits<double>::denorm_min());
}

TEST_CASE("parsing is strict") {
  CHECK_THROWS_AS(parse_double(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_double("1.5x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_double("1,5"), std::invalid_argument);
  CHECK(parse_double("-2.5e3") == -2500.0);
}

TEST_CASE("formatting ignores the locale") {
  const char* old = std::setlocale(LC_NUMERIC, nullptr);
  const std::string saved = old ? old : "C";
  if (std::setlocale(LC_NUMERIC, "de_DE.UTF-8") != nullptr) {
    CHECK(format_double(1.5) == "1.5");
    CHECK(parse_double("1.5") == 1.5);
  }
  std::setlocale(LC_NUMERIC, saved.c_str());
}

TEST_CASE("writer and reader") {
  const fs::path path = fs::temp_directory_path() / "lw_unit_csv.csv";
  {
    CsvWriter w(path, {"a", "b", "c"});
    w.cell(1.25).cell(std::size_t{7}).cell("x").end_row();
    w.empty().cell(-3).cell(1e-300).end_row();
    w.close();
  }
  const CsvTable t = read_csv(path);
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][0] == "1.25");
  CHECK(t.rows[1][0].empty());
  CHECK(parse_double(t.rows[1][2]) == 1e-300);
  CHECK(t.column("c") == 2);
  CHECK_THROWS_AS(t.column("d"), IoError);
}

TEST_CASE("unwritable path") {
  CHECK_THROWS_AS(CsvWriter("/nonexistent/dir/x.csv", {"a"}), IoError);
  CHECK_THROWS_AS(read_csv("/nonexistent/dir/x.csv"), IoError);
}

}  // TEST_SUITE
