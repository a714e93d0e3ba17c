#include "latticewalk/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "latticewalk/csv.hpp"

namespace latticewalk {

FitOptions StatisticsConfig::fit_options(const LatticeParams& params) const {
  FitOptions f;
  if (fit_t_lo && fit_t_hi) f.range = std::make_pair(*fit_t_lo, *fit_t_hi);
  f.t_min = fit_t_min.value_or(diffusive_time_floor(params));
  f.min_r2 = min_r2;
  f.min_bins = min_bins;
  return f;
}

void RunConfig::validate() const {
  ensemble.validate();
  const StatisticsConfig& s = statistics;
  if (s.bins_per_decade < 1) throw ConfigError("statistics.bins_per_decade must be >= 1");
  if (s.fit_t_lo.has_value() != s.fit_t_hi.has_value()) {
    throw ConfigError("statistics.fit_t_lo and statistics.fit_t_hi must be set together");
  }
  if (s.fit_t_lo && !(*s.fit_t_lo > 0.0 && *s.fit_t_lo < *s.fit_t_hi)) {
    throw ConfigError("statistics.fit_t_lo must satisfy 0 < fit_t_lo < fit_t_hi");
  }
  if (!(s.min_r2 > 0.0 && s.min_r2 <= 1.0)) throw ConfigError("statistics.min_r2 must be in (0, 1]");
  if (s.min_bins < 3) throw ConfigError("statistics.min_bins must be >= 3");
  if (!(s.diffusion.width > 0.0) || !(s.diffusion.h_max > s.diffusion.h_min)) {
    throw ConfigError("statistics.diffusion_h_width must be > 0 and diffusion_h_max > diffusion_h_min");
  }
  if (!(s.capture.bin_width > 0.0)) throw ConfigError("statistics.capture_bin_width must be > 0");
  if (!(s.capture.peak_ratio > 0.0 && s.capture.peak_ratio <= 1.0)) {
    throw ConfigError("statistics.capture_peak_ratio must be in (0, 1]");
  }

  fpe.grid.validate();
  if (!(fpe.d_denominator > 0.0)) throw ConfigError("fpe.d_denominator must be > 0");
  if (!(fpe.h0 > fpe.grid.h_min && fpe.h0 < fpe.grid.h_max)) {
    throw ConfigError("fpe.h0 must lie inside (fpe.h_min, fpe.h_max)");
  }
  if (!(fpe.tau_span > 0.0)) throw ConfigError("fpe.tau_span must be > 0");
  if (!(fpe.tau_max > 0.0)) throw ConfigError("fpe.tau_max must be > 0");
  if (!(fpe.dtau0 > 0.0)) throw ConfigError("fpe.dtau0 must be > 0");
  if (!(fpe.growth >= 1.0)) throw ConfigError("fpe.growth must be >= 1");
  if (fpe.snapshots < 1) throw ConfigError("fpe.snapshots must be >= 1");
  if (fpe.d && !(*fpe.d >= 0.0)) throw ConfigError("fpe.D must be >= 0");
  if (fpe.coefficients == FpeCoefficientMode::empirical && !fpe.diffusion_csv) {
    throw ConfigError("fpe.coefficients = \"empirical\" needs fpe.diffusion_csv");
  }
}

FpeCoefficients RunConfig::fpe_coefficients() const {
  const LatticeParams& params = ensemble.params;
  switch (fpe.coefficients) {
    case FpeCoefficientMode::analytic:
      return FpeCoefficients::analytic(params, fpe.d_denominator);
    case FpeCoefficientMode::constant:
      return FpeCoefficients::constant(
          fpe.c.value_or(analytic_drift(params)),
          fpe.d.value_or(analytic_diffusion(fpe.h0, params, fpe.d_denominator)));
    case FpeCoefficientMode::empirical:
      return FpeCoefficients::from_diffusion_csv(*fpe.diffusion_csv);
  }
  throw ConfigError("fpe.coefficients: unknown mode");
}

namespace {

struct Token {
  std::string text;
  bool quoted = false;
};

double to_real(const Token& t, const std::string& key) {
  if (t.quoted) throw ConfigError(key + ": expected a number, got a string");
  try {
    const double v = parse_double(t.text);
    if (!std::isfinite(v)) throw std::invalid_argument("not finite");
    return v;
  } catch (const std::invalid_argument&) {
    throw ConfigError(key + ": expected a number, got '" + t.text + "'");
  }
}

std::uint64_t to_uint(const Token& t, const std::string& key) {
  if (t.quoted) throw ConfigError(key + ": expected an integer, got a string");
  std::uint64_t v = 0;
  const char* first = t.text.data();
  const char* last = first + t.text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec == std::errc{} && ptr == last) return v;
  // Integral values written in floating-point form, e.g. 1e4.
  try {
    const double d = parse_double(t.text);
    if (d >= 0.0 && d < 1.8e19 && std::floor(d) == d) return static_cast<std::uint64_t>(d);
  } catch (const std::invalid_argument&) {
  }
  throw ConfigError(key + ": expected a nonnegative integer, got '" + t.text + "'");
}

bool to_bool(const Token& t, const std::string& key) {
  if (!t.quoted && t.text == "true") return true;
  if (!t.quoted && t.text == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + t.text + "'");
}

bool is_none(const Token& t) { return !t.quoted && t.text == "none"; }

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

template <class E>
struct EnumName {
  E value;
  const char* name;
};

template <class E, std::size_t N>
E to_enum(const Token& t, const std::string& key, const EnumName<E> (&names)[N]) {
  for (const auto& n : names) {
    if (t.text == n.name) return n.value;
  }
  std::string allowed;
  for (const auto& n : names) allowed += std::string(allowed.empty() ? "" : ", ") + n.name;
  throw ConfigError(key + ": unknown value '" + t.text + "' (allowed: " + allowed + ")");
}

template <class E, std::size_t N>
std::string enum_text(E v, const EnumName<E> (&names)[N]) {
  for (const auto& n : names) {
    if (n.value == v) return quote(n.name);
  }
  return quote("?");
}

const EnumName<Boundary> kBoundaries[] = {{Boundary::absorbing, "absorbing"},
                                          {Boundary::reflecting, "reflecting"}};
const EnumName<FpeScheme> kSchemes[] = {{FpeScheme::crank_nicolson, "crank_nicolson"},
                                        {FpeScheme::implicit_euler, "implicit_euler"},
                                        {FpeScheme::explicit_euler, "explicit_euler"}};
const EnumName<FpeForm> kForms[] = {{FpeForm::conservative, "conservative"},
                                    {FpeForm::non_conservative, "non_conservative"}};
const EnumName<FpeCoefficientMode> kModes[] = {{FpeCoefficientMode::analytic, "analytic"},
                                               {FpeCoefficientMode::constant, "constant"},
                                               {FpeCoefficientMode::empirical, "empirical"}};

struct Field {
  std::string key;
  std::function<void(RunConfig&, const Token&)> set;
  std::function<std::optional<std::string>(const RunConfig&)> get;  // nullopt: unset
};

template <class Access>
Field real(std::string key, Access acc) {
  return {key, [acc, key](RunConfig& c, const Token& t) { acc(c) = to_real(t, key); },
          [acc](const RunConfig& c) { return std::optional(format_double(acc(c))); }};
}

template <class Access>
Field optional_real(std::string key, Access acc) {
  return {key,
          [acc, key](RunConfig& c, const Token& t) {
            if (is_none(t)) {
              acc(c).reset();
            } else {
              acc(c) = to_real(t, key);
            }
          },
          [acc](const RunConfig& c) -> std::optional<std::string> {
            if (!acc(c)) return std::nullopt;
            return format_double(*acc(c));
          }};
}

template <class Int, class Access>
Field integer(std::string key, Access acc) {
  return {key,
          [acc, key](RunConfig& c, const Token& t) {
            const std::uint64_t v = to_uint(t, key);
            if (v > static_cast<std::uint64_t>(std::numeric_limits<Int>::max())) {
              throw ConfigError(key + ": value out of range");
            }
            acc(c) = static_cast<Int>(v);
          },
          [acc](const RunConfig& c) { return std::optional(std::to_string(acc(c))); }};
}

template <class Access>
Field boolean(std::string key, Access acc) {
  return {key, [acc, key](RunConfig& c, const Token& t) { acc(c) = to_bool(t, key); },
          [acc](const RunConfig& c) {
            return std::optional(std::string(acc(c) ? "true" : "false"));
          }};
}

template <class E, std::size_t N, class Access>
Field enumeration(std::string key, Access acc, const EnumName<E> (&names)[N]) {
  return {key, [acc, key, &names](RunConfig& c, const Token& t) { acc(c) = to_enum(t, key, names); },
          [acc, &names](const RunConfig& c) { return std::optional(enum_text(acc(c), names)); }};
}

template <class Access>
Field optional_path(std::string key, Access acc) {
  return {key,
          [acc](RunConfig& c, const Token& t) {
            if (is_none(t)) {
              acc(c).reset();
            } else {
              acc(c) = std::filesystem::path(t.text);
            }
          },
          [acc](const RunConfig& c) -> std::optional<std::string> {
            if (!acc(c)) return std::nullopt;
            return quote(acc(c)->string());
          }};
}

#define LW_FIELD(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      real("params.delta", LW_FIELD(ensemble.params.delta)),
      real("params.gamma", LW_FIELD(ensemble.params.gamma)),
      real("params.omega_r", LW_FIELD(ensemble.params.omega_r)),
      optional_real("params.rabi_hz", LW_FIELD(ensemble.params.rabi_hz)),
      optional_real("params.wavelength_m", LW_FIELD(ensemble.params.wavelength_m)),
      optional_real("params.atom_mass_kg", LW_FIELD(ensemble.params.atom_mass_kg)),

      integer<std::size_t>("ensemble.n_trajectories", LW_FIELD(ensemble.n_trajectories)),
      real("ensemble.tau_end", LW_FIELD(ensemble.tau_end)),
      integer<std::uint64_t>("ensemble.master_seed", LW_FIELD(ensemble.master_seed)),
      integer<unsigned>("ensemble.workers", LW_FIELD(ensemble.workers)),

      real("integrator.dtau", LW_FIELD(ensemble.integrator.dtau)),
      real("integrator.jump_time_tol", LW_FIELD(ensemble.integrator.jump_time_tol)),

      real("initial.p0", LW_FIELD(ensemble.initial.p0)),
      optional_real("initial.x", LW_FIELD(ensemble.initial.x)),
      optional_real("initial.p", LW_FIELD(ensemble.initial.p)),
      real("initial.u", LW_FIELD(ensemble.initial.u)),
      real("initial.v", LW_FIELD(ensemble.initial.v)),
      real("initial.z", LW_FIELD(ensemble.initial.z)),

      boolean("record.jumps", LW_FIELD(ensemble.record.jumps)),
      boolean("record.sign_changes", LW_FIELD(ensemble.record.sign_changes)),
      integer<std::uint64_t>("record.sample_decimation",
                             LW_FIELD(ensemble.record.sample_decimation)),

      integer<int>("statistics.bins_per_decade", LW_FIELD(statistics.bins_per_decade)),
      optional_real("statistics.fit_t_lo", LW_FIELD(statistics.fit_t_lo)),
      optional_real("statistics.fit_t_hi", LW_FIELD(statistics.fit_t_hi)),
      optional_real("statistics.fit_t_min", LW_FIELD(statistics.fit_t_min)),
      real("statistics.min_r2", LW_FIELD(statistics.min_r2)),
      integer<std::size_t>("statistics.min_bins", LW_FIELD(statistics.min_bins)),
      real("statistics.diffusion_h_min", LW_FIELD(statistics.diffusion.h_min)),
      real("statistics.diffusion_h_max", LW_FIELD(statistics.diffusion.h_max)),
      real("statistics.diffusion_h_width", LW_FIELD(statistics.diffusion.width)),
      integer<std::size_t>("statistics.diffusion_min_count",
                           LW_FIELD(statistics.diffusion.min_count)),
      real("statistics.capture_exclusion", LW_FIELD(statistics.capture.exclusion_window)),
      real("statistics.capture_bin_width", LW_FIELD(statistics.capture.bin_width)),
      real("statistics.capture_peak_ratio", LW_FIELD(statistics.capture.peak_ratio)),

      real("fpe.h_min", LW_FIELD(fpe.grid.h_min)),
      real("fpe.h_max", LW_FIELD(fpe.grid.h_max)),
      integer<std::size_t>("fpe.n_cells", LW_FIELD(fpe.grid.n_cells)),
      real("fpe.dtau", LW_FIELD(fpe.grid.dtau)),
      enumeration("fpe.lower", LW_FIELD(fpe.grid.lower), kBoundaries),
      enumeration("fpe.upper", LW_FIELD(fpe.grid.upper), kBoundaries),
      enumeration("fpe.scheme", LW_FIELD(fpe.grid.scheme), kSchemes),
      enumeration("fpe.form", LW_FIELD(fpe.form), kForms),
      enumeration("fpe.coefficients", LW_FIELD(fpe.coefficients), kModes),
      real("fpe.d_denominator", LW_FIELD(fpe.d_denominator)),
      optional_real("fpe.c", LW_FIELD(fpe.c)),
      optional_real("fpe.D", LW_FIELD(fpe.d)),
      optional_path("fpe.diffusion_csv", LW_FIELD(fpe.diffusion_csv)),
      real("fpe.h0", LW_FIELD(fpe.h0)),
      real("fpe.tau_span", LW_FIELD(fpe.tau_span)),
      integer<std::size_t>("fpe.snapshots", LW_FIELD(fpe.snapshots)),
      real("fpe.tau_max", LW_FIELD(fpe.tau_max)),
      real("fpe.dtau0", LW_FIELD(fpe.dtau0)),
      real("fpe.growth", LW_FIELD(fpe.growth)),

      optional_path("output.dir", LW_FIELD(ensemble.output_dir)),
  };
  return table;
}

#undef LW_FIELD

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

// Value text up to an unquoted '#'; quoted strings are unescaped.
Token parse_value(std::string_view raw, const std::string& key) {
  const std::string text = trim(raw);
  if (text.empty()) throw ConfigError(key + ": missing value");
  if (text.front() != '"') {
    const auto hash = text.find('#');
    Token t{trim(text.substr(0, hash)), false};
    if (t.text.empty()) throw ConfigError(key + ": missing value");
    return t;
  }
  Token t{"", true};
  std::size_t i = 1;
  for (; i < text.size(); ++i) {
    const char ch = text[i];
    if (ch == '\\' && i + 1 < text.size()) {
      t.text.push_back(text[++i]);
    } else if (ch == '"') {
      break;
    } else {
      t.text.push_back(ch);
    }
  }
  if (i >= text.size()) throw ConfigError(key + ": unterminated string");
  const std::string rest = trim(text.substr(i + 1));
  if (!rest.empty() && rest.front() != '#') {
    throw ConfigError(key + ": unexpected text after string");
  }
  return t;
}

}  // namespace

RunConfig parse_config(std::string_view text, const RunConfig& defaults) {
  RunConfig config = defaults;
  std::string section;
  std::map<std::string, std::size_t> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const std::string where = " (line " + std::to_string(lineno) + ")";
    if (t.front() == '[') {
      const auto close = t.find(']');
      if (close == std::string::npos) throw ConfigError("unterminated section header" + where);
      section = trim(t.substr(1, close - 1));
      const std::string rest = trim(t.substr(close + 1));
      if (!rest.empty() && rest.front() != '#') throw ConfigError("text after section header" + where);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value" + where);
    const std::string name = trim(t.substr(0, eq));
    const std::string key = section.empty() ? name : section + "." + name;
    if (auto it = seen.find(key); it != seen.end()) {
      throw ConfigError("duplicate key '" + key + "'" + where + ", first set on line " +
                        std::to_string(it->second));
    }
    seen[key] = lineno;
    try {
      const Field& field = find_field(key);
      field.set(config, parse_value(t.substr(eq + 1), key));
    } catch (const ConfigError& e) {
      throw ConfigError(e.what() + where);
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& defaults) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str(), defaults);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key = trim(assignment.substr(0, eq));
  const Field& field = find_field(key);
  std::string value = trim(assignment.substr(eq + 1));
  Token token = value.size() >= 2 && value.front() == '"' ? parse_value(value, key)
                                                          : Token{value, false};
  if (token.text.empty()) throw ConfigError(key + ": missing value");
  field.set(config, token);
}

std::string to_toml(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string sec = f.key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << '[' << sec << "]\n";
      section = sec;
    }
    out << f.key.substr(dot + 1) << " = " << f.get(config).value_or("none") << '\n';
  }
  return out.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace latticewalk
