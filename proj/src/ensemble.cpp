#include "latticewalk/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <memory>
#include <mutex>
#include <numbers>
#include <thread>

#include "json.hpp"
#include "latticewalk/csv.hpp"

namespace latticewalk {

using nlohmann::json;

void InitialConditions::validate() const {
  if (!std::isfinite(p0) || p0 < 0.0) throw ConfigError("initial.p0 must be >= 0");
  if (std::abs(u * u + v * v + z * z - 1.0) > 1e-9) {
    throw ConfigError("initial internal state (u, v, z) must be a unit Bloch vector");
  }
}

void EnsembleConfig::validate() const {
  if (n_trajectories < 1) throw ConfigError("ensemble.n_trajectories must be >= 1");
  if (!(tau_end > 0.0) || !std::isfinite(tau_end)) {
    throw ConfigError("ensemble.tau_end must be > 0");
  }
  params.validate();
  integrator.validate();
  initial.validate();
}

AtomState initial_state(const InitialConditions& ic, RandomStream& rng) {
  AtomState s;
  // Draw order is fixed (x, then p) whether or not a value is pinned.
  const double x = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double p = rng.uniform(-ic.p0, ic.p0);
  s.x = ic.x.value_or(x);
  s.p = ic.p.value_or(p);
  s.u = ic.u;
  s.v = ic.v;
  s.z = ic.z;
  s.tau = 0.0;
  return s;
}

std::string events_file_name(std::size_t trajectory_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "events_%06zu.csv", trajectory_id);
  return buf;
}

namespace {

class LogSink : public EventSink {
 public:
  LogSink(std::size_t id, TrajectoryLog& log, const RecordOptions& rec,
          const LatticeParams& params, CsvWriter* csv)
      : id_(id), log_(log), rec_(rec), params_(params), csv_(csv) {}

  void on_jump(const SpontaneousEvent& ev) override {
    ++n_jumps;
    if (!rec_.jumps) return;
    if (keep_) log_.jumps.push_back(ev);
    if (csv_) {
      const AtomState& s = ev.pre_state;
      guarded([&] {
        csv_->cell("se").cell(ev.tau).cell(s.x).cell(s.p).cell(s.u).cell(s.v).cell(s.z);
        csv_->cell(ev.recoil).cell(ev.post_energy);
        csv_->end_row();
      });
    }
  }

  void on_sign_change(double tau, const AtomState& s) override {
    ++n_sign_changes;
    if (!rec_.sign_changes) return;
    if (keep_) log_.sign_changes.push_back(tau);
    if (csv_) {
      guarded([&] {
        csv_->cell("signchange").cell(tau).cell(s.x).cell(s.p).cell(s.u).cell(s.v).cell(s.z);
        csv_->empty().cell(energy(s, params_));
        csv_->end_row();
      });
    }
  }

  void on_sample(const AtomState& s, double h) override {
    ++n_samples;
    if (keep_) log_.samples.push_back({s.tau, s.x, s.p, s.u, s.v, s.z, h});
    if (csv_) {
      guarded([&] {
        csv_->cell("sample").cell(s.tau).cell(s.x).cell(s.p).cell(s.u).cell(s.v).cell(s.z);
        csv_->empty().cell(h);
        csv_->end_row();
      });
    }
  }

  void keep(bool k) { keep_ = k; }

  std::uint64_t n_jumps = 0;
  std::uint64_t n_sign_changes = 0;
  std::uint64_t n_samples = 0;

 private:
  template <class F>
  void guarded(F&& write) {
    try {
      write();
    } catch (const std::exception& e) {
      throw IoError("trajectory " + std::to_string(id_) + ": " + e.what());
    }
  }

  std::size_t id_;
  TrajectoryLog& log_;
  const RecordOptions& rec_;
  const LatticeParams& params_;
  CsvWriter* csv_;
  bool keep_ = true;
};

const char* status_name(TrajectoryStatus s) {
  return s == TrajectoryStatus::finished ? "finished" : "aborted";
}

TrajectoryStatus parse_status(const std::string& s) {
  if (s == "finished") return TrajectoryStatus::finished;
  if (s == "aborted") return TrajectoryStatus::aborted;
  throw IoError("unknown trajectory status '" + s + "'");
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

json config_to_json(const EnsembleConfig& c) {
  json j;
  j["n_trajectories"] = c.n_trajectories;
  j["tau_end"] = c.tau_end;
  j["master_seed"] = c.master_seed;
  j["params"] = {{"delta", c.params.delta},
                 {"gamma", c.params.gamma},
                 {"omega_r", c.params.omega_r},
                 {"rabi_hz", optional_json(c.params.rabi_hz)},
                 {"wavelength_m", optional_json(c.params.wavelength_m)},
                 {"atom_mass_kg", optional_json(c.params.atom_mass_kg)}};
  j["integrator"] = {{"dtau", c.integrator.dtau},
                     {"jump_time_tol", c.integrator.jump_time_tol}};
  j["initial"] = {{"p0", c.initial.p0}, {"x", optional_json(c.initial.x)},
                  {"p", optional_json(c.initial.p)}, {"u", c.initial.u},
                  {"v", c.initial.v},   {"z", c.initial.z}};
  j["record"] = {{"jumps", c.record.jumps},
                 {"sign_changes", c.record.sign_changes},
                 {"sample_decimation", c.record.sample_decimation}};
  return j;
}

EnsembleConfig config_from_json(const json& j) {
  EnsembleConfig c;
  c.n_trajectories = j.at("n_trajectories").get<std::size_t>();
  c.tau_end = j.at("tau_end").get<double>();
  c.master_seed = j.at("master_seed").get<std::uint64_t>();
  const json& p = j.at("params");
  c.params.delta = p.at("delta").get<double>();
  c.params.gamma = p.at("gamma").get<double>();
  c.params.omega_r = p.at("omega_r").get<double>();
  c.params.rabi_hz = optional_from(p, "rabi_hz");
  c.params.wavelength_m = optional_from(p, "wavelength_m");
  c.params.atom_mass_kg = optional_from(p, "atom_mass_kg");
  const json& in = j.at("integrator");
  c.integrator.dtau = in.at("dtau").get<double>();
  c.integrator.jump_time_tol = in.at("jump_time_tol").get<double>();
  const json& ic = j.at("initial");
  c.initial.p0 = ic.at("p0").get<double>();
  c.initial.x = optional_from(ic, "x");
  c.initial.p = optional_from(ic, "p");
  c.initial.u = ic.at("u").get<double>();
  c.initial.v = ic.at("v").get<double>();
  c.initial.z = ic.at("z").get<double>();
  const json& r = j.at("record");
  c.record.jumps = r.at("jumps").get<bool>();
  c.record.sign_changes = r.at("sign_changes").get<bool>();
  c.record.sample_decimation = r.at("sample_decimation").get<std::uint64_t>();
  c.integrator.sample_every = c.record.sample_decimation;
  return c;
}

}  // namespace

EnsembleResult run_ensemble(const EnsembleConfig& config_in, const ProgressFn& progress) {
  EnsembleConfig config = config_in;
  config.integrator.sample_every = config.record.sample_decimation;
  config.validate();

  const std::size_t n = config.n_trajectories;
  if (config.output_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*config.output_dir, ec);
    if (ec) throw IoError("cannot create " + config.output_dir->string() + ": " + ec.message());
    EnsembleSummary pending;
    write_manifest(*config.output_dir, config, pending, false);
  }

  std::vector<TrajectoryLog> logs(config.keep_logs ? n : 0);
  std::vector<TrajectorySummary> summaries(n);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;

  // Trajectories are grouped into batches by id, so the work assignment never
  // affects what is computed.
  const std::size_t n_batches = (n + kBatchWidth - 1) / kBatchWidth;
  std::vector<std::exception_ptr> errors(n_batches);

  auto run_batch = [&](std::size_t batch) {
    const std::size_t first = batch * kBatchWidth;
    const std::size_t count = std::min(kBatchWidth, n - first);
    std::vector<TrajectoryLog> scratch(config.keep_logs ? 0 : count);
    std::vector<RandomStream> streams;
    std::vector<std::optional<CsvWriter>> csv(count);
    std::vector<std::unique_ptr<LogSink>> sinks;
    std::vector<BatchMember> members;
    streams.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t id = first + k;
      TrajectoryLog& log = config.keep_logs ? logs[id] : scratch[k];
      log.trajectory_id = id;
      streams.push_back(derive_stream(config.master_seed, id));
      log.initial = initial_state(config.initial, streams.back());
      log.tau_start = log.initial.tau;
      log.tau_end = config.tau_end;

      TrajectorySummary& summary = summaries[id];
      summary.trajectory_id = id;
      if (config.output_dir) {
        summary.file = events_file_name(id);
        try {
          csv[k].emplace(*config.output_dir / summary.file,
                         std::initializer_list<std::string_view>{"kind", "tau", "x", "p", "u",
                                                                 "v", "z", "recoil", "H"});
        } catch (const std::exception& e) {
          throw IoError("trajectory " + std::to_string(id) + ": " + e.what());
        }
      }
      sinks.push_back(std::make_unique<LogSink>(id, log, config.record, config.params,
                                                csv[k] ? &*csv[k] : nullptr));
      sinks.back()->keep(config.keep_logs);
    }
    for (std::size_t k = 0; k < count; ++k) {
      TrajectoryLog& log = config.keep_logs ? logs[first + k] : scratch[k];
      members.push_back({log.initial, &streams[k], sinks[k].get()});
    }

    const auto results = evolve_batch(members, config.tau_end, config.params, config.integrator);

    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t id = first + k;
      TrajectoryLog& log = config.keep_logs ? logs[id] : scratch[k];
      const EvolveResult& result = results[k];
      log.status = result.status;
      log.last_good_tau = result.last_good_tau;
      log.diagnostic = result.diagnostic;
      if (csv[k]) {
        try {
          csv[k]->close();
        } catch (const std::exception& e) {
          throw IoError("trajectory " + std::to_string(id) + ": " + e.what());
        }
      }
      TrajectorySummary& summary = summaries[id];
      summary.status = result.status;
      summary.last_good_tau = result.last_good_tau;
      summary.n_jumps = sinks[k]->n_jumps;
      summary.n_sign_changes = sinks[k]->n_sign_changes;
      summary.n_samples = sinks[k]->n_samples;
      summary.diagnostic = result.diagnostic;
    }
  };

  auto worker = [&] {
    for (;;) {
      const std::size_t batch = next.fetch_add(1);
      if (batch >= n_batches) return;
      try {
        run_batch(batch);
      } catch (...) {
        errors[batch] = std::current_exception();
      }
      const std::size_t count = std::min(kBatchWidth, n - batch * kBatchWidth);
      const std::size_t d = done.fetch_add(count) + count;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(d, n);
      }
    }
  };

  unsigned n_workers = config.workers;
  if (n_workers == 0) n_workers = std::max(1u, std::thread::hardware_concurrency());
  n_workers = static_cast<unsigned>(std::min<std::size_t>(n_workers, n_batches));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  for (const auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }

  EnsembleResult out;
  out.logs = std::move(logs);
  for (const auto& s : summaries) {
    out.summary.total_jumps += s.n_jumps;
    out.summary.total_sign_changes += s.n_sign_changes;
    if (s.n_sign_changes > 1) out.summary.total_flights += s.n_sign_changes - 1;
    if (s.status == TrajectoryStatus::aborted) ++out.summary.aborted;
  }
  out.summary.trajectories = std::move(summaries);

  if (config.output_dir) write_manifest(*config.output_dir, config, out.summary, true);
  return out;
}

void write_manifest(const std::filesystem::path& dir, const EnsembleConfig& config,
                    const EnsembleSummary& summary, bool complete) {
  json j;
  j["tool"] = "latticewalk";
  j["version"] = LATTICEWALK_VERSION;
  j["complete"] = complete;
  j["master_seed"] = config.master_seed;
  j["config"] = config_to_json(config);
  j["abort_count"] = summary.aborted;
  j["total_se_events"] = summary.total_jumps;
  j["total_sign_changes"] = summary.total_sign_changes;
  j["total_flights"] = summary.total_flights;
  json trajectories = json::array();
  for (const auto& t : summary.trajectories) {
    trajectories.push_back({{"id", t.trajectory_id},
                            {"file", t.file},
                            {"status", status_name(t.status)},
                            {"last_good_tau", t.last_good_tau},
                            {"n_se", t.n_jumps},
                            {"n_signchange", t.n_sign_changes},
                            {"n_sample", t.n_samples},
                            {"diagnostic", t.diagnostic}});
  }
  j["trajectories"] = std::move(trajectories);

  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

EnsembleManifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("no manifest in " + dir.string());
  EnsembleManifest m;
  try {
    const json j = json::parse(in);
    m.version = j.at("version").get<std::string>();
    m.complete = j.at("complete").get<bool>();
    m.config = config_from_json(j.at("config"));
    m.summary.aborted = j.at("abort_count").get<std::size_t>();
    m.summary.total_jumps = j.at("total_se_events").get<std::uint64_t>();
    m.summary.total_sign_changes = j.at("total_sign_changes").get<std::uint64_t>();
    m.summary.total_flights = j.at("total_flights").get<std::uint64_t>();
    for (const auto& t : j.at("trajectories")) {
      TrajectorySummary s;
      s.trajectory_id = t.at("id").get<std::size_t>();
      s.file = t.at("file").get<std::string>();
      s.status = parse_status(t.at("status").get<std::string>());
      s.last_good_tau = t.at("last_good_tau").get<double>();
      s.n_jumps = t.at("n_se").get<std::uint64_t>();
      s.n_sign_changes = t.at("n_signchange").get<std::uint64_t>();
      s.n_samples = t.at("n_sample").get<std::uint64_t>();
      s.diagnostic = t.at("diagnostic").get<std::string>();
      m.summary.trajectories.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return m;
}

std::vector<TrajectoryLog> read_events_dir(const std::filesystem::path& dir,
                                           EnsembleManifest* manifest_out) {
  EnsembleManifest manifest = read_manifest(dir);
  if (!manifest.complete) throw IoError(dir.string() + ": run is marked incomplete");
  if (manifest.summary.trajectories.size() != manifest.config.n_trajectories) {
    throw IoError(dir.string() + ": manifest lists " +
                  std::to_string(manifest.summary.trajectories.size()) + " trajectories, config has " +
                  std::to_string(manifest.config.n_trajectories));
  }

  std::vector<TrajectoryLog> logs;
  logs.reserve(manifest.summary.trajectories.size());
  for (const auto& entry : manifest.summary.trajectories) {
    const auto path = dir / entry.file;
    const CsvTable table = read_csv(path);
    const std::size_t c_kind = table.column("kind"), c_tau = table.column("tau"),
                      c_x = table.column("x"), c_p = table.column("p"), c_u = table.column("u"),
                      c_v = table.column("v"), c_z = table.column("z"),
                      c_recoil = table.column("recoil"), c_h = table.column("H");

    TrajectoryLog log;
    log.trajectory_id = entry.trajectory_id;
    log.tau_start = 0.0;
    log.tau_end = manifest.config.tau_end;
    log.status = entry.status;
    log.last_good_tau = entry.last_good_tau;
    log.diagnostic = entry.diagnostic;
    double last_jump = log.tau_start;
    std::uint64_t n_signs = 0;
    try {
      for (const auto& row : table.rows) {
        AtomState s;
        s.tau = parse_double(row[c_tau]);
        s.x = parse_double(row[c_x]);
        s.p = parse_double(row[c_p]);
        s.u = parse_double(row[c_u]);
        s.v = parse_double(row[c_v]);
        s.z = parse_double(row[c_z]);
        const double h = parse_double(row[c_h]);
        const std::string& kind = row[c_kind];
        if (kind == "se") {
          SpontaneousEvent ev;
          ev.tau = s.tau;
          ev.pre_state = s;
          ev.recoil = parse_double(row[c_recoil]);
          ev.interval = s.tau - last_jump;
          ev.post_energy = h;
          last_jump = s.tau;
          log.jumps.push_back(ev);
        } else if (kind == "signchange") {
          log.sign_changes.push_back(s.tau);
          ++n_signs;
        } else if (kind == "sample") {
          log.samples.push_back({s.tau, s.x, s.p, s.u, s.v, s.z, h});
        } else {
          throw IoError("unknown row kind '" + kind + "'");
        }
      }
    } catch (const std::invalid_argument& e) {
      throw IoError(path.string() + ": " + e.what());
    }
    const bool jumps_match = !manifest.config.record.jumps || log.jumps.size() == entry.n_jumps;
    const bool signs_match = !manifest.config.record.sign_changes || n_signs == entry.n_sign_changes;
    if (!jumps_match || !signs_match || log.samples.size() != entry.n_samples) {
      throw IoError(path.string() + ": event counts do not match the manifest");
    }
    logs.push_back(std::move(log));
  }
  if (manifest_out) *manifest_out = std::move(manifest);
  return logs;
}

}  // namespace latticewalk
