#include "jcm/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "jcm/analysis.hpp"
#include "jcm/classical.hpp"
#include "jcm/parallel.hpp"
#include "jcm/quantum.hpp"

namespace jcm {

namespace fs = std::filesystem;

const char* to_string(RunKind kind) {
  switch (kind) {
    case RunKind::section: return "section";
    case RunKind::orbit: return "orbit";
    case RunKind::evolve: return "evolve";
    case RunKind::husimi: return "husimi";
  }
  return "?";
}

std::string format_double(double v) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc())
    throw std::runtime_error("failed to format a double");
  return std::string(buf, end);
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

class KeyValues {
 public:
  KeyValues(const std::string& text, std::string origin)
      : origin_(std::move(origin)) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos)
        line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        fail("line " + std::to_string(line_no) + ": expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty() || value.empty())
        fail("line " + std::to_string(line_no) + ": empty key or value");
      if (!values_.emplace(key, value).second)
        fail("duplicate key '" + key + "'");
    }
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw ConfigError(origin_ + ": " + message);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string raw(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end()) fail("missing required key '" + key + "'");
    used_.insert(key);
    return it->second;
  }

  double number(const std::string& key) { return parse_number(key, raw(key)); }

  double number_or(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }

  int integer(const std::string& key) {
    const double v = number(key);
    if (std::abs(v - std::round(v)) > 1e-9)
      fail("key '" + key + "' must be an integer");
    return static_cast<int>(std::llround(v));
  }

  int integer_or(const std::string& key, int fallback) {
    return has(key) ? integer(key) : fallback;
  }

  bool flag_or(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string v = raw(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail("key '" + key + "' must be a boolean (true/false)");
  }

  std::vector<double> list(const std::string& key) {
    std::string text = raw(key);
    std::replace(text.begin(), text.end(), ',', ' ');
    std::istringstream in(text);
    std::vector<double> out;
    std::string token;
    while (in >> token) out.push_back(parse_number(key, token));
    if (out.empty()) fail("key '" + key + "' holds no values");
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : values_)
      if (used_.count(key) == 0) fail("unknown key '" + key + "'");
  }

 private:
  double parse_number(const std::string& key, const std::string& text) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size() || !std::isfinite(v)) throw std::exception();
      return v;
    } catch (...) {
      fail("key '" + key + "': cannot parse number from '" + text + "'");
    }
  }

  std::string origin_;
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

void require_positive(const KeyValues& kv, double v, const char* name) {
  if (!(v > 0.0)) kv.fail(std::string("key '") + name + "' must be positive");
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string csv_row(const std::vector<double>& row) {
  std::string line;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) line += ',';
    line += format_double(row[i]);
  }
  line += '\n';
  return line;
}

struct Timer {
  std::chrono::steady_clock::time_point begin = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - begin)
        .count();
  }
};

}  // namespace

std::vector<PhasePoint> ExperimentConfig::resolve_ics() const {
  std::vector<PhasePoint> ics;
  for (std::size_t i = 0; i < q_a.size(); ++i) {
    PhasePoint x;
    x.q_a = q_a[i];
    x.p_a = p_a[i];
    x.q_f = i < q_f.size() ? q_f[i] : 0.0;
    if (p_f.has_value())
      x.p_f = (*p_f)[i];
    else
      x.p_f = solve_pf_for_energy(x.q_a, x.p_a, x.q_f, *energy, params);
    ics.push_back(x);
  }
  return ics;
}

ExperimentConfig parse_config(const std::string& text,
                              const std::string& origin) {
  KeyValues kv(text, origin);
  ExperimentConfig cfg;

  const std::string kind = kv.raw("kind");
  if (kind == "section") cfg.kind = RunKind::section;
  else if (kind == "orbit") cfg.kind = RunKind::orbit;
  else if (kind == "evolve") cfg.kind = RunKind::evolve;
  else if (kind == "husimi") cfg.kind = RunKind::husimi;
  else kv.fail("kind must be one of section | orbit | evolve | husimi");

  cfg.params.J = kv.number("J");
  cfg.params.omega0 = kv.number_or("omega0", 1.0);
  cfg.params.epsilon = kv.number_or("epsilon", 1.0);
  cfg.params.G = kv.number("G");
  cfg.params.Gprime = kv.number_or("Gprime", 0.0);
  try {
    cfg.params.validate();
  } catch (const std::invalid_argument& err) {
    kv.fail(err.what());
  }

  if (kv.has("energy")) cfg.energy = kv.number("energy");
  cfg.tol = kv.number_or("tol", 1e-10);
  require_positive(kv, cfg.tol, "tol");

  const bool has_ic = kv.has("q_a") || kv.has("p_a");
  if (has_ic) {
    cfg.q_a = kv.list("q_a");
    cfg.p_a = kv.list("p_a");
    if (cfg.p_a.size() != cfg.q_a.size())
      kv.fail("q_a and p_a must hold the same number of values");
    if (kv.has("q_f")) {
      cfg.q_f = kv.list("q_f");
      if (cfg.q_f.size() != cfg.q_a.size())
        kv.fail("q_f must hold the same number of values as q_a");
    } else {
      cfg.q_f.assign(cfg.q_a.size(), 0.0);
    }
    if (kv.has("p_f")) {
      cfg.p_f = kv.list("p_f");
      if (cfg.p_f->size() != cfg.q_a.size())
        kv.fail("p_f must hold the same number of values as q_a");
    } else if (!cfg.energy.has_value()) {
      kv.fail("p_f is required when no energy is configured");
    }
  }

  switch (cfg.kind) {
    case RunKind::evolve:
    case RunKind::husimi: {
      if (!has_ic) kv.fail("an initial condition (q_a, p_a) is required");
      if (cfg.q_a.size() != 1)
        kv.fail("evolve/husimi runs take exactly one initial condition");
      cfg.n_max = kv.integer_or("n_max", 120);
      if (cfg.n_max < 0) kv.fail("n_max must be non-negative");
      if (cfg.kind == RunKind::evolve) {
        cfg.dt = kv.number_or("dt", 0.01);
        require_positive(kv, cfg.dt, "dt");
        if (cfg.dt > 0.02 + 1e-12)
          kv.fail("dt must not exceed 0.02 (entropy-rate stencil)");
        cfg.t_max = kv.number_or("t_max", 50.0);
        if (!(cfg.t_max > cfg.dt)) kv.fail("t_max must exceed dt");
        cfg.truncation_check = kv.flag_or("truncation_check", false);
      } else {
        cfg.resolution = kv.integer_or("resolution", 201);
        if (cfg.resolution < 11) kv.fail("resolution must be at least 11");
        cfg.snapshot_times = kv.list("snapshot_times");
        for (double t : cfg.snapshot_times)
          if (t < 0.0) kv.fail("snapshot_times must be non-negative");
      }
      break;
    }
    case RunKind::section: {
      if (!cfg.energy.has_value())
        kv.fail("section runs require an energy");
      cfg.n_crossings = kv.integer_or("n_crossings", 300);
      if (cfg.n_crossings < 1) kv.fail("n_crossings must be positive");
      if (!has_ic) {
        cfg.scan_grid = kv.integer_or("scan_grid", 20);
        if (cfg.scan_grid < 2) kv.fail("scan_grid must be at least 2");
      }
      break;
    }
    case RunKind::orbit: {
      if (!has_ic) kv.fail("orbit runs need seed coordinates q_a, p_a");
      cfg.refine = kv.flag_or("refine", true);
      if (cfg.refine && !cfg.energy.has_value())
        kv.fail("orbit refinement requires an energy");
      cfg.sample_dt = kv.number_or("sample_dt", 0.01);
      require_positive(kv, cfg.sample_dt, "sample_dt");
      cfg.t_max = kv.number_or("t_max", 50.0);
      require_positive(kv, cfg.t_max, "t_max");
      break;
    }
  }
  kv.finish();
  return cfg;
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), file.filename().string());
}

namespace {

void put(RunResult& result, const std::string& key, const std::string& value) {
  result.summary[key] = value;
}

void put(RunResult& result, const std::string& key, double value) {
  result.summary[key] = format_double(value);
}

void echo_params(RunResult& result, const ExperimentConfig& cfg) {
  put(result, "kind", to_string(cfg.kind));
  put(result, "J", cfg.params.J);
  put(result, "omega0", cfg.params.omega0);
  put(result, "epsilon", cfg.params.epsilon);
  put(result, "G", cfg.params.G);
  put(result, "Gprime", cfg.params.Gprime);
  if (cfg.energy) put(result, "energy", *cfg.energy);
}

std::vector<PhasePoint> scan_ics(const ExperimentConfig& cfg) {
  const double border = 2.0 * std::sqrt(cfg.params.J);
  const double extent = 0.98 * border;
  std::vector<PhasePoint> ics;
  for (int i = 0; i < cfg.scan_grid; ++i) {
    for (int j = 0; j < cfg.scan_grid; ++j) {
      const double q = -extent + 2.0 * extent * i / (cfg.scan_grid - 1);
      const double p = -extent + 2.0 * extent * j / (cfg.scan_grid - 1);
      if (q * q + p * p > extent * extent) continue;
      try {
        ics.push_back({q, p, 0.0, solve_pf_for_energy(q, p, 0.0, *cfg.energy,
                                                      cfg.params)});
      } catch (const NumericError&) {
        // energetically inaccessible grid point
      }
    }
  }
  if (ics.empty())
    throw NumericError("no scan point on the energy shell E = " +
                       format_double(*cfg.energy));
  return ics;
}

void check_on_shell(const std::vector<PhasePoint>& points,
                    const ExperimentConfig& cfg, RunResult& result) {
  if (!cfg.energy) return;
  double worst = 0.0;
  for (const auto& x : points)
    worst = std::max(worst,
                     std::abs(classical_hamiltonian(x, cfg.params) - *cfg.energy));
  put(result, "max_on_shell_deviation", worst);
  if (worst > 1e-6)
    throw NumericError("emitted point off the energy shell by " +
                       format_double(worst));
}

RunResult run_section(const ExperimentConfig& cfg, const fs::path& out_dir,
                      int threads) {
  RunResult result;
  const std::vector<PhasePoint> ics =
      cfg.q_a.empty() ? scan_ics(cfg) : cfg.resolve_ics();
  const auto sequences =
      poincare_section(ics, cfg.params, *cfg.energy, cfg.n_crossings, threads);

  std::string csv = "ic_index,crossing,t_cross,q_a,p_a,p_f\n";
  std::vector<PhasePoint> emitted;
  int truncated = 0;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    if (static_cast<int>(sequences[i].size()) < cfg.n_crossings) ++truncated;
    for (std::size_t k = 0; k < sequences[i].size(); ++k) {
      const SectionPoint& s = sequences[i][k];
      csv += csv_row({static_cast<double>(i), static_cast<double>(k), s.t_cross,
                      s.q_a, s.p_a, s.p_f});
      emitted.push_back({s.q_a, s.p_a, 0.0, s.p_f});
    }
  }
  write_atomic(out_dir / "section.csv", csv);
  result.output_files.push_back("section.csv");
  put(result, "ic_count", static_cast<double>(ics.size()));
  put(result, "point_count", static_cast<double>(emitted.size()));
  put(result, "border_terminated_ics", static_cast<double>(truncated));
  check_on_shell(emitted, cfg, result);
  return result;
}

RunResult run_orbit(const ExperimentConfig& cfg, const fs::path& out_dir) {
  RunResult result;
  const std::vector<PhasePoint> seeds = cfg.resolve_ics();
  std::vector<PhasePoint> emitted;

  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const std::string tag = std::to_string(i + 1);
    PhasePoint start = seeds[i];
    double horizon = cfg.t_max;
    if (cfg.refine) {
      const SectionPoint seed{seeds[i].q_a, seeds[i].p_a, 0.0, seeds[i].p_f};
      const PeriodicOrbit orbit =
          refine_periodic_orbit(seed, cfg.params, *cfg.energy);
      start = orbit.ic;
      horizon = orbit.period;
      put(result, "period_" + tag, orbit.period);
      put(result, "residual_" + tag, orbit.residual);
      put(result, "map_trace_" + tag, orbit.map_trace);
      put(result, "stable_" + tag, orbit.stable ? "true" : "false");
      put(result, "crossings_per_period_" + tag,
          static_cast<double>(orbit.crossings_per_period));
      put(result, "ic_q_a_" + tag, orbit.ic.q_a);
      put(result, "ic_p_a_" + tag, orbit.ic.p_a);
      put(result, "ic_p_f_" + tag, orbit.ic.p_f);
    }

    IntegrateOptions opts;
    opts.tol = cfg.tol;
    opts.sample_dt = cfg.sample_dt;
    const Trajectory traj =
        integrate_trajectory(start, cfg.params, 0.0, horizon, opts);
    const SpinProjection proj = spin_projection(traj, cfg.params);

    std::string csv = "t,q_a,p_a,q_f,p_f,r\n";
    for (std::size_t k = 0; k < traj.samples.size(); ++k) {
      const auto& s = traj.samples[k];
      csv += csv_row({s.t, s.x.q_a, s.x.p_a, s.x.q_f, s.x.p_f, proj.radius[k]});
      emitted.push_back(s.x);
    }
    const std::string name =
        (cfg.refine ? "orbit" : "trajectory") + tag + ".csv";
    write_atomic(out_dir / name, csv);
    result.output_files.push_back(name);
    put(result, "energy_drift_" + tag, traj.energy_drift);
    put(result, "max_radius_" + tag,
        *std::max_element(proj.radius.begin(), proj.radius.end()));
  }
  put(result, "border_radius", 2.0 * std::sqrt(cfg.params.J));
  check_on_shell(emitted, cfg, result);
  return result;
}

struct QuantumSetup {
  BasisDescriptor basis;
  Eigen::MatrixXcd hamiltonian;
  SpectralDecomposition spectral;
  PhasePoint ic;
  Eigen::VectorXcd psi0;
};

QuantumSetup prepare_quantum(const ExperimentConfig& cfg, int n_max) {
  QuantumSetup setup;
  setup.basis = build_basis(cfg.params, n_max);
  setup.hamiltonian = build_hamiltonian(cfg.params, build_operators(setup.basis));
  setup.spectral = diagonalize(setup.hamiltonian);
  setup.ic = cfg.resolve_ics().at(0);
  setup.psi0 = product_initial_state(setup.ic, setup.basis);
  return setup;
}

RunResult run_evolve(const ExperimentConfig& cfg, const fs::path& out_dir,
                     int threads) {
  RunResult result;
  const QuantumSetup setup = prepare_quantum(cfg, cfg.n_max);
  put(result, "dim_total", static_cast<double>(setup.basis.dim_total));

  const double e_classical = classical_hamiltonian(setup.ic, cfg.params);
  put(result, "energy_classical", e_classical);
  if (cfg.energy && std::abs(e_classical - *cfg.energy) > 1e-6)
    throw NumericError("initial condition off the configured shell by " +
                       format_double(std::abs(e_classical - *cfg.energy)));
  const double e_quantum =
      (setup.psi0.adjoint() * setup.hamiltonian * setup.psi0)(0).real();
  put(result, "energy_quantum", e_quantum);
  put(result, "field_tail_mass",
      field_coherent_state(setup.ic.q_f, setup.ic.p_f, cfg.n_max).tail_mass);

  const ObservableBundle bundle = observable_run(
      setup.spectral, setup.psi0, setup.basis, cfg.t_max, cfg.dt, threads);
  put(result, "delta_initial", bundle.delta.values.front());

  if (cfg.truncation_check) {
    const QuantumSetup wider = prepare_quantum(cfg, cfg.n_max + 20);
    const ObservableBundle reference = observable_run(
        wider.spectral, wider.psi0, wider.basis, cfg.t_max, cfg.dt, threads);
    double worst = 0.0;
    for (std::size_t k = 0; k < bundle.delta.size(); ++k)
      worst = std::max(worst, std::abs(bundle.delta.values[k] -
                                       reference.delta.values[k]));
    put(result, "truncation_delta_shift", worst);
    if (worst > 1e-8)
      throw NumericError("Fock cutoff n_max = " + std::to_string(cfg.n_max) +
                         " is too small: raising it by 20 moves delta(t) by " +
                         format_double(worst));
  }

  std::string csv = "t,delta,ddelta_dt,jz_over_J\n";
  for (std::size_t k = 0; k < bundle.delta.size(); ++k)
    csv += csv_row({bundle.delta.t(k), bundle.delta.values[k],
                    bundle.delta_rate.values[k], bundle.jz_over_j.values[k]});
  write_atomic(out_dir / "timeseries.csv", csv);
  result.output_files.push_back("timeseries.csv");
  return result;
}

std::string husimi_file_text(const HusimiGrid& grid, double t) {
  std::string text = "# spin husimi distribution at t = " + format_double(t) + "\n";
  text += "# q_a:";
  for (double q : grid.q_axis) text += " " + format_double(q);
  text += "\n# p_a:";
  for (double p : grid.p_axis) text += " " + format_double(p);
  text += "\n";
  for (int i = 0; i < grid.values.rows(); ++i) {
    for (int j = 0; j < grid.values.cols(); ++j) {
      if (j) text += ' ';
      text += grid.mask(i, j) ? format_double(grid.values(i, j)) : "nan";
    }
    text += '\n';
  }
  return text;
}

RunResult run_husimi(const ExperimentConfig& cfg, const fs::path& out_dir,
                     int threads) {
  RunResult result;
  const QuantumSetup setup = prepare_quantum(cfg, cfg.n_max);
  put(result, "dim_total", static_cast<double>(setup.basis.dim_total));
  const Propagator prop(setup.spectral, setup.psi0);

  // Snapshots are independent; files are still written in order.
  std::vector<HusimiGrid> grids(cfg.snapshot_times.size());
  std::vector<double> entropies(cfg.snapshot_times.size());
  parallel_for(cfg.snapshot_times.size(), threads, [&](std::size_t k) {
    const Eigen::VectorXcd psi = prop.state_at(cfg.snapshot_times[k]);
    const Eigen::MatrixXcd rho = reduced_density_atom(psi, setup.basis);
    grids[k] = spin_husimi(rho, cfg.resolution);
    entropies[k] = linear_entropy(rho);
  });

  for (std::size_t k = 0; k < cfg.snapshot_times.size(); ++k) {
    const double t = cfg.snapshot_times[k];
    const std::string name = "husimi_t" + format_double(t) + ".txt";
    write_atomic(out_dir / name, husimi_file_text(grids[k], t));
    result.output_files.push_back(name);
    put(result, "participation_t" + format_double(t),
        husimi_participation(grids[k]));
    put(result, "delta_t" + format_double(t), entropies[k]);
  }
  return result;
}

}  // namespace

RunResult run(const ExperimentConfig& cfg, const fs::path& out_dir,
              int threads) {
  Timer timer;
  fs::create_directories(out_dir);

  RunResult result;
  switch (cfg.kind) {
    case RunKind::section: result = run_section(cfg, out_dir, threads); break;
    case RunKind::orbit: result = run_orbit(cfg, out_dir); break;
    case RunKind::evolve: result = run_evolve(cfg, out_dir, threads); break;
    case RunKind::husimi: result = run_husimi(cfg, out_dir, threads); break;
  }

  echo_params(result, cfg);
  put(result, "elapsed_seconds", timer.seconds());
  std::string files;
  for (const auto& f : result.output_files) {
    if (!files.empty()) files += ' ';
    files += f;
  }
  put(result, "outputs", files);

  std::string text;
  for (const auto& [key, value] : result.summary)
    text += key + " = " + value + "\n";
  write_atomic(out_dir / "summary.txt", text);
  result.output_files.push_back("summary.txt");
  return result;
}

bool VerifyReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const VerifyCheck& c) { return c.pass; });
}

namespace {

using CheckBody = std::function<std::pair<bool, std::string>()>;

void run_check(VerifyReport& report, const std::string& name,
               const CheckBody& body) {
  VerifyCheck check;
  check.name = name;
  try {
    const auto [pass, measured] = body();
    check.pass = pass;
    check.measured = measured;
  } catch (const std::exception& err) {
    check.pass = false;
    check.measured = std::string("exception: ") + err.what();
  }
  report.checks.push_back(check);
}

std::string drift_text(double measured, double bound) {
  return format_double(measured) + " (bound " + format_double(bound) + ")";
}

}  // namespace

VerifyReport verify(const ExperimentConfig& cfg, int threads) {
  VerifyReport report;
  const bool quantum_kind =
      cfg.kind == RunKind::evolve || cfg.kind == RunKind::husimi;

  // One initial condition anchors the checks; a scan config uses its first
  // grid point.
  PhasePoint ic;
  bool have_ic = false;
  try {
    const auto ics = cfg.q_a.empty() ? scan_ics(cfg) : cfg.resolve_ics();
    if (!ics.empty()) {
      ic = ics.front();
      have_ic = true;
    }
  } catch (const std::exception&) {
    have_ic = false;
  }

  run_check(report, "eom_gradient_consistency", [&] {
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double span = 2.0 * std::sqrt(cfg.params.J);
    double worst = 0.0;
    int tested = 0;
    const double h = 1e-6;
    while (tested < 50) {
      const PhasePoint x{0.7 * span * unit(rng), 0.7 * span * unit(rng),
                         3.0 * unit(rng), 3.0 * unit(rng)};
      if (x.spin_radius2() > 0.8 * 4.0 * cfg.params.J) continue;
      ++tested;
      const auto rhs = eom_rhs(x, cfg.params);
      auto energy_at = [&](double dqa, double dpa, double dqf, double dpf) {
        return classical_hamiltonian(
            {x.q_a + dqa, x.p_a + dpa, x.q_f + dqf, x.p_f + dpf}, cfg.params);
      };
      const double dh_dqa = (energy_at(h, 0, 0, 0) - energy_at(-h, 0, 0, 0)) / (2 * h);
      const double dh_dpa = (energy_at(0, h, 0, 0) - energy_at(0, -h, 0, 0)) / (2 * h);
      const double dh_dqf = (energy_at(0, 0, h, 0) - energy_at(0, 0, -h, 0)) / (2 * h);
      const double dh_dpf = (energy_at(0, 0, 0, h) - energy_at(0, 0, 0, -h)) / (2 * h);
      worst = std::max({worst, std::abs(rhs[0] + dh_dpa),
                        std::abs(rhs[1] - dh_dqa), std::abs(rhs[2] + dh_dpf),
                        std::abs(rhs[3] - dh_dqf)});
    }
    return std::make_pair(worst < 1e-6, drift_text(worst, 1e-6));
  });

  if (have_ic) {
    run_check(report, "classical_energy_drift", [&] {
      IntegrateOptions opts;
      opts.tol = cfg.tol;
      const Trajectory traj =
          integrate_trajectory(ic, cfg.params, 0.0, 100.0, opts);
      const double e0 = classical_hamiltonian(ic, cfg.params);
      const double bound = 1e-8 * std::max(1.0, std::abs(e0));
      return std::make_pair(traj.energy_drift < bound,
                            drift_text(traj.energy_drift, bound));
    });

    run_check(report, "spin_bound_preservation", [&] {
      IntegrateOptions opts;
      opts.tol = cfg.tol;
      const Trajectory traj =
          integrate_trajectory(ic, cfg.params, 0.0, 100.0, opts);
      double worst = 0.0;
      for (const auto& s : traj.samples)
        worst = std::max(worst, s.x.spin_radius2() - 4.0 * cfg.params.J);
      return std::make_pair(worst <= 0.0,
                            "max(r^2 - 4J) = " + format_double(worst));
    });

    if (cfg.energy) {
      run_check(report, "on_shell_ic", [&] {
        const double dev =
            std::abs(classical_hamiltonian(ic, cfg.params) - *cfg.energy);
        return std::make_pair(dev <= 1e-6, drift_text(dev, 1e-6));
      });
    }
  }

  if (!quantum_kind) return report;

  // Quantum checks share one diagonalization.
  BasisDescriptor basis;
  Eigen::MatrixXcd hamiltonian;
  SpectralDecomposition spectral;
  Eigen::VectorXcd psi0;
  bool spectral_ready = false, state_ready = false;
  std::string prep_error;
  try {
    basis = build_basis(cfg.params, cfg.n_max);
    hamiltonian = build_hamiltonian(cfg.params, build_operators(basis));
    spectral = diagonalize(hamiltonian);
    spectral_ready = true;
    psi0 = product_initial_state(ic, basis);
    state_ready = true;
  } catch (const std::exception& err) {
    prep_error = err.what();
  }

  run_check(report, "hermiticity", [&] {
    if (!spectral_ready) throw NumericError(prep_error);
    const double defect =
        (hamiltonian - hamiltonian.adjoint()).cwiseAbs().maxCoeff();
    const double bound = 1e-14 * std::max(1.0, hamiltonian.cwiseAbs().maxCoeff());
    return std::make_pair(defect <= bound, drift_text(defect, bound));
  });

  const double t_probe = std::max(cfg.t_max, 100.0);
  run_check(report, "unitarity_norm", [&] {
    if (!state_ready) throw NumericError(prep_error);
    const Propagator prop(spectral, psi0);
    double worst = 0.0;
    for (double t = 0.0; t <= t_probe + 1e-9; t += 1.0)
      worst = std::max(worst, std::abs(prop.state_at(t).norm() - 1.0));
    return std::make_pair(worst < 1e-9, drift_text(worst, 1e-9));
  });

  run_check(report, "unitarity_energy", [&] {
    if (!state_ready) throw NumericError(prep_error);
    const Propagator prop(spectral, psi0);
    const double e0 = (psi0.adjoint() * hamiltonian * psi0)(0).real();
    double worst = 0.0;
    for (double t = 0.0; t <= t_probe + 1e-9; t += 1.0) {
      const Eigen::VectorXcd psi = prop.state_at(t);
      worst = std::max(worst,
                       std::abs((psi.adjoint() * hamiltonian * psi)(0).real() - e0));
    }
    return std::make_pair(worst < 1e-9, drift_text(worst, 1e-9));
  });

  run_check(report, "quantum_classical_identity", [&] {
    if (!state_ready) throw NumericError(prep_error);
    const double e_cl = classical_hamiltonian(ic, cfg.params);
    const double e_q = (psi0.adjoint() * hamiltonian * psi0)(0).real();
    return std::make_pair(std::abs(e_q - e_cl) < 1e-8,
                          drift_text(std::abs(e_q - e_cl), 1e-8));
  });

  run_check(report, "entropy_bounds", [&] {
    if (!state_ready) throw NumericError(prep_error);
    const ObservableBundle bundle = observable_run(
        spectral, psi0, basis, cfg.t_max, std::min(cfg.dt, 0.02), threads);
    double lo = 1.0, hi = 0.0;
    for (double d : bundle.delta.values) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    const double cap = 1.0 - 1.0 / basis.dim_spin;
    const bool pass = lo >= -1e-12 && hi <= cap + 1e-12;
    return std::make_pair(pass, "delta in [" + format_double(lo) + ", " +
                                    format_double(hi) + "], cap " +
                                    format_double(cap));
  });

  run_check(report, "schmidt_symmetry", [&] {
    if (!state_ready) throw NumericError(prep_error);
    const Propagator prop(spectral, psi0);
    double worst = 0.0;
    for (double t = 0.0; t <= cfg.t_max + 1e-9; t += 1.0) {
      const Eigen::VectorXcd psi = prop.state_at(t);
      const double da = linear_entropy(reduced_density_atom(psi, basis));
      const double df = linear_entropy(reduced_density_field(psi, basis));
      worst = std::max(worst, std::abs(da - df));
    }
    return std::make_pair(worst < 1e-9, drift_text(worst, 1e-9));
  });

  run_check(report, "charge_conservation", [&] {
    if (!state_ready) throw NumericError(prep_error);
    if (cfg.params.G != 0.0 && cfg.params.Gprime != 0.0)
      return std::make_pair(true, std::string("skipped (not integrable)"));
    const double sign = cfg.params.Gprime == 0.0 ? 1.0 : -1.0;
    Eigen::VectorXd charge(basis.dim_total);
    for (int s = 0; s < basis.dim_spin; ++s)
      for (int n = 0; n < basis.dim_field; ++n)
        charge(basis.flat_index(s, n)) = (s - basis.J) + sign * n;
    const Propagator prop(spectral, psi0);
    const double c0 = charge.dot(psi0.cwiseAbs2());
    double worst = 0.0;
    for (double t = 0.0; t <= cfg.t_max + 1e-9; t += 1.0) {
      const Eigen::VectorXcd psi = prop.state_at(t);
      worst = std::max(worst, std::abs(charge.dot(psi.cwiseAbs2()) - c0));
    }
    return std::make_pair(worst < 1e-9, drift_text(worst, 1e-9));
  });

  run_check(report, "truncation_doubling", [&] {
    if (!state_ready) throw NumericError(prep_error);
    const double dt = std::min(cfg.dt, 0.02);
    const ObservableBundle narrow =
        observable_run(spectral, psi0, basis, cfg.t_max, dt, threads);
    const BasisDescriptor wide_basis = build_basis(cfg.params, cfg.n_max + 20);
    const SpectralDecomposition wide_spec = diagonalize(
        build_hamiltonian(cfg.params, build_operators(wide_basis)));
    const Eigen::VectorXcd wide_psi0 = product_initial_state(ic, wide_basis);
    const ObservableBundle wide = observable_run(wide_spec, wide_psi0,
                                                 wide_basis, cfg.t_max, dt,
                                                 threads);
    double worst = 0.0;
    for (std::size_t k = 0; k < narrow.delta.size(); ++k)
      worst = std::max(
          worst, std::abs(narrow.delta.values[k] - wide.delta.values[k]));
    return std::make_pair(worst < 1e-8, drift_text(worst, 1e-8));
  });

  return report;
}

}  // namespace jcm
