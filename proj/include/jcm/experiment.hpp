#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jcm/model.hpp"

namespace jcm {

enum class RunKind { section, orbit, evolve, husimi };

const char* to_string(RunKind kind);

// Flat key = value experiment description. evolve/husimi take a single
// initial condition; section/orbit accept comma-separated coordinate lists
// (or, for section, a grid scan over the spin disk when no IC is given).
// p_f may be omitted wherever an energy is configured; it is then the
// positive root on the energy shell.
struct ExperimentConfig {
  RunKind kind = RunKind::evolve;
  ModelParams params;
  std::optional<double> energy;

  std::vector<double> q_a, p_a, q_f;
  std::optional<std::vector<double>> p_f;

  int n_max = 120;
  double dt = 0.01;
  double t_max = 50.0;
  double tol = 1e-10;
  double sample_dt = 0.01;
  int resolution = 201;
  int n_crossings = 300;
  int scan_grid = 20;
  bool refine = true;
  bool truncation_check = false;
  std::vector<double> snapshot_times;

  std::vector<PhasePoint> resolve_ics() const;
};

ExperimentConfig parse_config(const std::string& text,
                              const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& file);

struct RunResult {
  std::vector<std::string> output_files;
  std::map<std::string, std::string> summary;
};

// Executes the experiment and writes its outputs (CSV / grid files plus
// summary.txt) atomically under out_dir. Output bytes are deterministic for a
// fixed config and build; summary.txt additionally carries timings.
RunResult run(const ExperimentConfig& config,
              const std::filesystem::path& out_dir, int threads = 1);

struct VerifyCheck {
  std::string name;
  bool pass = false;
  std::string measured;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_pass() const;
};

// Runs every invariant check applicable to the configured experiment and
// reports each with its measured value; check failures never throw.
VerifyReport verify(const ExperimentConfig& config, int threads = 1);

// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace jcm
