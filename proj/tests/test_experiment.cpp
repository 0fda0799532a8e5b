#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "jcm/errors.hpp"
#include "jcm/experiment.hpp"

using namespace jcm;
namespace fs = std::filesystem;

namespace {

std::string tiny_evolve_config(const std::string& extra = {}) {
  return "kind = evolve\n"
         "J = 0.5\n"
         "G = 0.4\n"
         "Gprime = 0.1\n"
         "q_a = 0.3\n"
         "p_a = 0.6\n"
         "p_f = 1.1\n"
         "n_max = 25\n"
         "dt = 0.02\n"
         "t_max = 2.0\n" +
         extra;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("jcm_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("round trip of a full config") {
    const ExperimentConfig cfg = parse_config(
        "# comment line\n"
        "kind = evolve\n"
        "J = 4.5\n"
        "omega0 = 1.0\n"
        "epsilon = 1.0\n"
        "G = 0.5\n"
        "Gprime = 0.2   # trailing comment\n"
        "energy = 8.5\n"
        "q_a = 0.0\n"
        "p_a = 2.261\n"
        "n_max = 120\n"
        "dt = 0.01\n"
        "t_max = 50\n");
    CHECK(cfg.kind == RunKind::evolve);
    CHECK(cfg.params.Gprime == 0.2);
    CHECK(cfg.energy == 8.5);
    const auto ics = cfg.resolve_ics();
    REQUIRE(ics.size() == 1);
    CHECK(ics[0].p_f == doctest::Approx(3.423276).epsilon(1e-5));
  }

  SUBCASE("field-level errors") {
    CHECK_THROWS_WITH_AS(parse_config("kind = evolve\nJ = 4.5\n"),
                         doctest::Contains("missing required key 'G'"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config(tiny_evolve_config("bogus_key = 1\n")),
        doctest::Contains("unknown key 'bogus_key'"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config(tiny_evolve_config("snapshot_times = 1\n")),
        doctest::Contains("unknown key 'snapshot_times'"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("kind = dance\nJ = 1\nG = 0.5\n"),
                         doctest::Contains("kind"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config("kind = evolve\nJ = 4.5\nG = x17\nq_a = 0\np_a = 1\n"
                     "p_f = 1\n"),
        doctest::Contains("cannot parse number"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config("kind = evolve\nJ = 0.4\nG = 0.5\nq_a = 0\np_a = 1\n"
                     "p_f = 1\n"),
        doctest::Contains("2J"), ConfigError);
  }

  SUBCASE("kind-specific requirements") {
    // no initial condition
    CHECK_THROWS_AS(parse_config("kind = evolve\nJ = 0.5\nG = 0.4\n"),
                    ConfigError);
    // neither p_f nor energy
    CHECK_THROWS_WITH_AS(
        parse_config("kind = evolve\nJ = 0.5\nG = 0.4\nq_a = 0.1\np_a = 0.1\n"),
        doctest::Contains("p_f"), ConfigError);
    // dt too coarse for the derivative stencil
    CHECK_THROWS_WITH_AS(parse_config(tiny_evolve_config("dt = 0.05\n")),
                         doctest::Contains("duplicate key"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config("kind = evolve\nJ = 0.5\nG = 0.4\nq_a = 0\np_a = 0.4\n"
                     "p_f = 1\ndt = 0.05\n"),
        doctest::Contains("0.02"), ConfigError);
    // section needs an energy
    CHECK_THROWS_WITH_AS(parse_config("kind = section\nJ = 4.5\nG = 0.5\n"),
                         doctest::Contains("energy"), ConfigError);
    // husimi needs snapshots
    CHECK_THROWS_WITH_AS(
        parse_config("kind = husimi\nJ = 0.5\nG = 0.4\nq_a = 0.1\np_a = 0.1\n"
                     "p_f = 1\n"),
        doctest::Contains("snapshot_times"), ConfigError);
    // mismatched list lengths
    CHECK_THROWS_WITH_AS(
        parse_config("kind = orbit\nJ = 4.5\nG = 0.5\nenergy = 8.5\n"
                     "q_a = 0, 1\np_a = 2\n"),
        doctest::Contains("same number"), ConfigError);
  }

  SUBCASE("shipped presets parse") {
    int seen = 0;
    for (const auto& entry : fs::directory_iterator(JCM_PRESET_DIR)) {
      if (entry.path().extension() != ".cfg") continue;
      ++seen;
      CHECK_NOTHROW(load_config(entry.path()));
    }
    CHECK(seen >= 14);
  }
}

TEST_CASE("evolve run emits the documented csv") {
  const fs::path dir = fresh_dir("evolve");
  const ExperimentConfig cfg = parse_config(tiny_evolve_config());
  const RunResult result = run(cfg, dir, 2);

  const std::string csv = slurp(dir / "timeseries.csv");
  CHECK(csv.rfind("t,delta,ddelta_dt,jz_over_J\n", 0) == 0);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);  // header
  std::getline(lines, line);
  CHECK(line.rfind("0,0", 0) == 0);  // t = 0, delta = 0 for a product state

  CHECK(result.summary.count("energy_quantum") == 1);
  CHECK(result.summary.count("elapsed_seconds") == 1);
  CHECK(fs::exists(dir / "summary.txt"));

  SUBCASE("run-level truncation check") {
    const fs::path checked = fresh_dir("evolve_checked");
    const RunResult guarded = run(
        parse_config(tiny_evolve_config("truncation_check = true\n")), checked, 1);
    CHECK(std::stod(guarded.summary.at("truncation_delta_shift")) < 1e-8);

    // n_max = 30 holds the initial state (tail ~1e-11) but not the dynamics
    const ExperimentConfig starved = parse_config(
        "kind = evolve\nJ = 4.5\nG = 0.5\nGprime = 0.2\nq_a = 0.0\n"
        "p_a = 2.261\np_f = 3.423276\nn_max = 30\ndt = 0.02\nt_max = 5.0\n"
        "truncation_check = true\n");
    CHECK_THROWS_AS(run(starved, fresh_dir("evolve_starved"), 1),
                    NumericError);
  }

  SUBCASE("byte-identical rerun") {
    const fs::path second = fresh_dir("evolve_rerun");
    run(cfg, second, 1);
    CHECK(slurp(dir / "timeseries.csv") == slurp(second / "timeseries.csv"));
  }
}

TEST_CASE("section run stays on shell") {
  const fs::path dir = fresh_dir("section");
  const ExperimentConfig cfg = parse_config(
      "kind = section\n"
      "J = 4.5\n"
      "G = 0.5\n"
      "Gprime = 0.2\n"
      "energy = 8.5\n"
      "q_a = 0.0\n"
      "p_a = 2.261\n"
      "n_crossings = 6\n");
  const RunResult result = run(cfg, dir, 1);
  CHECK(std::stod(result.summary.at("max_on_shell_deviation")) < 1e-6);
  CHECK(std::stod(result.summary.at("point_count")) == 6.0);

  const std::string csv = slurp(dir / "section.csv");
  CHECK(csv.rfind("ic_index,crossing,t_cross,q_a,p_a,p_f\n", 0) == 0);
}

TEST_CASE("orbit run reports the refinement") {
  const fs::path dir = fresh_dir("orbit");
  const ExperimentConfig cfg = parse_config(
      "kind = orbit\n"
      "J = 4.5\n"
      "G = 0.5\n"
      "Gprime = 0.2\n"
      "energy = 8.5\n"
      "q_a = 0.0\n"
      "p_a = 2.261\n"
      "sample_dt = 0.05\n");
  const RunResult result = run(cfg, dir, 1);
  CHECK(std::stod(result.summary.at("residual_1")) < 1e-8);
  CHECK(result.summary.at("stable_1") == "true");
  CHECK(fs::exists(dir / "orbit1.csv"));
  const std::string csv = slurp(dir / "orbit1.csv");
  CHECK(csv.rfind("t,q_a,p_a,q_f,p_f,r\n", 0) == 0);
}

TEST_CASE("husimi run writes one grid per snapshot") {
  const fs::path dir = fresh_dir("husimi");
  const ExperimentConfig cfg = parse_config(
      "kind = husimi\n"
      "J = 0.5\n"
      "G = 0.4\n"
      "q_a = 0.3\n"
      "p_a = 0.6\n"
      "p_f = 1.1\n"
      "n_max = 25\n"
      "resolution = 31\n"
      "snapshot_times = 0, 1.5\n");
  const RunResult result = run(cfg, dir, 1);
  CHECK(fs::exists(dir / "husimi_t0.txt"));
  CHECK(fs::exists(dir / "husimi_t1.5.txt"));
  CHECK(result.summary.count("participation_t0") == 1);

  const std::string grid = slurp(dir / "husimi_t0.txt");
  CHECK(grid.find("# q_a:") != std::string::npos);
  CHECK(grid.find("nan") != std::string::npos);  // off-disk corners
}

TEST_CASE("verify reports") {
  SUBCASE("healthy evolve run passes everything") {
    const ExperimentConfig cfg = parse_config(tiny_evolve_config());
    const VerifyReport report = verify(cfg, 2);
    for (const auto& check : report.checks)
      CHECK_MESSAGE(check.pass, check.name, ": ", check.measured);
    CHECK(report.all_pass());
  }

  SUBCASE("integrable runs pass the charge check") {
    // rotating-only conserves Jz + a+a, counter-rotating-only Jz - a+a
    for (const char* couplings : {"G = 0.4\nGprime = 0\n", "G = 0\nGprime = 0.4\n"}) {
      const ExperimentConfig cfg = parse_config(
          std::string("kind = evolve\n"
                      "J = 0.5\n") +
          couplings +
          "q_a = 0.3\n"
          "p_a = 0.6\n"
          "p_f = 1.1\n"
          "n_max = 25\n"
          "dt = 0.02\n"
          "t_max = 2.0\n");
      const VerifyReport report = verify(cfg, 1);
      bool found = false;
      for (const auto& check : report.checks) {
        if (check.name == "charge_conservation") {
          found = true;
          CHECK_MESSAGE(check.pass, couplings, check.measured);
          CHECK(check.measured.find("skipped") == std::string::npos);
        }
      }
      CHECK(found);
    }
  }

  SUBCASE("starved cutoff trips the truncation guard") {
    const ExperimentConfig cfg = parse_config(
        "kind = evolve\n"
        "J = 4.5\n"
        "G = 0.5\n"
        "Gprime = 0.2\n"
        "energy = 8.5\n"
        "q_a = 0.0\n"
        "p_a = 2.261\n"
        "n_max = 10\n"
        "dt = 0.02\n"
        "t_max = 1.0\n");
    const VerifyReport report = verify(cfg, 1);
    CHECK_FALSE(report.all_pass());
    for (const auto& check : report.checks)
      if (check.name == "truncation_doubling") CHECK_FALSE(check.pass);
  }
}
