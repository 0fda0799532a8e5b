#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "jcm/errors.hpp"
#include "jcm/experiment.hpp"

namespace {

struct CliOptions {
  std::string config;
  std::string out_dir;
  int threads = 1;
  bool verify_after = false;
};

std::string default_out_dir() {
  if (const char* env = std::getenv("JCM_OUT_DIR"); env && *env) return env;
  return ".";
}

void add_common(CLI::App* cmd, CliOptions& opts, bool with_run_flags) {
  cmd->add_option("--config", opts.config, "experiment config file")
      ->required();
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--threads", opts.threads, "worker threads for one run")
      ->check(CLI::PositiveNumber);
  if (with_run_flags)
    cmd->add_flag("--verify", opts.verify_after,
                  "run the invariant suite after the run");
}

int print_verify(const jcm::VerifyReport& report,
                 const std::filesystem::path& out_dir) {
  std::string text;
  for (const auto& check : report.checks) {
    text += "CHECK " + check.name + ": " + (check.pass ? "PASS" : "FAIL") +
            " (" + check.measured + ")\n";
  }
  std::cout << text;
  std::filesystem::create_directories(out_dir);
  std::ofstream(out_dir / "verify.txt") << text;
  return report.all_pass() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  // Determinism of emitted CSV bytes relies on a serial LAPACK backend.
  setenv("OPENBLAS_NUM_THREADS", "1", 0);

  CLI::App app{"N-atom spin-boson simulator: quantum entanglement dynamics "
               "and the classical limit"};
  app.require_subcommand(1);

  CliOptions opts;
  opts.out_dir = default_out_dir();
  const char* run_kinds[] = {"section", "orbit", "evolve", "husimi"};
  for (const char* kind : run_kinds)
    add_common(app.add_subcommand(kind, std::string("run a ") + kind +
                                            " experiment"),
               opts, true);
  add_common(app.add_subcommand("verify",
                                "run every applicable invariant check"),
             opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  const std::string subcommand = app.get_subcommands().front()->get_name();
  try {
    const jcm::ExperimentConfig config = jcm::load_config(opts.config);
    if (subcommand == "verify")
      return print_verify(jcm::verify(config, opts.threads), opts.out_dir);

    if (subcommand != jcm::to_string(config.kind))
      throw jcm::ConfigError("config kind '" +
                             std::string(jcm::to_string(config.kind)) +
                             "' does not match subcommand '" + subcommand + "'");
    const jcm::RunResult result =
        jcm::run(config, opts.out_dir, opts.threads);
    for (const auto& [key, value] : result.summary)
      std::cout << key << " = " << value << "\n";
    if (opts.verify_after)
      return print_verify(jcm::verify(config, opts.threads), opts.out_dir);
    return 0;
  } catch (const jcm::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 1;
  } catch (const jcm::NumericError& err) {
    std::cerr << "numeric failure: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
}
