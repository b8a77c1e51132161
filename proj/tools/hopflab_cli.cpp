#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hopflab/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "hopflab: exit-time functionals, principal eigenpairs and lower-bound "
      "verification for killed diffusions with jumps"};
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out_dir, format;
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--seed", seed, "override numeric.seed");
  app.add_option("--workers", workers, "override numeric.workers");
  app.add_option("--out", out_dir, "override output.directory");
  app.add_option("--format", format, "summary formats: json, csv or both");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Collapse the library's exit-code zoo: help is success, the rest is a
    // usage error.
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    hopflab::RunConfig cfg = hopflab::load_config(config_path);
    hopflab::RunOverrides ov;
    ov.seed = seed;
    ov.workers = workers;
    ov.out_dir = out_dir;
    ov.format = format;
    const hopflab::RunOutcome outcome = hopflab::execute(std::move(cfg), ov);
    for (const auto& line : outcome.lines) std::cout << line << "\n";
    std::cout << "artifacts: " << outcome.out_dir.string() << "\n";
    return static_cast<int>(outcome.status);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
