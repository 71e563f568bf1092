// dirlab: run experiments from JSON configs and compare run directories.
//
// exit status: 0 ok, 1 hard audit failure / compare over tolerance,
//              2 invalid config or schema mismatch, 3 numerical failure

#include <omp.h>

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "dirlab/experiment.hpp"

namespace {

int cmd_run(const std::string& config, const std::optional<std::uint64_t>& seed, int workers,
            const std::string& out) {
  dirlab::ExperimentConfig cfg = dirlab::parse_config_file(config);
  if (seed) cfg.seed = *seed;
  if (!out.empty()) cfg.output_dir = out;
  if (cfg.output_dir.empty()) throw dirlab::ConfigError("config: output_dir: not set and no --out given");
  if (workers > 0) omp_set_num_threads(workers);
  const dirlab::RunResult r = dirlab::run_experiment(cfg);
  dirlab::write_outputs(r, cfg.output_dir);
  for (const auto& a : r.audits)
    std::printf("%-8s %-34s %s%s\n", a.status.c_str(), a.name.c_str(), a.hard ? "[hard] " : "[soft] ",
                a.detail.c_str());
  std::printf("wrote %s\n", cfg.output_dir.c_str());
  return r.hard_pass() ? 0 : 1;
}

int cmd_compare(const std::string& a, const std::string& b, double tol) {
  const dirlab::CompareResult c = dirlab::compare_runs(a, b, tol);
  std::printf("kind %s tolerance %g\n", c.kind.c_str(), c.tolerance);
  for (const auto& d : c.diffs)
    std::printf("%s row %zu column %s: %.17g vs %.17g (rel %.3g)\n", d.exceeds ? "EXCEEDS" : "ok     ", d.row + 1,
                d.column.c_str(), d.a, d.b, d.relative);
  std::printf("%zu differing cells, %s\n", c.diffs.size(), c.within ? "within tolerance" : "over tolerance");
  return c.within ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dirichlet spectra, small deviations and scaling experiments"};
  app.require_subcommand(1);

  std::string config, out;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  auto* run = app.add_subcommand("run", "run one experiment");
  run->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--workers", workers, "OpenMP threads (outputs do not depend on it)")->check(CLI::NonNegativeNumber);
  run->add_option("--out", out, "output directory (overrides output_dir)");

  std::string dir_a, dir_b;
  double tol = -1.0;
  auto* cmp = app.add_subcommand("compare", "compare two run directories");
  cmp->add_option("run_a", dir_a)->required();
  cmp->add_option("run_b", dir_b)->required();
  cmp->add_option("--tol", tol, "relative tolerance (default per kind)");

  auto* kinds = app.add_subcommand("list-kinds", "print the experiment kinds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(config, seed, workers, out);
    if (*cmp) return cmd_compare(dir_a, dir_b, tol);
    if (*kinds) {
      for (const auto& k : dirlab::experiment_kinds()) std::cout << k << '\n';
      return 0;
    }
  } catch (const dirlab::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed run directory: " << e.what() << '\n';
    return 2;
  } catch (const dirlab::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const dirlab::Unsupported& e) {
    std::cerr << "unsupported: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
