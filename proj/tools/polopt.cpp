#include <CLI11.hpp>
#include <iostream>

#include "polopt/harness.hpp"
#include "polopt/verify.hpp"

using namespace polopt;

int main(int argc, char** argv) {
  CLI::App app{"Policy mirror descent and policy dual averaging experiments"};
  app.require_subcommand(1);

  std::string run_config, seeds, out_dir;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment config");
  run_cmd->add_option("config", run_config, "TOML or JSON config")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seeds", seeds, "Seeds, as a..b or a comma list");
  run_cmd->add_option("--out", out_dir, "Output directory");

  std::string grid_config, grid_out;
  auto* grid_cmd = app.add_subcommand("gridsearch", "Sweep the [grid] table of a config");
  grid_cmd->add_option("config", grid_config, "TOML or JSON config")->required()->check(CLI::ExistingFile);
  grid_cmd->add_option("--out", grid_out, "Output directory");

  std::string suite;
  auto* verify_cmd = app.add_subcommand("verify", "Run invariant checks");
  verify_cmd->add_option("suite", suite, "identities | rates | fa-errors | all")
      ->required()
      ->check(CLI::IsMember({"identities", "rates", "fa-errors", "all"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      RunConfig cfg = load_config(run_config);
      if (!seeds.empty()) cfg.seeds = parse_seeds(seeds);
      if (!out_dir.empty()) cfg.output = out_dir;
      RunSummary sum = run(cfg);
      std::cout << "wrote " << sum.seeds.size() << " seed file(s) and aggregate.csv to " << cfg.output << '\n';
      if (!sum.aggregate.empty()) {
        const AggregateRow& last = sum.aggregate.back();
        std::cout << "final iteration " << last.iteration << ": f_hat = " << format_number(last.mean[0]) << " ["
                  << format_number(last.lo[0]) << ", " << format_number(last.hi[0]) << "]\n";
      }
      return 0;
    }
    if (*grid_cmd) {
      RunConfig cfg = load_config(grid_config);
      if (!grid_out.empty()) cfg.output = grid_out;
      GridResult res = gridsearch(cfg);
      const GridPoint& best = res.table[res.best];
      std::cout << "best grid point " << best.values.dump() << " with final f_hat = " << format_number(best.final_f)
                << '\n';
      return 0;
    }
    if (*verify_cmd) return print_report(std::cout, verify(suite)) ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
