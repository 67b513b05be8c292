#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "simgap/error.hpp"
#include "simgap/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"simgap: stochastic simulation-gap pipeline"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::optional<std::uint64_t> seed;

  using Stage = int (*)(const simgap::PipelineConfig&, std::ostream&);
  const std::pair<const char*, Stage> stages[] = {
      {"collect", simgap::stage_collect},
      {"estimate", simgap::stage_estimate},
      {"fit-gap", simgap::stage_fit_gap},
      {"synthesize", simgap::stage_synthesize},
      {"validate", simgap::stage_validate},
      {"run-all", simgap::stage_run_all},
  };
  const char* help[] = {
      "sample nominal and simulator successors over the cover",
      "variance bounds and Lipschitz constants",
      "solve the scenario programs and assemble the gap function",
      "build the abstraction and synthesize a controller",
      "gap coverage and closed-loop Monte Carlo validation",
      "all stages in order",
  };
  Stage chosen = nullptr;
  for (std::size_t i = 0; i < std::size(stages); ++i) {
    auto* sub = app.add_subcommand(stages[i].first, help[i]);
    sub->add_option("config", config_path, "pipeline configuration (JSON)")->required();
    sub->add_option("--seed", seed, "override the master seed");
    sub->callback([&chosen, s = stages[i].second] { chosen = s; });
  }
  CLI11_PARSE(app, argc, argv);

  try {
    simgap::PipelineConfig cfg = simgap::load_config(config_path);
    simgap::apply_environment(cfg);
    if (seed) cfg.master_seed = *seed;
    return chosen(cfg, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return simgap::kExitError;
}
