// hfd: run a configured simulation and write CSV results.
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hfd/config.hpp"
#include "hfd/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Hierarchy-of-functional-derivatives open-system solver"};
  std::string config_path;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trajectories;
  std::optional<int> order;
  std::optional<std::string> out_dir;
  std::optional<unsigned> workers;
  bool quiet = false;
  bool dump_noise = false;

  app.add_option("--config", config_path, "configuration file");
  app.add_option("--mode", mode, "run mode")
      ->check(CLI::IsMember({"ou-hfd", "general-hfd", "sde-oracle", "hops-check", "exact3", "lindblad", "compare",
                             "counts"}));
  app.add_option("--seed", seed, "master seed");
  app.add_option("--trajectories", trajectories, "number of trajectories");
  app.add_option("--order", order, "truncation order");
  app.add_option("--out-dir", out_dir, "directory that receives the run folder");
  app.add_option("--workers", workers, "worker threads");
  app.add_flag("--quiet", quiet, "no progress counter");
  app.add_flag("--dump-noise", dump_noise, "also write the first trajectory's noise path");
  CLI11_PARSE(app, argc, argv);

  std::string text;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot read " << config_path << "\n";
      return 1;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  } else if (mode == "counts") {
    text = "[run]\nmode = counts\n";
  } else {
    std::cerr << "error: --config is required for mode '" << (mode.empty() ? "ou-hfd" : mode) << "'\n";
    return 1;
  }
  if (!mode.empty()) text += "\n[run]\nmode = " + mode + "\n";
  if (order) text += "\n[run]\norder = " + std::to_string(*order) + "\n";
  if (seed) text += "\n[run]\nseed = " + std::to_string(*seed) + "\n";
  if (trajectories) text += "\n[run]\ntrajectories = " + std::to_string(*trajectories) + "\n";
  if (workers) text += "\n[run]\nworkers = " + std::to_string(*workers) + "\n";
  if (out_dir) text += "\n[run]\nout_dir = " + *out_dir + "\n";

  hfd::RunConfig cfg;
  try {
    cfg = hfd::parse_config(text);
  } catch (const hfd::ConfigError& e) {
    std::cerr << "configuration error" << (config_path.empty() ? "" : " in " + config_path) << ":\n" << e.what() << "\n";
    return 1;
  }

  hfd::RunnerOptions ro;
  ro.progress = !quiet;
  ro.dump_noise = dump_noise;
  for (int i = 0; i < argc; ++i) ro.command_line += (i ? " " : "") + std::string(argv[i]);
  return hfd::run(cfg, std::cout, std::cerr, ro).status;
}
