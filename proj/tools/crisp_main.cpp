#include <iostream>
#include <string>
#include <vector>

#include "crisp/experiments.hpp"

namespace {
void usage() {
  std::cerr <<
      "usage: crisp <experiment> [--config <path>] [--key value ...]\n"
      "experiments: bounds-vs-gamma f-sensitivity ci coverage model-select policy-learn\n"
      "common keys: data n seed out_dir gamma_grid budget_grid d_grid alpha reps\n"
      "env: CRISP_THREADS caps the worker pool\n";
}
}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty() || args[0] == "-h" || args[0] == "--help") {
    usage();
    return args.empty() ? 2 : 0;
  }
  crisp::ExperimentConfig cfg;
  cfg.experiment = args[0];
  try {
    for (size_t i = 1; i < args.size(); ++i) {
      if (args[i].rfind("--", 0) != 0 || i + 1 >= args.size()) {
        std::cerr << "bad argument: " << args[i] << "\n";
        usage();
        return 2;
      }
      std::string key = args[i].substr(2);
      std::string val = args[++i];
      if (key == "config") {
        crisp::ExperimentConfig file = crisp::load_config_file(val);
        if (!file.experiment.empty() && file.experiment != cfg.experiment) {
          std::cerr << "config experiment '" << file.experiment
                    << "' does not match '" << cfg.experiment << "'\n";
          return 2;
        }
        for (auto& [k, v] : file.kv) cfg.kv.emplace(k, v);  // flags win
      } else {
        cfg.kv[key] = val;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return crisp::run_experiment(std::move(cfg));
}
