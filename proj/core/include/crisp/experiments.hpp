#pragma once
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace crisp {

/// Flat key=value experiment configuration; command-line pairs override file
/// entries.
struct ExperimentConfig {
  std::string experiment;
  std::map<std::string, std::string> kv;

  std::string get(const std::string& key, const std::string& dflt = "") const;
  double get_num(const std::string& key, double dflt) const;
  long get_int(const std::string& key, long dflt) const;
  std::vector<double> get_grid(const std::string& key, const std::string& dflt) const;
};

ExperimentConfig load_config_file(const std::string& path);

/// Runs one experiment, writing results.csv (+ per-experiment summary CSV and
/// an SVG chart) into the configured output directory.
/// Exit codes: 0 success, 1 solver failures with partial results, 2 bad config.
int run_experiment(ExperimentConfig cfg);

/// Minimal hand-emitted SVG line chart.
struct ChartSeries {
  std::string name;
  std::vector<double> x, y;
};
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel,
                     const std::vector<ChartSeries>& series);

/// Worker pool over [0, n_tasks); honors the CRISP_THREADS env var.
void parallel_for(long n_tasks, const std::function<void(long)>& fn);

}  // namespace crisp
