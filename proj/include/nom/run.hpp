#pragma once

// Command implementations behind the CLI. Exit codes: 0 ok, 1 error,
// 2 rollout divergence.

#include <string>

#include "nom/config.hpp"

namespace nom {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitDivergence = 2;

GridSpec grid_from_series(const FieldSeries& series);
MultiScaleGraph build_run_graph(const RunConfig& cfg, const FieldSeries& series);

// Normalization statistics consistent with the run's climatology setting:
// file stats when subtracting (they were computed on anomalies), raw-space
// stats recomputed from the train split otherwise.
NormStats stats_for_run(const RunConfig& cfg, const FieldSeries& train_phys);

int cmd_gen_data(const RunConfig& cfg, bool force);
int cmd_train(const RunConfig& cfg, bool resume);
int cmd_rollout(const RunConfig& cfg, int init_index, int horizon, const std::string& out_path);
int cmd_evaluate(const RunConfig& cfg, const std::string& out_path);

struct PlotSpec {
  std::string input;
  std::string variable;
  int record = 0;
  double vmin = 0.0, vmax = 0.0;  // equal -> auto range
  std::string out_image;
  std::string out_csv;  // optional raw dump
};
int cmd_plot(const RunConfig& cfg, const PlotSpec& spec);

int cmd_inspect_graph(const RunConfig& cfg, const std::string& dump_path);

// Composite physical-space trajectory from a rollout in model space; record k
// holds the step-(k+1) prediction stamped with the matching test day.
FieldSeries trajectory_to_physical(const FieldSeries& test_model, const FieldSeries& test_phys,
                                   const ClimatologyTable& clim, const NormStats& stats,
                                   bool subtract_climatology, size_t init_index,
                                   const std::vector<DenseArray>& states);

}  // namespace nom
