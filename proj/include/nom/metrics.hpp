#pragma once

// Forecast verification: latitude-weighted RMSE and anomaly correlation over
// ocean cells, plus contingency-table skill scores (CSI, SEDI) for extreme
// events, aggregated over initial conditions.

#include <optional>
#include <string>
#include <vector>

#include "nom/graph.hpp"
#include "nom/pipeline.hpp"
#include "nom/stack.hpp"

namespace nom {

struct MetricError : std::runtime_error {
  explicit MetricError(const std::string& msg) : std::runtime_error(msg) {}
};

// L(i) = n_lat * cos(phi_i) / sum(cos(phi)); mean over latitudes is 1.
std::vector<double> lat_weights(const GridSpec& grid);

// Latitude-weighted RMS over unmasked cells (mask true = evaluate).
double weighted_rmse(const float* pred, const float* truth, const std::vector<double>& weights,
                     const std::vector<uint8_t>& evaluate, int n_lat, int n_lon);

// Weighted correlation of anomalies; throws on zero anomaly variance.
double weighted_acc(const float* pred_anom, const float* truth_anom,
                    const std::vector<double>& weights, const std::vector<uint8_t>& evaluate,
                    int n_lat, int n_lon);

struct Contingency {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

Contingency count_events(const float* pred, const float* truth, const float* threshold,
                         const std::vector<uint8_t>& evaluate, int64_t cells);

// TP / (TP + FP + FN); absent when the denominator is zero.
std::optional<double> csi(const Contingency& c);

// Symmetric extremal dependence index with H = TP/(TP+FN) and, matching the
// source formulation, F = FP/(FP+TP); the conventional F = FP/(FP+TN) sits
// behind a flag. Absent when H or F is not strictly inside (0,1).
std::optional<double> sedi(const Contingency& c, bool conventional_far = false);

// Per-cell q-quantile (order statistic, rank ceil(q*n)) of the training
// distribution; samples laid out [n_samples][cells].
std::vector<float> extreme_threshold(const std::vector<const float*>& samples, int64_t cells,
                                     double q);

struct MetricRow {
  std::string variable;
  int lead = 0;
  double rmse = 0.0;
  std::optional<double> acc;
  std::optional<double> csi;
  std::optional<double> sedi;
  int n_ics = 0;
  int n_undefined = 0;  // undefined acc/csi/sedi occurrences excluded from means
};

struct MetricReport {
  std::vector<MetricRow> rows;
  int diverged_ics = 0;
};

std::string report_to_csv(const MetricReport& report);

struct EvalConfig {
  std::vector<int> leads{5, 10};
  int n_ics = 4;
  double quantile = 0.95;
  bool conventional_far = false;
  bool subtract_climatology = true;  // matches the training-time setting
};

// Rolls out from n_ics consecutive daily initial conditions in the test
// split, scores in physical space (denormalized, climatology restored) at
// each lead. Derived variable current_speed = sqrt(u^2 + v^2) is scored
// alongside the prognostic channels. Diverged rollouts are recorded, not
// fatal.
MetricReport evaluate_rollouts(const ModelStack& stack, const MultiScaleGraph& graph,
                               const FieldSeries& test_phys, const FieldSeries& train_phys,
                               const ClimatologyTable& clim, const NormStats& stats,
                               const EvalConfig& cfg);

}  // namespace nom
