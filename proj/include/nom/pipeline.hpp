#pragma once

// Preprocessing pipeline, fixed order: climatology subtraction on periodic
// channels -> per-channel normalization -> land zero-fill. Outputs invert the
// steps in exact reverse. Statistics always come from the training split.

#include <string>

#include "nom/array.hpp"
#include "nom/field.hpp"

namespace nom {

struct ClimatologyTable {
  int cycle = 0;
  int n_lat = 0, n_lon = 0;
  std::vector<std::string> channels;
  std::vector<std::vector<float>> day_mean;  // [cycle][channels * cells]

  int64_t cells() const { return static_cast<int64_t>(n_lat) * n_lon; }
  const float* mean_field(int day_of_cycle, int64_t channel) const {
    return day_mean[static_cast<size_t>(day_of_cycle)].data() + channel * cells();
  }
  bool empty() const { return channels.empty(); }
};

struct NormStats {
  std::vector<std::string> channels;
  std::vector<double> mean;
  std::vector<double> stdev;
};

// Per (day-of-cycle, channel, cell) mean over the training records.
ClimatologyTable compute_climatology(const FieldSeries& train, int cycle,
                                     const std::vector<std::string>& channels);

// Subtract/re-add the climatology on the given channel subset (default: the
// table's full channel list). Day index taken modulo the cycle.
void to_anomaly(FieldSeries& series, const ClimatologyTable& clim,
                const std::vector<std::string>* subset = nullptr);
void from_anomaly(FieldSeries& series, const ClimatologyTable& clim,
                  const std::vector<std::string>* subset = nullptr);
void to_anomaly_record(std::vector<float>& rec, int day, const FieldSeries& layout,
                       const ClimatologyTable& clim, const std::vector<std::string>* subset);
void from_anomaly_record(std::vector<float>& rec, int day, const FieldSeries& layout,
                         const ClimatologyTable& clim, const std::vector<std::string>* subset);

// Ocean-cell statistics; throws if any channel has zero spread.
NormStats compute_norm_stats(const FieldSeries& series);

void normalize(FieldSeries& series, const NormStats& stats);
void denormalize(FieldSeries& series, const NormStats& stats);
void normalize_record(std::vector<float>& rec, const FieldSeries& layout, const NormStats& stats);
void denormalize_record(std::vector<float>& rec, const FieldSeries& layout, const NormStats& stats);

void fill_land(FieldSeries& series);

void save_climatology(const ClimatologyTable& clim, const std::string& path);
ClimatologyTable load_climatology(const std::string& path);
void save_norm_stats(const NormStats& stats, const std::string& path);
NormStats load_norm_stats(const std::string& path);

// Full forward pipeline applied in place (subset = channels subtracted).
void prepare_model_space(FieldSeries& series, const ClimatologyTable& clim, const NormStats& stats,
                         bool subtract_climatology);

// Model-facing matrices: one row per grid cell.
DenseArray prognostic_matrix(const FieldSeries& series, size_t rec);
DenseArray forcing_matrix(const FieldSeries& series, size_t rec);
// Writes a [cells x n_prognostic] matrix back into a record's prognostic block.
void store_prognostic(std::vector<float>& rec, const FieldSeries& layout, const DenseArray& m);

}  // namespace nom
