#include "nom/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "nom/binio.hpp"

namespace nom {

ClimatologyTable compute_climatology(const FieldSeries& train, int cycle,
                                     const std::vector<std::string>& channels) {
  if (cycle < 1) throw std::runtime_error("climatology: cycle must be positive");
  if (train.n_records() < 2 * static_cast<size_t>(cycle))
    throw std::runtime_error("climatology: training sequence must span at least two cycles");
  ClimatologyTable clim;
  clim.cycle = cycle;
  clim.n_lat = train.n_lat;
  clim.n_lon = train.n_lon;
  clim.channels = channels;
  const int64_t cells = train.cells();
  const size_t width = channels.size() * static_cast<size_t>(cells);
  std::vector<std::vector<double>> acc(static_cast<size_t>(cycle), std::vector<double>(width, 0.0));
  std::vector<int64_t> counts(static_cast<size_t>(cycle), 0);
  std::vector<int64_t> ch_idx;
  for (const auto& name : channels) ch_idx.push_back(train.channel_index(name));
  for (size_t r = 0; r < train.n_records(); ++r) {
    const int d = ((train.day_index[r] % cycle) + cycle) % cycle;
    counts[static_cast<size_t>(d)]++;
    auto& a = acc[static_cast<size_t>(d)];
    for (size_t c = 0; c < ch_idx.size(); ++c) {
      const float* f = train.field(r, ch_idx[c]);
      double* dst = a.data() + c * static_cast<size_t>(cells);
      for (int64_t i = 0; i < cells; ++i) dst[i] += static_cast<double>(f[i]);
    }
  }
  for (int d = 0; d < cycle; ++d) {
    if (counts[static_cast<size_t>(d)] == 0)
      throw std::runtime_error("climatology: no training samples for day-of-cycle " +
                               std::to_string(d));
    std::vector<float> mean(width);
    for (size_t i = 0; i < width; ++i)
      mean[i] = static_cast<float>(acc[static_cast<size_t>(d)][i] /
                                   static_cast<double>(counts[static_cast<size_t>(d)]));
    clim.day_mean.push_back(std::move(mean));
  }
  return clim;
}

namespace {

void shift_record(std::vector<float>& rec, int day, const FieldSeries& layout,
                  const ClimatologyTable& clim, const std::vector<std::string>* subset,
                  double sign) {
  if (clim.empty()) return;
  const int64_t cells = layout.cells();
  const int d = ((day % clim.cycle) + clim.cycle) % clim.cycle;
  const auto& names = subset ? *subset : clim.channels;
  for (const auto& name : names) {
    int64_t clim_ch = -1;
    for (size_t c = 0; c < clim.channels.size(); ++c)
      if (clim.channels[c] == name) clim_ch = static_cast<int64_t>(c);
    if (clim_ch < 0) throw std::runtime_error("climatology table lacks channel " + name);
    const float* mean = clim.mean_field(d, clim_ch);
    float* f = rec.data() + layout.channel_index(name) * cells;
    for (int64_t i = 0; i < cells; ++i)
      f[i] = static_cast<float>(static_cast<double>(f[i]) + sign * static_cast<double>(mean[i]));
  }
}

}  // namespace

void to_anomaly_record(std::vector<float>& rec, int day, const FieldSeries& layout,
                       const ClimatologyTable& clim, const std::vector<std::string>* subset) {
  shift_record(rec, day, layout, clim, subset, -1.0);
}

void from_anomaly_record(std::vector<float>& rec, int day, const FieldSeries& layout,
                         const ClimatologyTable& clim, const std::vector<std::string>* subset) {
  shift_record(rec, day, layout, clim, subset, +1.0);
}

void to_anomaly(FieldSeries& series, const ClimatologyTable& clim,
                const std::vector<std::string>* subset) {
  for (size_t r = 0; r < series.n_records(); ++r)
    to_anomaly_record(series.records[r], series.day_index[r], series, clim, subset);
}

void from_anomaly(FieldSeries& series, const ClimatologyTable& clim,
                  const std::vector<std::string>* subset) {
  for (size_t r = 0; r < series.n_records(); ++r)
    from_anomaly_record(series.records[r], series.day_index[r], series, clim, subset);
}

NormStats compute_norm_stats(const FieldSeries& series) {
  NormStats st;
  st.channels = series.channels;
  const int64_t cells = series.cells();
  int64_t ocean = 0;
  for (int64_t i = 0; i < cells; ++i)
    if (!series.land[static_cast<size_t>(i)]) ocean++;
  if (ocean == 0) throw std::runtime_error("norm stats: all cells are land");
  const double n = static_cast<double>(ocean) * static_cast<double>(series.n_records());
  for (int64_t c = 0; c < series.n_channels(); ++c) {
    double sum = 0.0;
    for (size_t r = 0; r < series.n_records(); ++r) {
      const float* f = series.field(r, c);
      for (int64_t i = 0; i < cells; ++i)
        if (!series.land[static_cast<size_t>(i)]) sum += static_cast<double>(f[i]);
    }
    const double mean = sum / n;
    double var = 0.0;
    for (size_t r = 0; r < series.n_records(); ++r) {
      const float* f = series.field(r, c);
      for (int64_t i = 0; i < cells; ++i)
        if (!series.land[static_cast<size_t>(i)]) {
          const double d = static_cast<double>(f[i]) - mean;
          var += d * d;
        }
    }
    const double stdev = std::sqrt(var / n);
    if (stdev == 0.0)
      throw std::runtime_error("norm stats: channel " + series.channels[static_cast<size_t>(c)] +
                               " has zero spread over ocean cells");
    // round through float so normalizing a field that equals the stored mean
    // yields exact zeros
    st.mean.push_back(static_cast<double>(static_cast<float>(mean)));
    st.stdev.push_back(static_cast<double>(static_cast<float>(stdev)));
  }
  return st;
}

namespace {

void scale_record(std::vector<float>& rec, const FieldSeries& layout, const NormStats& stats,
                  bool forward) {
  const int64_t cells = layout.cells();
  for (size_t c = 0; c < stats.channels.size(); ++c) {
    const int64_t ch = layout.channel_index(stats.channels[c]);
    float* f = rec.data() + ch * cells;
    const double mu = stats.mean[c], sd = stats.stdev[c];
    if (forward)
      for (int64_t i = 0; i < cells; ++i)
        f[i] = static_cast<float>((static_cast<double>(f[i]) - mu) / sd);
    else
      for (int64_t i = 0; i < cells; ++i)
        f[i] = static_cast<float>(static_cast<double>(f[i]) * sd + mu);
  }
}

}  // namespace

void normalize_record(std::vector<float>& rec, const FieldSeries& layout, const NormStats& stats) {
  scale_record(rec, layout, stats, true);
}
void denormalize_record(std::vector<float>& rec, const FieldSeries& layout,
                        const NormStats& stats) {
  scale_record(rec, layout, stats, false);
}

void normalize(FieldSeries& series, const NormStats& stats) {
  for (auto& rec : series.records) normalize_record(rec, series, stats);
}
void denormalize(FieldSeries& series, const NormStats& stats) {
  for (auto& rec : series.records) denormalize_record(rec, series, stats);
}

void fill_land(FieldSeries& series) {
  const int64_t cells = series.cells();
  for (auto& rec : series.records)
    for (int64_t c = 0; c < series.n_channels(); ++c) {
      float* f = rec.data() + c * cells;
      for (int64_t i = 0; i < cells; ++i)
        if (series.land[static_cast<size_t>(i)]) f[i] = 0.0f;
    }
}

void prepare_model_space(FieldSeries& series, const ClimatologyTable& clim, const NormStats& stats,
                         bool subtract_climatology) {
  if (subtract_climatology) {
    const auto& subset = periodic_channels();
    to_anomaly(series, clim, &subset);
  }
  normalize(series, stats);
  fill_land(series);
}

// ---------------------------------------------------------------------------

void save_climatology(const ClimatologyTable& clim, const std::string& path) {
  FieldSeries s;
  s.n_lat = clim.n_lat;
  s.n_lon = clim.n_lon;
  s.channels = clim.channels;
  s.land.assign(static_cast<size_t>(clim.cells()), 0);
  for (int d = 0; d < clim.cycle; ++d) {
    s.day_index.push_back(d);
    s.records.push_back(clim.day_mean[static_cast<size_t>(d)]);
  }
  write_fields(s, path);
}

ClimatologyTable load_climatology(const std::string& path) {
  FieldSeries s = read_fields(path);
  ClimatologyTable clim;
  clim.cycle = static_cast<int>(s.n_records());
  clim.n_lat = s.n_lat;
  clim.n_lon = s.n_lon;
  clim.channels = s.channels;
  for (size_t d = 0; d < s.n_records(); ++d) clim.day_mean.push_back(s.records[d]);
  return clim;
}

void save_norm_stats(const NormStats& stats, const std::string& path) {
  std::string text = "channel,mean,std\n";
  char buf[160];
  for (size_t c = 0; c < stats.channels.size(); ++c) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g\n", stats.channels[c].c_str(), stats.mean[c],
                  stats.stdev[c]);
    text += buf;
  }
  write_file_atomic(path, std::vector<uint8_t>(text.begin(), text.end()));
}

NormStats load_norm_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  NormStats st;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw std::runtime_error(path + ": malformed stats line: " + line);
    st.channels.push_back(line.substr(0, c1));
    st.mean.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
    st.stdev.push_back(std::stod(line.substr(c2 + 1)));
  }
  return st;
}

// ---------------------------------------------------------------------------

DenseArray prognostic_matrix(const FieldSeries& series, size_t rec) {
  const auto& names = prognostic_channels();
  const int64_t cells = series.cells();
  DenseArray m = DenseArray::zeros({cells, static_cast<int64_t>(names.size())});
  for (size_t c = 0; c < names.size(); ++c) {
    const float* f = series.field(rec, series.channel_index(names[c]));
    for (int64_t i = 0; i < cells; ++i) m.at(i, static_cast<int64_t>(c)) = f[i];
  }
  return m;
}

DenseArray forcing_matrix(const FieldSeries& series, size_t rec) {
  const auto& names = forcing_channels();
  const int64_t cells = series.cells();
  DenseArray m = DenseArray::zeros({cells, static_cast<int64_t>(names.size())});
  for (size_t c = 0; c < names.size(); ++c) {
    const float* f = series.field(rec, series.channel_index(names[c]));
    for (int64_t i = 0; i < cells; ++i) m.at(i, static_cast<int64_t>(c)) = f[i];
  }
  return m;
}

void store_prognostic(std::vector<float>& rec, const FieldSeries& layout, const DenseArray& m) {
  const auto& names = prognostic_channels();
  const int64_t cells = layout.cells();
  if (m.rows() != cells || m.cols() != static_cast<int64_t>(names.size()))
    throw ShapeError("store_prognostic: matrix " + m.shape_str());
  for (size_t c = 0; c < names.size(); ++c) {
    float* f = rec.data() + layout.channel_index(names[c]) * cells;
    for (int64_t i = 0; i < cells; ++i) f[i] = m.at(i, static_cast<int64_t>(c));
  }
}

}  // namespace nom
