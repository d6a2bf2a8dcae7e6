#pragma once

// Gridded field sequences and the NOMF on-disk format: magic "NOMF",
// version u32, header {n_lat, n_lon, n_channels, n_records as u32; channel
// names as (u32 length, bytes); land mask as n_lat*n_lon bytes}, then per
// record {day_index u32, float32 payload, channel-major row-major}.

#include <cstdint>
#include <string>
#include <vector>

#include "nom/array.hpp"

namespace nom {

inline constexpr uint32_t kFieldFileVersion = 1;

// Canonical channel layout: prognostic block first, then forcing block.
const std::vector<std::string>& prognostic_channels();  // tracer_a0..2, u_vel, v_vel, height
const std::vector<std::string>& forcing_channels();     // wind_u, wind_v, air_temp, pressure
const std::vector<std::string>& periodic_channels();    // climatology-subtracted subset
std::vector<std::string> all_channels();

struct FieldSeries {
  int n_lat = 0;
  int n_lon = 0;
  std::vector<std::string> channels;
  std::vector<uint8_t> land;  // 1 = land
  std::vector<int32_t> day_index;
  std::vector<std::vector<float>> records;  // each [n_channels * n_lat * n_lon]

  int64_t cells() const { return static_cast<int64_t>(n_lat) * n_lon; }
  int64_t n_channels() const { return static_cast<int64_t>(channels.size()); }
  size_t n_records() const { return records.size(); }

  float* field(size_t rec, int64_t ch) { return records[rec].data() + ch * cells(); }
  const float* field(size_t rec, int64_t ch) const { return records[rec].data() + ch * cells(); }

  int64_t channel_index(const std::string& name) const;  // throws if absent
  bool has_channel(const std::string& name) const;

  FieldSeries slice(size_t first, size_t count) const;
};

void write_fields(const FieldSeries& series, const std::string& path);
FieldSeries read_fields(const std::string& path);

}  // namespace nom
