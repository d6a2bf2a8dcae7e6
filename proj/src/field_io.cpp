#include "nom/field.hpp"

#include <algorithm>

#include "nom/binio.hpp"

namespace nom {

const std::vector<std::string>& prognostic_channels() {
  static const std::vector<std::string> v{"tracer_a0", "tracer_a1", "tracer_a2",
                                          "u_vel",     "v_vel",     "height"};
  return v;
}

const std::vector<std::string>& forcing_channels() {
  static const std::vector<std::string> v{"wind_u", "wind_v", "air_temp", "pressure"};
  return v;
}

const std::vector<std::string>& periodic_channels() {
  static const std::vector<std::string> v{"tracer_a0", "tracer_a1", "tracer_a2", "height"};
  return v;
}

std::vector<std::string> all_channels() {
  std::vector<std::string> v = prognostic_channels();
  const auto& f = forcing_channels();
  v.insert(v.end(), f.begin(), f.end());
  return v;
}

int64_t FieldSeries::channel_index(const std::string& name) const {
  auto it = std::find(channels.begin(), channels.end(), name);
  if (it == channels.end()) throw std::runtime_error("unknown channel " + name);
  return it - channels.begin();
}

bool FieldSeries::has_channel(const std::string& name) const {
  return std::find(channels.begin(), channels.end(), name) != channels.end();
}

FieldSeries FieldSeries::slice(size_t first, size_t count) const {
  if (first + count > records.size()) throw std::runtime_error("slice out of range");
  FieldSeries out;
  out.n_lat = n_lat;
  out.n_lon = n_lon;
  out.channels = channels;
  out.land = land;
  out.day_index.assign(day_index.begin() + static_cast<int64_t>(first),
                       day_index.begin() + static_cast<int64_t>(first + count));
  out.records.assign(records.begin() + static_cast<int64_t>(first),
                     records.begin() + static_cast<int64_t>(first + count));
  return out;
}

void write_fields(const FieldSeries& series, const std::string& path) {
  const size_t cells = static_cast<size_t>(series.cells());
  if (series.land.size() != cells) throw std::runtime_error("write_fields: land mask size mismatch");
  ByteWriter w;
  w.magic("NOMF");
  w.u32(kFieldFileVersion);
  w.u32(static_cast<uint32_t>(series.n_lat));
  w.u32(static_cast<uint32_t>(series.n_lon));
  w.u32(static_cast<uint32_t>(series.channels.size()));
  w.u32(static_cast<uint32_t>(series.records.size()));
  for (const auto& name : series.channels) {
    w.u32(static_cast<uint32_t>(name.size()));
    w.str(name);
  }
  w.bytes(series.land.data(), series.land.size());
  const size_t payload = cells * series.channels.size();
  for (size_t r = 0; r < series.records.size(); ++r) {
    if (series.records[r].size() != payload)
      throw std::runtime_error("write_fields: record " + std::to_string(r) + " payload size mismatch");
    w.u32(static_cast<uint32_t>(series.day_index[r]));
    w.floats(series.records[r].data(), payload);
  }
  write_file_atomic(path, w.buffer());
}

FieldSeries read_fields(const std::string& path) {
  ByteReader r(read_file(path));
  r.expect_magic("NOMF");
  const uint32_t version = r.u32();
  if (version != kFieldFileVersion)
    throw ParseError("unsupported field file version " + std::to_string(version), r.offset() - 4);
  FieldSeries s;
  s.n_lat = static_cast<int>(r.u32());
  s.n_lon = static_cast<int>(r.u32());
  const uint32_t n_channels = r.u32();
  const uint32_t n_records = r.u32();
  for (uint32_t c = 0; c < n_channels; ++c) {
    const uint32_t len = r.u32();
    s.channels.push_back(r.str(len));
  }
  const size_t cells = static_cast<size_t>(s.n_lat) * static_cast<size_t>(s.n_lon);
  s.land.resize(cells);
  r.bytes(s.land.data(), cells);
  const size_t payload = cells * n_channels;
  for (uint32_t rec = 0; rec < n_records; ++rec) {
    s.day_index.push_back(static_cast<int32_t>(r.u32()));
    std::vector<float> values(payload);
    r.floats(values.data(), payload);
    s.records.push_back(std::move(values));
  }
  if (!r.at_end()) throw ParseError("trailing bytes after last record", r.offset());
  return s;
}

}  // namespace nom
