#include "nom/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <map>

#include "nom/binio.hpp"

namespace nom {

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::string& path, const std::vector<uint8_t>& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

namespace {

void write_record(ByteWriter& w, const std::string& name, const DenseArray& a) {
  w.u32(static_cast<uint32_t>(name.size()));
  w.str(name);
  w.u32(static_cast<uint32_t>(a.shape.size()));
  for (int64_t e : a.shape) w.u32(static_cast<uint32_t>(e));
  w.floats(a.data.data(), a.data.size());
}

struct Record {
  std::vector<int64_t> shape;
  std::vector<float> data;
};

std::map<std::string, Record> read_records(ByteReader& r) {
  std::map<std::string, Record> records;
  while (!r.at_end()) {
    const uint32_t name_len = r.u32();
    const std::string name = r.str(name_len);
    const uint32_t rank = r.u32();
    Record rec;
    int64_t count = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      rec.shape.push_back(static_cast<int64_t>(r.u32()));
      count *= rec.shape.back();
    }
    rec.data.resize(static_cast<size_t>(count));
    r.floats(rec.data.data(), rec.data.size());
    if (!records.emplace(name, std::move(rec)).second)
      throw ParseError("duplicate record " + name, r.offset());
  }
  return records;
}

std::string model_prefix(size_t i) { return "model" + std::to_string(i) + "/"; }

}  // namespace

void save_stack(const ModelStack& stack, const std::string& path) {
  ByteWriter w;
  w.magic("NOMW");
  w.u32(kCheckpointVersion);
  const auto& cfg = stack.base.cfg;
  DenseArray meta({8}, {static_cast<float>(cfg.in_channels), static_cast<float>(cfg.out_channels),
                        static_cast<float>(cfg.hidden), static_cast<float>(cfg.blocks),
                        cfg.physics_edges ? 1.0f : 0.0f, static_cast<float>(cfg.gate),
                        static_cast<float>(stack.q()), 0.0f});
  write_record(w, "meta", meta);
  auto& s = const_cast<ModelStack&>(stack);
  std::vector<Pgn*> models{&s.base};
  for (auto& r : s.residuals) models.push_back(&r);
  for (size_t i = 0; i < models.size(); ++i) {
    const std::string prefix = model_prefix(i);
    visit_params<float>(*models[i], [&](const std::string& name, DenseArray& a) {
      write_record(w, prefix + name, a);
    });
  }
  write_file_atomic(path, w.buffer());
}

ModelStack load_stack(const std::string& path) {
  ByteReader r(read_file(path));
  r.expect_magic("NOMW");
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version), r.offset() - 4);
  auto records = read_records(r);
  auto meta_it = records.find("meta");
  if (meta_it == records.end()) throw std::runtime_error(path + ": missing meta record");
  const auto& meta = meta_it->second.data;
  if (meta.size() < 7) throw std::runtime_error(path + ": short meta record");
  PgnConfig cfg;
  cfg.in_channels = static_cast<int64_t>(meta[0]);
  cfg.out_channels = static_cast<int64_t>(meta[1]);
  cfg.hidden = static_cast<int64_t>(meta[2]);
  cfg.blocks = static_cast<int64_t>(meta[3]);
  cfg.physics_edges = meta[4] != 0.0f;
  cfg.gate = static_cast<GateMode>(static_cast<int>(meta[5]));
  const int64_t q = static_cast<int64_t>(meta[6]);

  ModelStack stack = make_stack(cfg, q, /*seed=*/0);
  std::vector<Pgn*> models{&stack.base};
  for (auto& res : stack.residuals) models.push_back(&res);
  for (size_t i = 0; i < models.size(); ++i) {
    const std::string prefix = model_prefix(i);
    visit_params<float>(*models[i], [&](const std::string& name, DenseArray& a) {
      auto it = records.find(prefix + name);
      if (it == records.end()) throw std::runtime_error(path + ": missing record " + prefix + name);
      if (it->second.shape != a.shape)
        throw std::runtime_error(path + ": shape mismatch for " + prefix + name);
      a.data = std::move(it->second.data);
      records.erase(it);
    });
  }
  return stack;
}

namespace {
// FNV-1a over raw float bytes.
uint64_t hash_bytes(uint64_t h, const void* p, size_t n) {
  const auto* b = static_cast<const uint8_t*>(p);
  for (size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace

uint64_t pgn_param_hash(const Pgn& p) {
  uint64_t h = 0xcbf29ce484222325ULL;
  visit_params<float>(const_cast<Pgn&>(p), [&](const std::string& name, DenseArray& a) {
    h = hash_bytes(h, name.data(), name.size());
    h = hash_bytes(h, a.data.data(), a.data.size() * sizeof(float));
  });
  return h;
}

uint64_t stack_param_hash(const ModelStack& stack) {
  uint64_t h = pgn_param_hash(stack.base);
  for (const auto& r : stack.residuals) h ^= pgn_param_hash(r) * 0x9e3779b97f4a7c15ULL;
  return h;
}

}  // namespace nom
