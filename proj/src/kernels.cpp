#include "nom/kernels.hpp"

#include <atomic>

namespace nom::kern {

namespace {
std::atomic<bool> g_parallel{true};
}

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

SegmentIndex build_segment_index(const std::vector<int32_t>& targets, int64_t n_nodes) {
  SegmentIndex seg;
  seg.offsets.assign(static_cast<size_t>(n_nodes) + 1, 0);
  for (int32_t t : targets) {
    if (t < 0 || t >= n_nodes)
      throw ShapeError("segment_aggregate: target index " + std::to_string(t) + " out of range [0," +
                       std::to_string(n_nodes) + ")");
    seg.offsets[static_cast<size_t>(t) + 1]++;
  }
  for (int64_t v = 0; v < n_nodes; ++v) seg.offsets[static_cast<size_t>(v) + 1] += seg.offsets[static_cast<size_t>(v)];
  seg.order.resize(targets.size());
  std::vector<int64_t> cursor(seg.offsets.begin(), seg.offsets.end() - 1);
  for (size_t e = 0; e < targets.size(); ++e)
    seg.order[static_cast<size_t>(cursor[static_cast<size_t>(targets[e])]++)] = static_cast<int32_t>(e);
  return seg;
}

}  // namespace nom::kern
