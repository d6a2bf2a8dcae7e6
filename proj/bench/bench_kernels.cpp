// Timing comparison of the serial reference kernels against the OpenMP
// versions on model-sized workloads. Build and run:
//   cmake --build build --target bench_kernels && ./build/bench_kernels

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "nom/kernels.hpp"

using nom::kern::build_segment_index;
using Clock = std::chrono::steady_clock;

namespace {

std::mt19937_64 rng(7);

std::vector<float> random_vec(size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(-1.0 + 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53);
  return v;
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-28s serial %8.3f ms   omp %8.3f ms   speedup %.2fx\n", name, serial * 1e3,
              parallel * 1e3, serial / parallel);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());

  {
    // edge-feature transform shape: [n_edges x d] * [d x d]
    const int64_t n = 5100, k = 64, m = 64;
    auto a = random_vec(static_cast<size_t>(n * k));
    auto b = random_vec(static_cast<size_t>(k * m));
    std::vector<float> c(static_cast<size_t>(n * m));
    nom::kern::set_parallel(false);
    const double ts = time_best_of(5, [&] { nom::kern::matmul_nn(a.data(), b.data(), c.data(), n, k, m); });
    nom::kern::set_parallel(true);
    const double tp = time_best_of(5, [&] { nom::kern::matmul_nn(a.data(), b.data(), c.data(), n, k, m); });
    report("matmul 5100x64 * 64x64", ts, tp);
  }

  {
    // gradient shape: A^T * dC
    const int64_t n = 2048, k = 96, m = 64;
    auto a = random_vec(static_cast<size_t>(n * k));
    auto g = random_vec(static_cast<size_t>(n * m));
    std::vector<float> d(static_cast<size_t>(k * m));
    nom::kern::set_parallel(false);
    const double ts = time_best_of(5, [&] { nom::kern::matmul_tn(a.data(), g.data(), d.data(), n, k, m); });
    nom::kern::set_parallel(true);
    const double tp = time_best_of(5, [&] { nom::kern::matmul_tn(a.data(), g.data(), d.data(), n, k, m); });
    report("matmul_tn 2048x96 ^T x64", ts, tp);
  }

  {
    const int64_t rows = 5100, cols = 64;
    auto x = random_vec(static_cast<size_t>(rows * cols));
    auto gain = random_vec(static_cast<size_t>(cols));
    auto bias = random_vec(static_cast<size_t>(cols));
    std::vector<float> y(x.size());
    std::vector<double> mean(static_cast<size_t>(rows)), rstd(static_cast<size_t>(rows));
    nom::kern::set_parallel(false);
    const double ts = time_best_of(10, [&] {
      nom::kern::layernorm_fwd(x.data(), gain.data(), bias.data(), y.data(), mean.data(),
                               rstd.data(), rows, cols);
    });
    nom::kern::set_parallel(true);
    const double tp = time_best_of(10, [&] {
      nom::kern::layernorm_fwd(x.data(), gain.data(), bias.data(), y.data(), mean.data(),
                               rstd.data(), rows, cols);
    });
    report("layernorm 5100x64", ts, tp);
  }

  {
    const int64_t e = 5100, d = 64, nodes = 642;
    auto edges = random_vec(static_cast<size_t>(e * d));
    std::vector<int32_t> targets(static_cast<size_t>(e));
    for (auto& t : targets) t = static_cast<int32_t>(rng() % static_cast<uint64_t>(nodes));
    auto seg = build_segment_index(targets, nodes);
    std::vector<float> out(static_cast<size_t>(nodes * d));
    nom::kern::set_parallel(false);
    const double ts = time_best_of(10, [&] {
      nom::kern::segment_agg_fwd(edges.data(), seg, false, out.data(), nodes, d);
    });
    nom::kern::set_parallel(true);
    const double tp = time_best_of(10, [&] {
      nom::kern::segment_agg_fwd(edges.data(), seg, false, out.data(), nodes, d);
    });
    report("segment sum 5100 -> 642", ts, tp);
  }

  {
    const int64_t n = 2048 * 64;
    auto x = random_vec(static_cast<size_t>(n));
    std::vector<float> y(x.size());
    nom::kern::set_parallel(false);
    const double ts = time_best_of(10, [&] {
      nom::kern::ew_map(x.data(), y.data(), n, [](float v) { return v * nom::kern::logistic_scalar(v); });
    });
    nom::kern::set_parallel(true);
    const double tp = time_best_of(10, [&] {
      nom::kern::ew_map(x.data(), y.data(), n, [](float v) { return v * nom::kern::logistic_scalar(v); });
    });
    report("silu 131072", ts, tp);
  }

  return 0;
}
