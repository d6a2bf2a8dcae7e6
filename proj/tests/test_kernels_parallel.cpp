#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <random>

#include "nom/kernels.hpp"

// The OpenMP kernels must match the serial reference bit-for-bit: every
// output element is produced by one thread with a fixed accumulation order.

namespace {

std::mt19937_64 rng(42);
float urand() { return -2.0f + 4.0f * static_cast<float>(rng() >> 11) * 0x1.0p-53f; }

std::vector<float> random_vec(size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = urand();
  return v;
}

struct ParallelGuard {
  ~ParallelGuard() { nom::kern::set_parallel(true); }
};

}  // namespace

TEST_CASE("matmul variants: serial == parallel bitwise") {
  ParallelGuard guard;
  const int64_t n = 67, k = 43, m = 51;  // above the parallel cutoff
  auto a = random_vec(static_cast<size_t>(n * k));
  auto b = random_vec(static_cast<size_t>(k * m));
  std::vector<float> c_ser(static_cast<size_t>(n * m)), c_par(c_ser.size());

  nom::kern::set_parallel(false);
  nom::kern::matmul_nn(a.data(), b.data(), c_ser.data(), n, k, m);
  nom::kern::set_parallel(true);
  nom::kern::matmul_nn(a.data(), b.data(), c_par.data(), n, k, m);
  CHECK(std::memcmp(c_ser.data(), c_par.data(), c_ser.size() * sizeof(float)) == 0);

  auto bt = random_vec(static_cast<size_t>(m * k));
  nom::kern::set_parallel(false);
  nom::kern::matmul_nt(a.data(), bt.data(), c_ser.data(), n, k, m);
  nom::kern::set_parallel(true);
  nom::kern::matmul_nt(a.data(), bt.data(), c_par.data(), n, k, m);
  CHECK(std::memcmp(c_ser.data(), c_par.data(), c_ser.size() * sizeof(float)) == 0);

  auto at = random_vec(static_cast<size_t>(k * n));
  nom::kern::set_parallel(false);
  nom::kern::matmul_tn(at.data(), b.data(), c_ser.data(), k, n, m);
  nom::kern::set_parallel(true);
  nom::kern::matmul_tn(at.data(), b.data(), c_par.data(), k, n, m);
  CHECK(std::memcmp(c_ser.data(), c_par.data(), c_ser.size() * sizeof(float)) == 0);
}

TEST_CASE("elementwise and layernorm: serial == parallel bitwise") {
  ParallelGuard guard;
  const int64_t rows = 130, cols = 40;
  auto x = random_vec(static_cast<size_t>(rows * cols));
  auto y = random_vec(static_cast<size_t>(rows * cols));
  std::vector<float> out_ser(x.size()), out_par(x.size());
  for (auto op : {nom::kern::BinOp::Add, nom::kern::BinOp::Sub, nom::kern::BinOp::Mul}) {
    nom::kern::set_parallel(false);
    nom::kern::ew_binary(op, x.data(), y.data(), out_ser.data(), rows, cols, false);
    nom::kern::set_parallel(true);
    nom::kern::ew_binary(op, x.data(), y.data(), out_par.data(), rows, cols, false);
    CHECK(std::memcmp(out_ser.data(), out_par.data(), out_ser.size() * sizeof(float)) == 0);
  }

  auto gain = random_vec(static_cast<size_t>(cols));
  auto bias = random_vec(static_cast<size_t>(cols));
  std::vector<double> mean(static_cast<size_t>(rows)), rstd(static_cast<size_t>(rows));
  nom::kern::set_parallel(false);
  nom::kern::layernorm_fwd(x.data(), gain.data(), bias.data(), out_ser.data(), mean.data(),
                           rstd.data(), rows, cols);
  nom::kern::set_parallel(true);
  nom::kern::layernorm_fwd(x.data(), gain.data(), bias.data(), out_par.data(), mean.data(),
                           rstd.data(), rows, cols);
  CHECK(std::memcmp(out_ser.data(), out_par.data(), out_ser.size() * sizeof(float)) == 0);
}

TEST_CASE("segment aggregation: serial == parallel bitwise") {
  ParallelGuard guard;
  const int64_t e = 600, d = 16, nodes = 77;
  auto edges = random_vec(static_cast<size_t>(e * d));
  std::vector<int32_t> targets(static_cast<size_t>(e));
  for (auto& t : targets) t = static_cast<int32_t>(rng() % static_cast<uint64_t>(nodes));
  auto seg = nom::kern::build_segment_index(targets, nodes);
  std::vector<float> out_ser(static_cast<size_t>(nodes * d)), out_par(out_ser.size());
  for (bool mean : {false, true}) {
    nom::kern::set_parallel(false);
    nom::kern::segment_agg_fwd(edges.data(), seg, mean, out_ser.data(), nodes, d);
    nom::kern::set_parallel(true);
    nom::kern::segment_agg_fwd(edges.data(), seg, mean, out_par.data(), nodes, d);
    CHECK(std::memcmp(out_ser.data(), out_par.data(), out_ser.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("repeated parallel runs are identical") {
  ParallelGuard guard;
  nom::kern::set_parallel(true);
  const int64_t n = 80, k = 60, m = 70;
  auto a = random_vec(static_cast<size_t>(n * k));
  auto b = random_vec(static_cast<size_t>(k * m));
  std::vector<float> c1(static_cast<size_t>(n * m)), c2(c1.size());
  nom::kern::matmul_nn(a.data(), b.data(), c1.data(), n, k, m);
  nom::kern::matmul_nn(a.data(), b.data(), c2.data(), n, k, m);
  CHECK(std::memcmp(c1.data(), c2.data(), c1.size() * sizeof(float)) == 0);
}
