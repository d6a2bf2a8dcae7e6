#pragma once

// Numeric kernels behind the tape ops. Every kernel has one per-row (or
// per-element-range) worker shared by the serial path and the OpenMP path, so
// the two produce bit-identical results; reductions accumulate in double with
// a fixed order. set_parallel(false) forces the serial reference everywhere.

#include <omp.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "nom/array.hpp"

namespace nom::kern {

bool parallel_enabled();
void set_parallel(bool on);

// Sizes below this many output elements stay serial even in parallel mode.
inline constexpr int64_t kParallelCutoff = 4096;

inline bool use_omp(int64_t work) { return parallel_enabled() && work >= kParallelCutoff; }

// ---------------------------------------------------------------------------
// matmul: c[n x m] = a[n x k] * b[k x m]

template <typename T>
inline void matmul_nn_row(const T* a, const T* b, T* c, int64_t k, int64_t m, int64_t i,
                          double* acc) {
  for (int64_t j = 0; j < m; ++j) acc[j] = 0.0;
  const T* arow = a + i * k;
  for (int64_t p = 0; p < k; ++p) {
    const double av = static_cast<double>(arow[p]);
    const T* brow = b + p * m;
    for (int64_t j = 0; j < m; ++j) acc[j] += av * static_cast<double>(brow[j]);
  }
  T* crow = c + i * m;
  for (int64_t j = 0; j < m; ++j) crow[j] = static_cast<T>(acc[j]);
}

template <typename T>
void matmul_nn(const T* a, const T* b, T* c, int64_t n, int64_t k, int64_t m) {
  if (use_omp(n * m * k)) {
#pragma omp parallel
    {
      std::vector<double> acc(static_cast<size_t>(m));
#pragma omp for schedule(static)
      for (int64_t i = 0; i < n; ++i) matmul_nn_row(a, b, c, k, m, i, acc.data());
    }
  } else {
    std::vector<double> acc(static_cast<size_t>(m));
    for (int64_t i = 0; i < n; ++i) matmul_nn_row(a, b, c, k, m, i, acc.data());
  }
}

// c[n x m] = a[n x k] * b[m x k]^T
template <typename T>
inline void matmul_nt_row(const T* a, const T* b, T* c, int64_t k, int64_t m, int64_t i) {
  const T* arow = a + i * k;
  T* crow = c + i * m;
  for (int64_t j = 0; j < m; ++j) {
    const T* brow = b + j * k;
    double acc = 0.0;
    for (int64_t p = 0; p < k; ++p) acc += static_cast<double>(arow[p]) * static_cast<double>(brow[p]);
    crow[j] = static_cast<T>(acc);
  }
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int64_t n, int64_t k, int64_t m) {
  if (use_omp(n * m * k)) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) matmul_nt_row(a, b, c, k, m, i);
  } else {
    for (int64_t i = 0; i < n; ++i) matmul_nt_row(a, b, c, k, m, i);
  }
}

// c[n x m] = a[k x n]^T * b[k x m]
template <typename T>
inline void matmul_tn_row(const T* a, const T* b, T* c, int64_t k, int64_t n, int64_t m, int64_t i,
                          double* acc) {
  for (int64_t j = 0; j < m; ++j) acc[j] = 0.0;
  for (int64_t p = 0; p < k; ++p) {
    const double av = static_cast<double>(a[p * n + i]);
    const T* brow = b + p * m;
    for (int64_t j = 0; j < m; ++j) acc[j] += av * static_cast<double>(brow[j]);
  }
  T* crow = c + i * m;
  for (int64_t j = 0; j < m; ++j) crow[j] = static_cast<T>(acc[j]);
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* c, int64_t k, int64_t n, int64_t m) {
  if (use_omp(n * m * k)) {
#pragma omp parallel
    {
      std::vector<double> acc(static_cast<size_t>(m));
#pragma omp for schedule(static)
      for (int64_t i = 0; i < n; ++i) matmul_tn_row(a, b, c, k, n, m, i, acc.data());
    }
  } else {
    std::vector<double> acc(static_cast<size_t>(m));
    for (int64_t i = 0; i < n; ++i) matmul_tn_row(a, b, c, k, n, m, i, acc.data());
  }
}

// ---------------------------------------------------------------------------
// Elementwise. b_rows == 1 broadcasts b across the rows of a.

enum class BinOp { Add, Sub, Mul, Div };

template <typename T>
inline T bin_apply(BinOp op, T x, T y) {
  switch (op) {
    case BinOp::Add: return x + y;
    case BinOp::Sub: return x - y;
    case BinOp::Mul: return x * y;
    case BinOp::Div: return x / y;
  }
  return T(0);
}

template <typename T>
void ew_binary(BinOp op, const T* a, const T* b, T* y, int64_t rows, int64_t cols,
               bool broadcast_b) {
  const int64_t n = rows * cols;
  if (use_omp(n)) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
      y[i] = bin_apply(op, a[i], b[broadcast_b ? i % cols : i]);
  } else {
    for (int64_t i = 0; i < n; ++i)
      y[i] = bin_apply(op, a[i], b[broadcast_b ? i % cols : i]);
  }
}

template <typename T, typename Fn>
void ew_map(const T* x, T* y, int64_t n, Fn fn) {
  if (use_omp(n)) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] = fn(x[i]);
  } else {
    for (int64_t i = 0; i < n; ++i) y[i] = fn(x[i]);
  }
}

// y += alpha * x
template <typename T>
void axpy(T alpha, const T* x, T* y, int64_t n) {
  if (use_omp(n)) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
  } else {
    for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
  }
}

template <typename T>
inline T logistic_scalar(T x) {
  return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
}

// ---------------------------------------------------------------------------
// LayerNorm over the channel axis (per row), epsilon inside the sqrt.

inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
inline void layernorm_fwd_row(const T* x, const T* gain, const T* bias, T* y, double* mean,
                              double* rstd, int64_t d, int64_t i) {
  const T* xr = x + i * d;
  double mu = 0.0;
  for (int64_t j = 0; j < d; ++j) mu += static_cast<double>(xr[j]);
  mu /= static_cast<double>(d);
  double var = 0.0;
  for (int64_t j = 0; j < d; ++j) {
    const double dv = static_cast<double>(xr[j]) - mu;
    var += dv * dv;
  }
  var /= static_cast<double>(d);
  const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
  mean[i] = mu;
  rstd[i] = rs;
  T* yr = y + i * d;
  for (int64_t j = 0; j < d; ++j)
    yr[j] = static_cast<T>((static_cast<double>(xr[j]) - mu) * rs * static_cast<double>(gain[j]) +
                           static_cast<double>(bias[j]));
}

template <typename T>
void layernorm_fwd(const T* x, const T* gain, const T* bias, T* y, double* mean, double* rstd,
                   int64_t n, int64_t d) {
  if (use_omp(n * d)) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) layernorm_fwd_row(x, gain, bias, y, mean, rstd, d, i);
  } else {
    for (int64_t i = 0; i < n; ++i) layernorm_fwd_row(x, gain, bias, y, mean, rstd, d, i);
  }
}

inline void layernorm_bwd_row(const double* dy, const double* x, const double* gain,
                              const double* mean, const double* rstd, double* dx, int64_t d,
                              int64_t i) {
  const double* dyr = dy + i * d;
  const double* xr = x + i * d;
  double* dxr = dx + i * d;
  const double mu = mean[i];
  const double rs = rstd[i];
  double sum_dyg = 0.0, sum_dyg_xhat = 0.0;
  for (int64_t j = 0; j < d; ++j) {
    const double dyg = dyr[j] * gain[j];
    const double xhat = (xr[j] - mu) * rs;
    sum_dyg += dyg;
    sum_dyg_xhat += dyg * xhat;
  }
  const double inv_d = 1.0 / static_cast<double>(d);
  for (int64_t j = 0; j < d; ++j) {
    const double dyg = dyr[j] * gain[j];
    const double xhat = (xr[j] - mu) * rs;
    dxr[j] += rs * (dyg - inv_d * sum_dyg - xhat * inv_d * sum_dyg_xhat);
  }
}

inline void layernorm_bwd_input(const double* dy, const double* x, const double* gain,
                                const double* mean, const double* rstd, double* dx, int64_t n,
                                int64_t d) {
  if (use_omp(n * d)) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) layernorm_bwd_row(dy, x, gain, mean, rstd, dx, d, i);
  } else {
    for (int64_t i = 0; i < n; ++i) layernorm_bwd_row(dy, x, gain, mean, rstd, dx, d, i);
  }
}

// Gain/bias grads: column reductions, serial fixed order.
inline void layernorm_bwd_params(const double* dy, const double* x, const double* mean,
                                 const double* rstd, double* dgain, double* dbias, int64_t n,
                                 int64_t d) {
  for (int64_t i = 0; i < n; ++i) {
    const double* dyr = dy + i * d;
    const double* xr = x + i * d;
    const double mu = mean[i];
    const double rs = rstd[i];
    for (int64_t j = 0; j < d; ++j) {
      const double xhat = (xr[j] - mu) * rs;
      dgain[j] += dyr[j] * xhat;
      dbias[j] += dyr[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Row-wise cosine similarity; a zero vector on either side yields 0.

template <typename T>
inline void cosine_fwd_row(const T* a, const T* b, T* y, T* na, T* nb, int64_t d, int64_t i) {
  const T* ar = a + i * d;
  const T* br = b + i * d;
  double dot = 0.0, qa = 0.0, qb = 0.0;
  for (int64_t j = 0; j < d; ++j) {
    const double av = static_cast<double>(ar[j]);
    const double bv = static_cast<double>(br[j]);
    dot += av * bv;
    qa += av * av;
    qb += bv * bv;
  }
  const double norm_a = std::sqrt(qa);
  const double norm_b = std::sqrt(qb);
  na[i] = static_cast<T>(norm_a);
  nb[i] = static_cast<T>(norm_b);
  y[i] = (norm_a == 0.0 || norm_b == 0.0) ? T(0) : static_cast<T>(dot / (norm_a * norm_b));
}

template <typename T>
void cosine_fwd(const T* a, const T* b, T* y, T* na, T* nb, int64_t n, int64_t d) {
  if (use_omp(n * d)) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) cosine_fwd_row(a, b, y, na, nb, d, i);
  } else {
    for (int64_t i = 0; i < n; ++i) cosine_fwd_row(a, b, y, na, nb, d, i);
  }
}

template <typename T>
inline void cosine_bwd_row(const T* dy, const T* a, const T* b, const T* y, const T* na,
                           const T* nb, T* da, T* db, int64_t d, int64_t i) {
  const double norm_a = static_cast<double>(na[i]);
  const double norm_b = static_cast<double>(nb[i]);
  if (norm_a == 0.0 || norm_b == 0.0) return;  // defined constant 0, zero gradient
  const double g = static_cast<double>(dy[i]);
  const double c = static_cast<double>(y[i]);
  const T* ar = a + i * d;
  const T* br = b + i * d;
  T* dar = da + i * d;
  T* dbr = db + i * d;
  const double inv_ab = 1.0 / (norm_a * norm_b);
  const double inv_aa = 1.0 / (norm_a * norm_a);
  const double inv_bb = 1.0 / (norm_b * norm_b);
  for (int64_t j = 0; j < d; ++j) {
    const double av = static_cast<double>(ar[j]);
    const double bv = static_cast<double>(br[j]);
    dar[j] += static_cast<T>(g * (bv * inv_ab - c * av * inv_aa));
    dbr[j] += static_cast<T>(g * (av * inv_ab - c * bv * inv_bb));
  }
}

template <typename T>
void cosine_bwd(const T* dy, const T* a, const T* b, const T* y, const T* na, const T* nb, T* da,
                T* db, int64_t n, int64_t d) {
  if (use_omp(n * d)) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) cosine_bwd_row(dy, a, b, y, na, nb, da, db, d, i);
  } else {
    for (int64_t i = 0; i < n; ++i) cosine_bwd_row(dy, a, b, y, na, nb, da, db, d, i);
  }
}

// ---------------------------------------------------------------------------
// Gather / segment aggregation. Incoming edges are grouped per target node
// (CSR built once per call, stable edge order), so the parallel path is
// deterministic: each output row is owned by one thread.

struct SegmentIndex {
  std::vector<int64_t> offsets;  // n_nodes + 1
  std::vector<int32_t> order;    // edge ids grouped by target, ascending within a target
};

SegmentIndex build_segment_index(const std::vector<int32_t>& targets, int64_t n_nodes);

template <typename T>
void gather_rows(const T* x, const int32_t* idx, T* y, int64_t n_out, int64_t d) {
  if (use_omp(n_out * d)) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n_out; ++i)
      for (int64_t j = 0; j < d; ++j) y[i * d + j] = x[static_cast<int64_t>(idx[i]) * d + j];
  } else {
    for (int64_t i = 0; i < n_out; ++i)
      for (int64_t j = 0; j < d; ++j) y[i * d + j] = x[static_cast<int64_t>(idx[i]) * d + j];
  }
}

template <typename T>
inline void segment_agg_node(const T* edges, const SegmentIndex& seg, bool mean, T* out, int64_t d,
                             int64_t v, double* acc) {
  for (int64_t j = 0; j < d; ++j) acc[j] = 0.0;
  const int64_t lo = seg.offsets[static_cast<size_t>(v)];
  const int64_t hi = seg.offsets[static_cast<size_t>(v) + 1];
  for (int64_t p = lo; p < hi; ++p) {
    const T* er = edges + static_cast<int64_t>(seg.order[static_cast<size_t>(p)]) * d;
    for (int64_t j = 0; j < d; ++j) acc[j] += static_cast<double>(er[j]);
  }
  const double scale = (mean && hi > lo) ? 1.0 / static_cast<double>(hi - lo) : 1.0;
  T* orow = out + v * d;
  for (int64_t j = 0; j < d; ++j) orow[j] = static_cast<T>(acc[j] * scale);
}

template <typename T>
void segment_agg_fwd(const T* edges, const SegmentIndex& seg, bool mean, T* out, int64_t n_nodes,
                     int64_t d) {
  if (use_omp(n_nodes * d)) {
#pragma omp parallel
    {
      std::vector<double> acc(static_cast<size_t>(d));
#pragma omp for schedule(static)
      for (int64_t v = 0; v < n_nodes; ++v) segment_agg_node(edges, seg, mean, out, d, v, acc.data());
    }
  } else {
    std::vector<double> acc(static_cast<size_t>(d));
    for (int64_t v = 0; v < n_nodes; ++v) segment_agg_node(edges, seg, mean, out, d, v, acc.data());
  }
}

// Backward of segment aggregation is a gather of the node grad per edge.
template <typename T>
void segment_agg_bwd(const T* dnode, const std::vector<int32_t>& targets,
                     const std::vector<int64_t>& counts, bool mean, T* dedges, int64_t d) {
  const int64_t e = static_cast<int64_t>(targets.size());
  if (use_omp(e * d)) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < e; ++i) {
      const int64_t v = targets[static_cast<size_t>(i)];
      const double s = mean ? 1.0 / static_cast<double>(counts[static_cast<size_t>(v)]) : 1.0;
      for (int64_t j = 0; j < d; ++j)
        dedges[i * d + j] += static_cast<T>(static_cast<double>(dnode[v * d + j]) * s);
    }
  } else {
    for (int64_t i = 0; i < e; ++i) {
      const int64_t v = targets[static_cast<size_t>(i)];
      const double s = mean ? 1.0 / static_cast<double>(counts[static_cast<size_t>(v)]) : 1.0;
      for (int64_t j = 0; j < d; ++j)
        dedges[i * d + j] += static_cast<T>(static_cast<double>(dnode[v * d + j]) * s);
    }
  }
}

// Deterministic scatter-add of edge rows into node rows (gather backward).
template <typename T>
void scatter_add_rows(const T* dy, const SegmentIndex& seg, T* dx, int64_t n_nodes, int64_t d) {
  if (use_omp(n_nodes * d)) {
#pragma omp parallel for schedule(static)
    for (int64_t v = 0; v < n_nodes; ++v) {
      for (int64_t p = seg.offsets[static_cast<size_t>(v)]; p < seg.offsets[static_cast<size_t>(v) + 1]; ++p) {
        const T* dyr = dy + static_cast<int64_t>(seg.order[static_cast<size_t>(p)]) * d;
        for (int64_t j = 0; j < d; ++j) dx[v * d + j] += dyr[j];
      }
    }
  } else {
    for (int64_t v = 0; v < n_nodes; ++v) {
      for (int64_t p = seg.offsets[static_cast<size_t>(v)]; p < seg.offsets[static_cast<size_t>(v) + 1]; ++p) {
        const T* dyr = dy + static_cast<int64_t>(seg.order[static_cast<size_t>(p)]) * d;
        for (int64_t j = 0; j < d; ++j) dx[v * d + j] += dyr[j];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Reductions: serial, double accumulation, fixed order.

template <typename T>
double reduce_sum(const T* x, int64_t n) {
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]);
  return acc;
}

template <typename T>
void colsum(const T* x, T* y, int64_t rows, int64_t cols) {
  std::vector<double> acc(static_cast<size_t>(cols), 0.0);
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) acc[static_cast<size_t>(j)] += static_cast<double>(x[i * cols + j]);
  for (int64_t j = 0; j < cols; ++j) y[j] = static_cast<T>(acc[static_cast<size_t>(j)]);
}

}  // namespace nom::kern
