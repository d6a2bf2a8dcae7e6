#pragma once

// Define-by-run reverse-mode differentiation. Ops append nodes to the tape in
// creation order; backward() replays them in exact reverse order. Values are
// stored at the tape's scalar type; adjoints are accumulated in double so
// near-cancelling gradients keep their digits.

#include <functional>
#include <span>
#include <vector>

#include "nom/array.hpp"
#include "nom/kernels.hpp"

namespace nom {

enum class AggMode { Sum, Mean };

struct Ref {
  int32_t idx = -1;
  bool valid() const { return idx >= 0; }
};

template <typename T>
class TapeT {
 public:
  Ref leaf(DenseArrayT<T> value, bool requires_grad = false);

  const DenseArrayT<T>& val(Ref r) const { return node(r).value; }
  // Gradient rounded to the tape's scalar type (zeros when unreached).
  DenseArrayT<T> grad(Ref r) const;
  const DenseArray64& grad64(Ref r) const;
  bool requires_grad(Ref r) const { return node(r).requires_grad; }
  size_t size() const { return nodes_.size(); }

  Ref matmul(Ref a, Ref b);
  Ref add(Ref a, Ref b);  // b may be a [1 x d] row broadcast across a
  Ref sub(Ref a, Ref b);
  Ref mul(Ref a, Ref b);
  Ref div(Ref a, Ref b);
  Ref scale(Ref a, T s);
  Ref concat_cols(const std::vector<Ref>& parts);
  Ref silu(Ref a);
  Ref logistic(Ref a);
  Ref sqrt(Ref a);
  Ref layer_norm(Ref x, Ref gain, Ref bias);
  Ref cosine_rows(Ref a, Ref b);  // [n x d],[n x d] -> [n x 1]
  Ref gather_rows(Ref x, const std::vector<int32_t>& idx);
  Ref segment_aggregate(Ref edges, const std::vector<int32_t>& targets, int64_t n_nodes,
                        AggMode mode);
  Ref reduce_sum(Ref a);   // [1 x 1]
  Ref reduce_mean(Ref a);  // [1 x 1]
  Ref sum_rows(Ref a);     // [n x d] -> [1 x d]

  // Scalar convenience for [1 x 1] results.
  T scalar(Ref r) const;

  void backward(Ref loss);

 private:
  struct Node {
    DenseArrayT<T> value;
    DenseArray64 grad;  // allocated lazily
    bool requires_grad = false;
    std::function<void(TapeT&)> back;  // empty for leaves / grad-free nodes
  };

  std::vector<Node> nodes_;

  Node& node(Ref r) { return nodes_[static_cast<size_t>(r.idx)]; }
  const Node& node(Ref r) const { return nodes_[static_cast<size_t>(r.idx)]; }

  Ref push(DenseArrayT<T> value, bool requires_grad, std::function<void(TapeT&)> back);
  DenseArray64& grad_buf(Ref r);
  void accumulate(Ref r, const DenseArray64& g);
  DenseArray64 val64(Ref r) const { return node(r).value.template cast<double>(); }

  Ref binary(kern::BinOp op, Ref a, Ref b);
};

using Tape = TapeT<float>;
using Tape64 = TapeT<double>;

// ---------------------------------------------------------------------------
// Finite-difference oracle. eval_f64 runs the same function in double
// precision (no tape) so the central differences are clean; eval_grad_f32
// returns the float-path analytic gradient under test.

struct GradCheckProblem {
  virtual ~GradCheckProblem() = default;
  virtual int64_t dim() const = 0;
  virtual double eval_f64(std::span<const double> x) = 0;
  virtual double eval_grad_f32(std::span<const float> x, std::vector<float>& grad) = 0;
};

// Max over coordinates of |analytic - central| / (|analytic| + |central| + 1e-8).
double gradient_check(GradCheckProblem& problem, std::span<const float> point, double step);

}  // namespace nom
