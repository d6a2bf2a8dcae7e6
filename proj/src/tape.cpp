#include "nom/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace nom {

template <typename T>
Ref TapeT<T>::push(DenseArrayT<T> value, bool requires_grad, std::function<void(TapeT&)> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Ref{static_cast<int32_t>(nodes_.size() - 1)};
}

template <typename T>
Ref TapeT<T>::leaf(DenseArrayT<T> value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

template <typename T>
DenseArray64& TapeT<T>::grad_buf(Ref r) {
  Node& n = node(r);
  if (n.grad.data.empty() && n.value.size() > 0) n.grad = DenseArray64::zeros(n.value.shape);
  return n.grad;
}

template <typename T>
const DenseArray64& TapeT<T>::grad64(Ref r) const {
  const Node& n = node(r);
  if (n.grad.data.empty()) {
    static thread_local DenseArray64 zero;
    zero = DenseArray64::zeros(n.value.shape);
    return zero;
  }
  return n.grad;
}

template <typename T>
DenseArrayT<T> TapeT<T>::grad(Ref r) const {
  return grad64(r).template cast<T>();
}

template <typename T>
void TapeT<T>::accumulate(Ref r, const DenseArray64& g) {
  if (!node(r).requires_grad) return;
  DenseArray64& buf = grad_buf(r);
  kern::axpy(1.0, g.data.data(), buf.data.data(), buf.size());
}

template <typename T>
T TapeT<T>::scalar(Ref r) const {
  const auto& v = val(r);
  if (v.size() != 1) throw ShapeError("scalar: expected a single-element array, got " + v.shape_str());
  return v.data[0];
}

template <typename T>
Ref TapeT<T>::matmul(Ref a, Ref b) {
  const auto& va = val(a);
  const auto& vb = val(b);
  if (va.shape.size() != 2 || vb.shape.size() != 2 || va.shape[1] != vb.shape[0])
    throw ShapeError("matmul: incompatible shapes " + va.shape_str() + " x " + vb.shape_str());
  const int64_t n = va.shape[0], k = va.shape[1], m = vb.shape[1];
  auto out = DenseArrayT<T>::zeros({n, m});
  kern::matmul_nn(va.data.data(), vb.data.data(), out.data.data(), n, k, m);
  const bool rg = requires_grad(a) || requires_grad(b);
  Ref self{static_cast<int32_t>(nodes_.size())};
  return push(std::move(out), rg, [a, b, self, n, k, m](TapeT& t) {
    const auto& g = t.grad64(self);
    if (t.requires_grad(a)) {  // dA = dC * B^T
      auto da = DenseArray64::zeros({n, k});
      const auto b64 = t.val64(b);
      kern::matmul_nt(g.data.data(), b64.data.data(), da.data.data(), n, m, k);
      t.accumulate(a, da);
    }
    if (t.requires_grad(b)) {  // dB = A^T * dC
      auto db = DenseArray64::zeros({k, m});
      const auto a64 = t.val64(a);
      kern::matmul_tn(a64.data.data(), g.data.data(), db.data.data(), n, k, m);
      t.accumulate(b, db);
    }
  });
}

template <typename T>
Ref TapeT<T>::binary(kern::BinOp op, Ref a, Ref b) {
  const auto& va = val(a);
  const auto& vb = val(b);
  const bool broadcast = vb.shape.size() == 2 && vb.shape[0] == 1 && va.shape.size() == 2 &&
                         va.shape[1] == vb.shape[1] && va.shape[0] != 1;
  if (!broadcast) require_same_shape(va.shape, vb.shape, "elementwise");
  auto out = DenseArrayT<T>::zeros(va.shape);
  const int64_t rows = va.rows() > 0 ? va.rows() : 1;
  const int64_t cols = rows > 0 ? va.size() / rows : 0;
  kern::ew_binary(op, va.data.data(), vb.data.data(), out.data.data(), rows, cols, broadcast);
  const bool rg = requires_grad(a) || requires_grad(b);
  Ref self{static_cast<int32_t>(nodes_.size())};
  return push(std::move(out), rg, [op, a, b, self, broadcast, rows, cols](TapeT& t) {
    const auto& g = t.grad64(self);
    auto reduce_to_b = [&](const DenseArray64& full) {
      if (!broadcast) return full;
      auto r = DenseArray64::zeros({1, cols});
      kern::colsum(full.data.data(), r.data.data(), rows, cols);
      return r;
    };
    switch (op) {
      case kern::BinOp::Add: {
        if (t.requires_grad(a)) t.accumulate(a, g);
        if (t.requires_grad(b)) t.accumulate(b, reduce_to_b(g));
        break;
      }
      case kern::BinOp::Sub: {
        if (t.requires_grad(a)) t.accumulate(a, g);
        if (t.requires_grad(b)) {
          auto neg = g;
          for (auto& v : neg.data) v = -v;
          t.accumulate(b, reduce_to_b(neg));
        }
        break;
      }
      case kern::BinOp::Mul: {
        const auto va64 = t.val64(a);
        const auto vb64 = t.val64(b);
        if (t.requires_grad(a)) {
          auto da = DenseArray64::zeros(g.shape);
          kern::ew_binary(kern::BinOp::Mul, g.data.data(), vb64.data.data(), da.data.data(), rows,
                          cols, broadcast);
          t.accumulate(a, da);
        }
        if (t.requires_grad(b)) {
          auto db = DenseArray64::zeros(g.shape);
          kern::ew_binary(kern::BinOp::Mul, g.data.data(), va64.data.data(), db.data.data(), rows,
                          cols, false);
          t.accumulate(b, reduce_to_b(db));
        }
        break;
      }
      case kern::BinOp::Div: {
        // y = a / b: da = g / b; db = -g * a / b^2
        const auto va64 = t.val64(a);
        const auto vb64 = t.val64(b);
        if (t.requires_grad(a)) {
          auto da = DenseArray64::zeros(g.shape);
          kern::ew_binary(kern::BinOp::Div, g.data.data(), vb64.data.data(), da.data.data(), rows,
                          cols, broadcast);
          t.accumulate(a, da);
        }
        if (t.requires_grad(b)) {
          auto db = DenseArray64::zeros(g.shape);
          for (int64_t i = 0; i < g.size(); ++i) {
            const int64_t bi = broadcast ? i % cols : i;
            const double bv = vb64.data[static_cast<size_t>(bi)];
            db.data[static_cast<size_t>(i)] =
                -g.data[static_cast<size_t>(i)] * va64.data[static_cast<size_t>(i)] / (bv * bv);
          }
          t.accumulate(b, reduce_to_b(db));
        }
        break;
      }
    }
  });
}

template <typename T>
Ref TapeT<T>::add(Ref a, Ref b) { return binary(kern::BinOp::Add, a, b); }
template <typename T>
Ref TapeT<T>::sub(Ref a, Ref b) { return binary(kern::BinOp::Sub, a, b); }
template <typename T>
Ref TapeT<T>::mul(Ref a, Ref b) { return binary(kern::BinOp::Mul, a, b); }
template <typename T>
Ref TapeT<T>::div(Ref a, Ref b) { return binary(kern::BinOp::Div, a, b); }

template <typename T>
Ref TapeT<T>::scale(Ref a, T s) {
  const auto& va = val(a);
  auto out = DenseArrayT<T>::zeros(va.shape);
  kern::ew_map(va.data.data(), out.data.data(), va.size(), [s](T x) { return s * x; });
  Ref self{static_cast<int32_t>(nodes_.size())};
  const double s64 = static_cast<double>(s);
  return push(std::move(out), requires_grad(a), [a, s64, self](TapeT& t) {
    if (!t.requires_grad(a)) return;
    auto da = t.grad64(self);
    for (auto& v : da.data) v *= s64;
    t.accumulate(a, da);
  });
}

template <typename T>
Ref TapeT<T>::concat_cols(const std::vector<Ref>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const int64_t n = val(parts[0]).rows();
  int64_t total = 0;
  bool rg = false;
  for (Ref p : parts) {
    if (val(p).rows() != n)
      throw ShapeError("concat_cols: row mismatch " + val(parts[0]).shape_str() + " vs " +
                       val(p).shape_str());
    total += val(p).cols();
    rg = rg || requires_grad(p);
  }
  auto out = DenseArrayT<T>::zeros({n, total});
  int64_t off = 0;
  for (Ref p : parts) {
    const auto& v = val(p);
    const int64_t c = v.cols();
    for (int64_t i = 0; i < n; ++i)
      std::copy_n(v.data.data() + i * c, c, out.data.data() + i * total + off);
    off += c;
  }
  Ref self{static_cast<int32_t>(nodes_.size())};
  std::vector<Ref> held = parts;
  return push(std::move(out), rg, [held, self, n, total](TapeT& t) {
    const auto& g = t.grad64(self);
    int64_t off2 = 0;
    for (Ref p : held) {
      const int64_t c = t.val(p).cols();
      if (t.requires_grad(p)) {
        auto dp = DenseArray64::zeros({n, c});
        for (int64_t i = 0; i < n; ++i)
          std::copy_n(g.data.data() + i * total + off2, c, dp.data.data() + i * c);
        t.accumulate(p, dp);
      }
      off2 += c;
    }
  });
}

template <typename T>
Ref TapeT<T>::silu(Ref a) {
  const auto& va = val(a);
  auto out = DenseArrayT<T>::zeros(va.shape);
  kern::ew_map(va.data.data(), out.data.data(), va.size(),
               [](T x) { return x * kern::logistic_scalar(x); });
  Ref self{static_cast<int32_t>(nodes_.size())};
  return push(std::move(out), requires_grad(a), [a, self](TapeT& t) {
    if (!t.requires_grad(a)) return;
    const auto& g = t.grad64(self);
    const auto& x = t.val(a);
    auto da = DenseArray64::zeros(x.shape);
    for (int64_t i = 0; i < x.size(); ++i) {
      const double xv = static_cast<double>(x.data[static_cast<size_t>(i)]);
      const double s = 1.0 / (1.0 + std::exp(-xv));
      da.data[static_cast<size_t>(i)] = g.data[static_cast<size_t>(i)] * s * (1.0 + xv * (1.0 - s));
    }
    t.accumulate(a, da);
  });
}

template <typename T>
Ref TapeT<T>::logistic(Ref a) {
  const auto& va = val(a);
  auto out = DenseArrayT<T>::zeros(va.shape);
  kern::ew_map(va.data.data(), out.data.data(), va.size(),
               [](T x) { return kern::logistic_scalar(x); });
  Ref self{static_cast<int32_t>(nodes_.size())};
  return push(std::move(out), requires_grad(a), [a, self](TapeT& t) {
    if (!t.requires_grad(a)) return;
    const auto& g = t.grad64(self);
    const auto& x = t.val(a);
    auto da = DenseArray64::zeros(x.shape);
    for (int64_t i = 0; i < x.size(); ++i) {
      const double xv = static_cast<double>(x.data[static_cast<size_t>(i)]);
      const double s = 1.0 / (1.0 + std::exp(-xv));
      da.data[static_cast<size_t>(i)] = g.data[static_cast<size_t>(i)] * s * (1.0 - s);
    }
    t.accumulate(a, da);
  });
}

template <typename T>
Ref TapeT<T>::sqrt(Ref a) {
  const auto& va = val(a);
  auto out = DenseArrayT<T>::zeros(va.shape);
  kern::ew_map(va.data.data(), out.data.data(), va.size(),
               [](T x) { return static_cast<T>(std::sqrt(static_cast<double>(x))); });
  Ref self{static_cast<int32_t>(nodes_.size())};
  return push(std::move(out), requires_grad(a), [a, self](TapeT& t) {
    if (!t.requires_grad(a)) return;
    const auto& g = t.grad64(self);
    const auto& x = t.val(a);
    auto da = DenseArray64::zeros(x.shape);
    for (int64_t i = 0; i < x.size(); ++i)
      da.data[static_cast<size_t>(i)] =
          g.data[static_cast<size_t>(i)] /
          (2.0 * std::sqrt(static_cast<double>(x.data[static_cast<size_t>(i)])));
    t.accumulate(a, da);
  });
}

template <typename T>
Ref TapeT<T>::layer_norm(Ref x, Ref gain, Ref bias) {
  const auto& vx = val(x);
  const int64_t n = vx.rows(), d = vx.cols();
  if (val(gain).size() != d || val(bias).size() != d)
    throw ShapeError("layer_norm: gain/bias size must match channel count " + std::to_string(d));
  auto out = DenseArrayT<T>::zeros(vx.shape);
  auto mean = std::make_shared<DenseArray64>(DenseArray64::zeros({n}));
  auto rstd = std::make_shared<DenseArray64>(DenseArray64::zeros({n}));
  kern::layernorm_fwd(vx.data.data(), val(gain).data.data(), val(bias).data.data(),
                      out.data.data(), mean->data.data(), rstd->data.data(), n, d);
  const bool rg = requires_grad(x) || requires_grad(gain) || requires_grad(bias);
  Ref self{static_cast<int32_t>(nodes_.size())};
  return push(std::move(out), rg, [x, gain, bias, self, n, d, mean, rstd](TapeT& t) {
    const auto& g = t.grad64(self);
    const auto x64 = t.val64(x);
    if (t.requires_grad(x)) {
      const auto gain64 = t.val64(gain);
      auto dx = DenseArray64::zeros(x64.shape);
      kern::layernorm_bwd_input(g.data.data(), x64.data.data(), gain64.data.data(),
                                mean->data.data(), rstd->data.data(), dx.data.data(), n, d);
      t.accumulate(x, dx);
    }
    if (t.requires_grad(gain) || t.requires_grad(bias)) {
      auto dg = DenseArray64::zeros({d});
      auto db = DenseArray64::zeros({d});
      kern::layernorm_bwd_params(g.data.data(), x64.data.data(), mean->data.data(),
                                 rstd->data.data(), dg.data.data(), db.data.data(), n, d);
      if (t.requires_grad(gain)) t.accumulate(gain, dg);
      if (t.requires_grad(bias)) t.accumulate(bias, db);
    }
  });
}

template <typename T>
Ref TapeT<T>::cosine_rows(Ref a, Ref b) {
  const auto& va = val(a);
  const auto& vb = val(b);
  require_same_shape(va.shape, vb.shape, "cosine_rows");
  const int64_t n = va.rows(), d = va.cols();
  auto out = DenseArrayT<T>::zeros({n, 1});
  auto na = std::make_shared<DenseArray64>(DenseArray64::zeros({n}));
  auto nb = std::make_shared<DenseArray64>(DenseArray64::zeros({n}));
  auto y64 = std::make_shared<DenseArray64>(DenseArray64::zeros({n}));
  {
    // forward in double, rounded once into the tape value
    const auto a64 = va.template cast<double>();
    const auto b64 = vb.template cast<double>();
    kern::cosine_fwd(a64.data.data(), b64.data.data(), y64->data.data(), na->data.data(),
                     nb->data.data(), n, d);
    for (int64_t i = 0; i < n; ++i) out.data[static_cast<size_t>(i)] = static_cast<T>(y64->data[static_cast<size_t>(i)]);
  }
  const bool rg = requires_grad(a) || requires_grad(b);
  Ref self{static_cast<int32_t>(nodes_.size())};
  return push(std::move(out), rg, [a, b, self, n, d, na, nb, y64](TapeT& t) {
    const auto& g = t.grad64(self);
    const auto a64 = t.val64(a);
    const auto b64 = t.val64(b);
    auto da = DenseArray64::zeros(a64.shape);
    auto db = DenseArray64::zeros(b64.shape);
    kern::cosine_bwd(g.data.data(), a64.data.data(), b64.data.data(), y64->data.data(),
                     na->data.data(), nb->data.data(), da.data.data(), db.data.data(), n, d);
    if (t.requires_grad(a)) t.accumulate(a, da);
    if (t.requires_grad(b)) t.accumulate(b, db);
  });
}

template <typename T>
Ref TapeT<T>::gather_rows(Ref x, const std::vector<int32_t>& idx) {
  const auto& vx = val(x);
  const int64_t n = vx.rows(), d = vx.cols();
  for (int32_t i : idx)
    if (i < 0 || i >= n)
      throw ShapeError("gather_rows: index " + std::to_string(i) + " out of range [0," +
                       std::to_string(n) + ")");
  auto out = DenseArrayT<T>::zeros({static_cast<int64_t>(idx.size()), d});
  kern::gather_rows(vx.data.data(), idx.data(), out.data.data(), static_cast<int64_t>(idx.size()),
                    d);
  Ref self{static_cast<int32_t>(nodes_.size())};
  auto idx_p = std::make_shared<std::vector<int32_t>>(idx);
  return push(std::move(out), requires_grad(x), [x, self, n, d, idx_p](TapeT& t) {
    if (!t.requires_grad(x)) return;
    auto seg = kern::build_segment_index(*idx_p, n);
    auto dx = DenseArray64::zeros({n, d});
    kern::scatter_add_rows(t.grad64(self).data.data(), seg, dx.data.data(), n, d);
    t.accumulate(x, dx);
  });
}

template <typename T>
Ref TapeT<T>::segment_aggregate(Ref edges, const std::vector<int32_t>& targets, int64_t n_nodes,
                                AggMode mode) {
  const auto& ve = val(edges);
  if (ve.rows() != static_cast<int64_t>(targets.size()))
    throw ShapeError("segment_aggregate: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(ve.rows()) + " edge rows");
  const int64_t d = ve.cols();
  auto seg = kern::build_segment_index(targets, n_nodes);
  auto out = DenseArrayT<T>::zeros({n_nodes, d});
  const bool mean = mode == AggMode::Mean;
  kern::segment_agg_fwd(ve.data.data(), seg, mean, out.data.data(), n_nodes, d);
  Ref self{static_cast<int32_t>(nodes_.size())};
  auto targets_p = std::make_shared<std::vector<int32_t>>(targets);
  auto counts_p = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(n_nodes), 0);
  for (int32_t t : targets) (*counts_p)[static_cast<size_t>(t)]++;
  return push(std::move(out), requires_grad(edges),
              [edges, self, d, mean, targets_p, counts_p](TapeT& t) {
                if (!t.requires_grad(edges)) return;
                auto de = DenseArray64::zeros(t.val(edges).shape);
                kern::segment_agg_bwd(t.grad64(self).data.data(), *targets_p, *counts_p, mean,
                                      de.data.data(), d);
                t.accumulate(edges, de);
              });
}

template <typename T>
Ref TapeT<T>::reduce_sum(Ref a) {
  const auto& va = val(a);
  auto out = DenseArrayT<T>::zeros({1, 1});
  out.data[0] = static_cast<T>(kern::reduce_sum(va.data.data(), va.size()));
  Ref self{static_cast<int32_t>(nodes_.size())};
  return push(std::move(out), requires_grad(a), [a, self](TapeT& t) {
    if (!t.requires_grad(a)) return;
    const double g = t.grad64(self).data[0];
    auto da = DenseArray64::full(t.val(a).shape, g);
    t.accumulate(a, da);
  });
}

template <typename T>
Ref TapeT<T>::reduce_mean(Ref a) {
  const int64_t n = val(a).size();
  Ref s = reduce_sum(a);
  return scale(s, static_cast<T>(1.0 / static_cast<double>(n)));
}

template <typename T>
Ref TapeT<T>::sum_rows(Ref a) {
  const auto& va = val(a);
  const int64_t n = va.rows(), d = va.cols();
  auto out = DenseArrayT<T>::zeros({1, d});
  kern::colsum(va.data.data(), out.data.data(), n, d);
  Ref self{static_cast<int32_t>(nodes_.size())};
  return push(std::move(out), requires_grad(a), [a, self, n, d](TapeT& t) {
    if (!t.requires_grad(a)) return;
    const auto& g = t.grad64(self);
    auto da = DenseArray64::zeros({n, d});
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < d; ++j) da.data[static_cast<size_t>(i * d + j)] = g.data[static_cast<size_t>(j)];
    t.accumulate(a, da);
  });
}

template <typename T>
void TapeT<T>::backward(Ref loss) {
  const auto& lv = val(loss);
  if (lv.size() != 1)
    throw ShapeError("backward: loss must be scalar, got " + lv.shape_str());
  if (!node(loss).requires_grad) return;  // loss independent of every parameter
  grad_buf(loss).data[0] = 1.0;
  for (int32_t i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.back && !n.grad.data.empty()) n.back(*this);
  }
}

template class TapeT<float>;
template class TapeT<double>;

double gradient_check(GradCheckProblem& problem, std::span<const float> point, double step) {
  if (step <= 0) throw std::invalid_argument("gradient_check: step must be positive");
  const int64_t n = problem.dim();
  std::vector<float> x32(point.begin(), point.end());
  std::vector<float> analytic;
  problem.eval_grad_f32(x32, analytic);
  std::vector<double> x64(point.begin(), point.end());
  double worst = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double x0 = x64[static_cast<size_t>(i)];
    x64[static_cast<size_t>(i)] = x0 + step;
    const double fp = problem.eval_f64(x64);
    x64[static_cast<size_t>(i)] = x0 - step;
    const double fm = problem.eval_f64(x64);
    x64[static_cast<size_t>(i)] = x0;
    const double central = (fp - fm) / (2.0 * step);
    const double a = static_cast<double>(analytic[static_cast<size_t>(i)]);
    const double rel = std::abs(a - central) / (std::abs(a) + std::abs(central) + 1e-8);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace nom
