#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "nom/tape.hpp"

using nom::AggMode;
using nom::DenseArray;
using nom::DenseArray64;
using nom::Ref;
using nom::Tape;
using nom::Tape64;

namespace {

std::mt19937_64 rng(1234);

float urand(float lo, float hi) {
  return lo + (hi - lo) * static_cast<float>(rng() >> 11) * 0x1.0p-53f;
}

DenseArray random_array(std::vector<int64_t> shape, float lo = -1.5f, float hi = 1.5f) {
  DenseArray a = DenseArray::zeros(std::move(shape));
  for (auto& v : a.data) v = urand(lo, hi);
  return a;
}

// Packs a set of leaves into one flat coordinate vector and evaluates a
// builder on either tape precision; the double path feeds the FD oracle.
template <typename Builder>
struct OpProblem : nom::GradCheckProblem {
  Builder build;
  std::vector<std::vector<int64_t>> shapes;

  OpProblem(Builder b, std::vector<std::vector<int64_t>> s) : build(std::move(b)), shapes(std::move(s)) {}

  int64_t dim() const override {
    int64_t n = 0;
    for (const auto& s : shapes) n += nom::DenseArrayT<float>::size_from_shape(s);
    return n;
  }

  template <typename T>
  double eval_impl(std::span<const T> x, std::vector<float>* grad) {
    nom::TapeT<T> tape;
    std::vector<Ref> leaves;
    size_t off = 0;
    for (const auto& s : shapes) {
      auto a = nom::DenseArrayT<T>::zeros(s);
      for (auto& v : a.data) v = x[off++];
      leaves.push_back(tape.leaf(std::move(a), grad != nullptr));
    }
    Ref out = build(tape, leaves);
    if (grad) {
      tape.backward(out);
      grad->clear();
      for (Ref l : leaves) {
        const auto& g = tape.grad(l);
        for (auto v : g.data) grad->push_back(static_cast<float>(v));
      }
    }
    return static_cast<double>(tape.scalar(out));
  }

  double eval_f64(std::span<const double> x) override { return eval_impl<double>(x, nullptr); }
  double eval_grad_f32(std::span<const float> x, std::vector<float>& grad) override {
    return eval_impl<float>(x, &grad);
  }
};

template <typename Builder>
double check_op(Builder b, std::vector<std::vector<int64_t>> shapes, float lo, float hi,
                double step = 1e-3, int points = 10) {
  OpProblem<Builder> prob(std::move(b), std::move(shapes));
  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    std::vector<float> x(static_cast<size_t>(prob.dim()));
    for (auto& v : x) v = urand(lo, hi);
    worst = std::max(worst, nom::gradient_check(prob, x, step));
  }
  return worst;
}

// Weighted-sum readout so every output coordinate reaches the scalar loss.
template <typename T>
Ref readout(nom::TapeT<T>& tape, Ref x) {
  const auto& v = tape.val(x);
  auto w = nom::DenseArrayT<T>::zeros(v.shape);
  std::mt19937_64 wr(99);
  for (auto& e : w.data) e = static_cast<T>(0.25 + 1.5 * static_cast<double>(wr() >> 11) * 0x1.0p-53);
  return tape.reduce_sum(tape.mul(x, tape.leaf(std::move(w), false)));
}

}  // namespace

TEST_CASE("silu, logistic, cosine fixed values") {
  Tape t;
  Ref x = t.leaf(DenseArray({1, 3}, {0.0f, 1.0f, -1.0f}));
  const auto& s = t.val(t.silu(x));
  CHECK(s.data[0] == 0.0f);  // silu(0) = 0
  CHECK(s.data[1] == doctest::Approx(1.0f / (1.0f + std::exp(-1.0f))));

  Ref v = t.leaf(DenseArray({2, 3}, {1, 2, 3, 1, 2, 3}));
  const auto& c = t.val(t.cosine_rows(v, v));
  CHECK(c.data[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(c.data[1] == doctest::Approx(1.0).epsilon(1e-6));

  // antiparallel rows -> -1; orthogonal -> 0
  Ref a = t.leaf(DenseArray({2, 2}, {1, 0, 1, 0}));
  Ref b = t.leaf(DenseArray({2, 2}, {-1, 0, 0, 1}));
  const auto& c2 = t.val(t.cosine_rows(a, b));
  CHECK(c2.data[0] == doctest::Approx(-1.0));
  CHECK(c2.data[1] == doctest::Approx(0.0));

  // zero vector: defined as 0, no NaN
  Ref z = t.leaf(DenseArray({1, 2}, {0, 0}));
  Ref nz = t.leaf(DenseArray({1, 2}, {3, 4}));
  CHECK(t.val(t.cosine_rows(z, nz)).data[0] == 0.0f);
}

TEST_CASE("layer norm: constant row maps to bias, zero-variance uses epsilon") {
  Tape t;
  Ref x = t.leaf(DenseArray({2, 4}, {5, 5, 5, 5, 1, 2, 3, 4}));
  Ref g = t.leaf(DenseArray::full({4}, 1.0f));
  Ref b = t.leaf(DenseArray::zeros({4}));
  const auto& y = t.val(t.layer_norm(x, g, b));
  for (int j = 0; j < 4; ++j) CHECK(y.at(0, j) == doctest::Approx(0.0));  // constant row -> zeros
  double mean = 0, var = 0;
  for (int j = 0; j < 4; ++j) mean += y.at(1, j) / 4.0;
  for (int j = 0; j < 4; ++j) var += (y.at(1, j) - mean) * (y.at(1, j) - mean) / 4.0;
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("shape errors carry both shapes") {
  Tape t;
  Ref a = t.leaf(DenseArray::zeros({2, 3}));
  Ref b = t.leaf(DenseArray::zeros({3, 3}));
  CHECK_THROWS_WITH_AS(t.add(a, b), doctest::Contains("[2x3]"), nom::ShapeError);
  CHECK_THROWS_AS(t.matmul(a, a), nom::ShapeError);
}

TEST_CASE("segment aggregation: hand oracle, empty nodes, bounds") {
  Tape t;
  Ref edges = t.leaf(DenseArray({2, 1}, {1.0f, 3.0f}));
  const auto& mean = t.val(t.segment_aggregate(edges, {0, 0}, 3, AggMode::Mean));
  CHECK(mean.at(0, 0) == doctest::Approx(2.0));  // (1+3)/2
  CHECK(mean.at(1, 0) == 0.0f);                  // no incident edges
  const auto& sum = t.val(t.segment_aggregate(edges, {0, 0}, 3, AggMode::Sum));
  CHECK(sum.at(0, 0) == doctest::Approx(4.0));

  // one edge per node: sum == mean
  Ref e2 = t.leaf(random_array({4, 3}));
  const auto& s1 = t.val(t.segment_aggregate(e2, {0, 1, 2, 3}, 4, AggMode::Sum));
  const auto& m1 = t.val(t.segment_aggregate(e2, {0, 1, 2, 3}, 4, AggMode::Mean));
  for (int64_t i = 0; i < s1.size(); ++i) CHECK(s1.data[i] == m1.data[i]);

  // zero edges -> all-zero matrix
  Ref e0 = t.leaf(DenseArray::zeros({0, 3}));
  const auto& z = t.val(t.segment_aggregate(e0, {}, 5, AggMode::Sum));
  CHECK(z.rows() == 5);
  for (auto v : z.data) CHECK(v == 0.0f);

  CHECK_THROWS_AS(t.segment_aggregate(edges, {0, 7}, 3, AggMode::Sum), nom::ShapeError);
}

TEST_CASE("segment sum is linear and permutation invariant") {
  std::vector<int32_t> targets{3, 1, 1, 0, 2, 2, 2, 1};
  DenseArray a = random_array({8, 4});
  DenseArray b = random_array({8, 4});
  Tape t;
  Ref ra = t.leaf(a);
  Ref rb = t.leaf(b);
  const auto& agg_ab = t.val(t.segment_aggregate(t.add(ra, rb), targets, 4, AggMode::Sum));
  const auto& agg_a = t.val(t.segment_aggregate(ra, targets, 4, AggMode::Sum));
  const auto& agg_b = t.val(t.segment_aggregate(rb, targets, 4, AggMode::Sum));
  for (int64_t i = 0; i < agg_ab.size(); ++i)
    CHECK(agg_ab.data[i] == doctest::Approx(agg_a.data[i] + agg_b.data[i]).epsilon(1e-5));

  // permute edge rows consistently
  std::vector<size_t> perm{5, 2, 7, 0, 3, 6, 1, 4};
  DenseArray ap = DenseArray::zeros({8, 4});
  std::vector<int32_t> tp(8);
  for (size_t i = 0; i < 8; ++i) {
    tp[i] = targets[perm[i]];
    for (int64_t j = 0; j < 4; ++j) ap.at(static_cast<int64_t>(i), j) = a.at(static_cast<int64_t>(perm[i]), j);
  }
  for (auto mode : {AggMode::Sum, AggMode::Mean}) {
    const auto& orig = t.val(t.segment_aggregate(ra, targets, 4, mode));
    const auto& perm_out = t.val(t.segment_aggregate(t.leaf(ap), tp, 4, mode));
    for (int64_t i = 0; i < orig.size(); ++i)
      CHECK(orig.data[i] == doctest::Approx(perm_out.data[i]).epsilon(1e-5));
  }
}

TEST_CASE("concat then split returns originals bit-exactly") {
  DenseArray a = random_array({5, 3});
  DenseArray b = random_array({5, 2});
  DenseArray c = random_array({5, 4});
  Tape t;
  Ref cat = t.concat_cols({t.leaf(a), t.leaf(b), t.leaf(c)});
  const auto& v = t.val(cat);
  REQUIRE(v.cols() == 9);
  for (int64_t i = 0; i < 5; ++i) {
    for (int64_t j = 0; j < 3; ++j) CHECK(v.at(i, j) == a.at(i, j));
    for (int64_t j = 0; j < 2; ++j) CHECK(v.at(i, 3 + j) == b.at(i, j));
    for (int64_t j = 0; j < 4; ++j) CHECK(v.at(i, 5 + j) == c.at(i, j));
  }
}

TEST_CASE("backward: linear map gradient and unreachable parameters") {
  Tape t;
  DenseArray w0 = random_array({3, 2});
  DenseArray x0 = random_array({4, 3});
  Ref w = t.leaf(w0, true);
  Ref x = t.leaf(x0, false);
  Ref unused = t.leaf(random_array({2, 2}), true);
  Ref loss = t.reduce_sum(t.matmul(x, w));
  t.backward(loss);
  // d/dW sum(X W) = column sums of X, broadcast across output columns
  const auto& gw = t.grad(w);
  for (int64_t i = 0; i < 3; ++i) {
    double col = 0;
    for (int64_t r = 0; r < 4; ++r) col += x0.at(r, i);
    for (int64_t j = 0; j < 2; ++j) CHECK(gw.at(i, j) == doctest::Approx(col).epsilon(1e-5));
  }
  const auto& gu = t.grad(unused);
  for (auto v : gu.data) CHECK(v == 0.0f);  // unreachable -> zero

  CHECK_THROWS_AS(t.backward(x), nom::ShapeError);  // non-scalar loss
}

TEST_CASE("gradient_check oracle on closed forms") {
  auto square = [](auto& tape, std::vector<Ref>& leaves) {
    return tape.reduce_sum(tape.mul(leaves[0], leaves[0]));
  };
  OpProblem prob(square, {{1, 1}});
  std::vector<float> at3{3.0f};
  CHECK(nom::gradient_check(prob, at3, 1e-4) < 1e-6);

  auto constant = [](auto& tape, std::vector<Ref>& leaves) {
    auto zero = tape.sub(leaves[0], leaves[0]);
    return tape.reduce_sum(zero);
  };
  OpProblem prob2(constant, {{2, 2}});
  std::vector<float> pt{0.3f, -0.7f, 1.1f, 0.2f};
  CHECK(nom::gradient_check(prob2, pt, 1e-3) == doctest::Approx(0.0));
}

TEST_CASE("every primitive passes gradient_check at 10 random points") {
  CHECK(check_op([](auto& t, std::vector<Ref>& l) { return readout(t, t.matmul(l[0], l[1])); },
                 {{3, 4}, {4, 2}}, -1.5f, 1.5f) < 1e-3);
  CHECK(check_op([](auto& t, std::vector<Ref>& l) { return readout(t, t.add(l[0], l[1])); },
                 {{3, 4}, {3, 4}}, -1.5f, 1.5f) < 1e-3);
  CHECK(check_op([](auto& t, std::vector<Ref>& l) { return readout(t, t.add(l[0], l[1])); },
                 {{3, 4}, {1, 4}}, -1.5f, 1.5f) < 1e-3);  // row broadcast
  CHECK(check_op([](auto& t, std::vector<Ref>& l) { return readout(t, t.sub(l[0], l[1])); },
                 {{3, 4}, {3, 4}}, -1.5f, 1.5f) < 1e-3);
  CHECK(check_op([](auto& t, std::vector<Ref>& l) { return readout(t, t.mul(l[0], l[1])); },
                 {{3, 4}, {3, 4}}, -1.5f, 1.5f) < 1e-3);
  CHECK(check_op([](auto& t, std::vector<Ref>& l) { return readout(t, t.div(l[0], l[1])); },
                 {{2, 3}, {2, 3}}, 0.5f, 1.5f) < 1e-3);
  CHECK(check_op([](auto& t, std::vector<Ref>& l) { return readout(t, t.scale(l[0], 1.7f)); },
                 {{3, 4}}, -1.5f, 1.5f) < 1e-3);
  CHECK(check_op([](auto& t, std::vector<Ref>& l) { return readout(t, t.concat_cols({l[0], l[1]})); },
                 {{3, 2}, {3, 3}}, -1.5f, 1.5f) < 1e-3);
  CHECK(check_op([](auto& t, std::vector<Ref>& l) { return readout(t, t.silu(l[0])); }, {{3, 4}},
                 -1.5f, 1.5f) < 1e-3);
  CHECK(check_op([](auto& t, std::vector<Ref>& l) { return readout(t, t.logistic(l[0])); }, {{3, 4}},
                 -1.5f, 1.5f) < 1e-3);
  CHECK(check_op([](auto& t, std::vector<Ref>& l) { return readout(t, t.sqrt(l[0])); }, {{3, 4}},
                 0.5f, 2.0f) < 1e-3);
  CHECK(check_op(
            [](auto& t, std::vector<Ref>& l) { return readout(t, t.layer_norm(l[0], l[1], l[2])); },
            {{3, 4}, {4}, {4}}, -1.5f, 1.5f) < 1e-3);
  CHECK(check_op([](auto& t, std::vector<Ref>& l) { return readout(t, t.cosine_rows(l[0], l[1])); },
                 {{3, 4}, {3, 4}}, 0.4f, 1.5f) < 1e-3);
  CHECK(check_op(
            [](auto& t, std::vector<Ref>& l) {
              return readout(t, t.gather_rows(l[0], {2, 0, 1, 2, 2}));
            },
            {{3, 4}}, -1.5f, 1.5f) < 1e-3);
  CHECK(check_op(
            [](auto& t, std::vector<Ref>& l) {
              return readout(t, t.segment_aggregate(l[0], {0, 2, 2, 1, 0}, 3, AggMode::Sum));
            },
            {{5, 3}}, -1.5f, 1.5f) < 1e-3);
  CHECK(check_op(
            [](auto& t, std::vector<Ref>& l) {
              return readout(t, t.segment_aggregate(l[0], {0, 2, 2, 1, 0}, 3, AggMode::Mean));
            },
            {{5, 3}}, -1.5f, 1.5f) < 1e-3);
  CHECK(check_op([](auto& t, std::vector<Ref>& l) { return readout(t, t.sum_rows(l[0])); }, {{4, 3}},
                 -1.5f, 1.5f) < 1e-3);
  CHECK(check_op([](auto& t, std::vector<Ref>& l) { return t.reduce_mean(l[0]); }, {{4, 3}}, -1.5f,
                 1.5f) < 1e-3);
}

TEST_CASE("random small net: analytic grad vs central differences") {
  // two-layer net with layer norm and silu, weighted-sum loss
  auto net = [](auto& t, std::vector<Ref>& l) {
    Ref h = t.silu(t.add(t.matmul(l[0], l[1]), l[2]));
    Ref n = t.layer_norm(h, l[3], l[4]);
    Ref out = t.matmul(n, l[5]);
    return readout(t, out);
  };
  CHECK(check_op(net, {{5, 3}, {3, 4}, {1, 4}, {4}, {4}, {4, 2}}, -1.0f, 1.0f, 1e-3, 3) < 1e-3);
}

TEST_CASE("forward ops keep finite inputs finite") {
  Tape t;
  Ref x = t.leaf(random_array({6, 5}, -3.0f, 3.0f));
  Ref g = t.leaf(DenseArray::full({5}, 1.0f));
  Ref b = t.leaf(DenseArray::zeros({5}));
  CHECK(t.val(t.layer_norm(t.silu(x), g, b)).all_finite());
}
