#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "nom/metrics.hpp"
#include "nom/synth.hpp"

using namespace nom;

namespace {

std::mt19937_64 rng(404);
float urand(float lo = -1.0f, float hi = 1.0f) {
  return lo + (hi - lo) * static_cast<float>(rng() >> 11) * 0x1.0p-53f;
}

// plain double-loop reference implementations
double rmse_loop(const float* p, const float* t, const std::vector<double>& w,
                 const std::vector<uint8_t>& mask, int nlat, int nlon) {
  double acc = 0;
  int64_t n = 0;
  for (int i = 0; i < nlat; ++i)
    for (int j = 0; j < nlon; ++j) {
      const int64_t c = static_cast<int64_t>(i) * nlon + j;
      if (!mask[static_cast<size_t>(c)]) continue;
      acc += w[static_cast<size_t>(i)] * (p[c] - t[c]) * static_cast<double>(p[c] - t[c]);
      n++;
    }
  return std::sqrt(acc / static_cast<double>(n));
}

double acc_loop(const float* p, const float* t, const std::vector<double>& w,
                const std::vector<uint8_t>& mask, int nlat, int nlon) {
  double pt = 0, pp = 0, tt = 0;
  for (int i = 0; i < nlat; ++i)
    for (int j = 0; j < nlon; ++j) {
      const int64_t c = static_cast<int64_t>(i) * nlon + j;
      if (!mask[static_cast<size_t>(c)]) continue;
      pt += w[static_cast<size_t>(i)] * p[c] * static_cast<double>(t[c]);
      pp += w[static_cast<size_t>(i)] * p[c] * static_cast<double>(p[c]);
      tt += w[static_cast<size_t>(i)] * t[c] * static_cast<double>(t[c]);
    }
  return pt / std::sqrt(pp * tt);
}

}  // namespace

TEST_CASE("latitude weights: closed forms and unit mean") {
  GridSpec one;
  one.n_lat = 1;
  one.n_lon = 4;
  one.lat_deg = {37.0};
  one.lon_deg = {0, 90, 180, 270};
  one.land.assign(4, 0);
  auto w1 = lat_weights(one);
  CHECK(w1[0] == doctest::Approx(1.0).epsilon(1e-12));

  GridSpec two;
  two.n_lat = 2;
  two.n_lon = 2;
  two.lat_deg = {60.0, 0.0};
  two.lon_deg = {0, 180};
  two.land.assign(4, 0);
  auto w2 = lat_weights(two);
  // cos(60) = 0.5, cos(0) = 1: weights 2*0.5/1.5 and 2*1/1.5
  CHECK(w2[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(w2[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));

  GridSpec grid = GridSpec::regular(16, 32);
  auto w = lat_weights(grid);
  double mean = 0;
  for (double v : w) mean += v / static_cast<double>(w.size());
  CHECK(std::abs(mean - 1.0) < 1e-12);
  for (double v : w) CHECK(v > 0.0);
}

TEST_CASE("rmse: exact zero, constant offset, brute-force oracle on 20 fields") {
  GridSpec grid = GridSpec::regular(4, 8);
  auto w = lat_weights(grid);
  std::vector<uint8_t> mask(32, 1);
  mask[3] = mask[17] = 0;  // a couple of land cells

  std::vector<float> truth(32), pred(32);
  for (auto& v : truth) v = urand();
  CHECK(weighted_rmse(truth.data(), truth.data(), w, mask, 4, 8) == 0.0);

  for (size_t i = 0; i < 32; ++i) pred[i] = truth[i] + 0.75f;
  CHECK(weighted_rmse(pred.data(), truth.data(), w, mask, 4, 8) ==
        doctest::Approx(0.75).epsilon(1e-6));

  for (int rep = 0; rep < 20; ++rep) {
    for (auto& v : truth) v = urand();
    for (auto& v : pred) v = urand();
    CHECK(weighted_rmse(pred.data(), truth.data(), w, mask, 4, 8) ==
          doctest::Approx(rmse_loop(pred.data(), truth.data(), w, mask, 4, 8)).epsilon(1e-6));
  }

  std::vector<uint8_t> all_land(32, 0);
  CHECK_THROWS_AS(weighted_rmse(pred.data(), truth.data(), w, all_land, 4, 8), MetricError);
}

TEST_CASE("acc: correlation identities and brute-force oracle") {
  GridSpec grid = GridSpec::regular(4, 8);
  auto w = lat_weights(grid);
  std::vector<uint8_t> mask(32, 1);

  std::vector<float> a(32), b(32);
  for (auto& v : a) v = urand();

  CHECK(weighted_acc(a.data(), a.data(), w, mask, 4, 8) == doctest::Approx(1.0).epsilon(1e-12));
  for (size_t i = 0; i < 32; ++i) b[i] = -a[i];
  CHECK(weighted_acc(b.data(), a.data(), w, mask, 4, 8) == doctest::Approx(-1.0).epsilon(1e-12));
  for (size_t i = 0; i < 32; ++i) b[i] = 2.0f * a[i];
  CHECK(weighted_acc(b.data(), a.data(), w, mask, 4, 8) == doctest::Approx(1.0).epsilon(1e-12));

  for (int rep = 0; rep < 20; ++rep) {
    for (auto& v : a) v = urand();
    for (auto& v : b) v = urand();
    CHECK(weighted_acc(b.data(), a.data(), w, mask, 4, 8) ==
          doctest::Approx(acc_loop(b.data(), a.data(), w, mask, 4, 8)).epsilon(1e-6));
  }

  std::vector<float> zero(32, 0.0f);
  CHECK_THROWS_AS(weighted_acc(zero.data(), a.data(), w, mask, 4, 8), MetricError);
}

TEST_CASE("csi: direct formula cases") {
  CHECK(*csi({5, 0, 0, 10}) == doctest::Approx(1.0));
  CHECK(*csi({1, 1, 2, 4}) == doctest::Approx(0.25));
  CHECK(*csi({0, 3, 2, 4}) == doctest::Approx(0.0));
  CHECK(!csi({0, 0, 0, 9}).has_value());
}

TEST_CASE("sedi: symmetry, antisymmetry, hand-evaluated value") {
  // contingency with H = 0.8, F = 0.2 under F = FP/(FP+TP):
  // TP=8, FN=2 -> H=0.8; FP=2 -> F = 2/10 = 0.2
  Contingency c{8, 2, 2, 88};
  auto v = sedi(c);
  REQUIRE(v.has_value());
  const double H = 0.8, F = 0.2;
  const double expect = (std::log(F) - std::log(H) - std::log1p(-F) + std::log1p(-H)) /
                        (std::log(F) + std::log(H) + std::log1p(-F) + std::log1p(-H));
  CHECK(*v == doctest::Approx(expect).epsilon(1e-12));
  CHECK(*v > 0.0);

  // swapped rates negate: H=0.2, F=0.8 (TP=2, FN=8, FP=8)
  Contingency swapped{2, 8, 8, 82};
  CHECK(*sedi(swapped) == doctest::Approx(-expect).epsilon(1e-12));

  // H == F -> 0
  Contingency equal{4, 1, 1, 94};  // H = 4/5, F = 1/5... not equal; build equal instead
  (void)equal;
  Contingency eq{5, 5, 5, 85};  // H = 0.5, F = 0.5
  CHECK(*sedi(eq) == doctest::Approx(0.0));

  // degenerate rates are reported absent
  CHECK(!sedi({0, 2, 3, 5}).has_value());   // H = 0
  CHECK(!sedi({3, 0, 2, 5}).has_value());   // F = 0
  CHECK(!sedi({3, 2, 0, 5}).has_value());   // H = 1
  CHECK(!sedi({0, 0, 0, 5}).has_value());

  // antisymmetry sedi(H,F) == -sedi(F,H) over a grid of rates
  for (int hi = 1; hi <= 5; ++hi)
    for (int fi = 1; fi <= 5; ++fi) {
      // construct counts out of denominators of 6: H = hi/6, F = fi/6
      Contingency fw{hi, fi, 6 - hi, 0};
      fw.fp = fi;       // F = fi / (fi + hi)... use explicit construction below
      // use TP=hi, FN=6-hi -> H=hi/6; choose FP so F=fi/6: FP/(FP+TP)=fi/6
      // -> FP = TP*fi/(6-fi)
      if ((hi * fi) % (6 - fi) != 0) continue;
      const int fp = hi * fi / (6 - fi);
      Contingency ab{hi, fp, 6 - hi, 50};
      // mirrored: H' = F, F' = H
      const int tp2 = fp, fn2 = [&] {
        // H' = F = fi/6 -> TP2/(TP2+FN2) = fi/6 with TP2 = fp
        return fp * (6 - fi) / fi;
      }();
      const int fp2 = [&] {
        // F' = H = hi/6 -> FP2/(FP2+TP2) = hi/6
        return tp2 * hi / (6 - hi);
      }();
      if (tp2 <= 0 || fn2 < 0 || fp2 < 0) continue;
      auto a1 = sedi(ab);
      auto a2 = sedi({tp2, fp2, fn2, 50});
      if (a1 && a2) CHECK(*a1 == doctest::Approx(-*a2).epsilon(1e-9));
    }
}

TEST_CASE("extreme threshold: order statistic, uniform quantile, monotone equivariance") {
  // constant training data: threshold equals the constant
  std::vector<float> flat(10, 3.25f);
  std::vector<const float*> one_cell;
  for (auto& v : flat) one_cell.push_back(&v);
  auto th = extreme_threshold(one_cell, 1, 0.95);
  CHECK(th[0] == 3.25f);

  // uniform samples: q=0.95 lands near 0.95
  const int n = 10000;
  std::vector<float> samples(n);
  for (auto& v : samples) v = urand(0.0f, 1.0f);
  std::vector<const float*> ptrs(n);
  for (int i = 0; i < n; ++i) ptrs[static_cast<size_t>(i)] = &samples[static_cast<size_t>(i)];
  auto tu = extreme_threshold(ptrs, 1, 0.95);
  CHECK(tu[0] == doctest::Approx(0.95).epsilon(0.015));

  // strictly monotone transform commutes with the threshold exactly
  std::vector<float> cubed(n);
  for (int i = 0; i < n; ++i) {
    const float v = samples[static_cast<size_t>(i)];
    cubed[static_cast<size_t>(i)] = v * v * v + 2.0f;
  }
  std::vector<const float*> cptrs(n);
  for (int i = 0; i < n; ++i) cptrs[static_cast<size_t>(i)] = &cubed[static_cast<size_t>(i)];
  auto tc = extreme_threshold(cptrs, 1, 0.95);
  CHECK(tc[0] == tu[0] * tu[0] * tu[0] + 2.0f);

  CHECK_THROWS_AS(extreme_threshold(ptrs, 1, 0.0), MetricError);
  CHECK_THROWS_AS(extreme_threshold(ptrs, 1, 1.0), MetricError);
}

TEST_CASE("count_events pools only evaluated cells") {
  std::vector<float> pred{1.0f, 5.0f, 5.0f, 0.0f};
  std::vector<float> truth{5.0f, 5.0f, 0.0f, 0.0f};
  std::vector<float> thr{2.0f, 2.0f, 2.0f, 2.0f};
  std::vector<uint8_t> mask{1, 1, 1, 0};
  Contingency c = count_events(pred.data(), truth.data(), thr.data(), mask, 4);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK(c.tn == 0);
}

TEST_CASE("report csv shape and determinism") {
  MetricReport rep;
  rep.rows.push_back({"tracer_a0", 5, 0.5, 0.9, 0.3, 0.2, 4, 0});
  MetricRow absent;
  absent.variable = "height";
  absent.lead = 10;
  absent.rmse = 1.0;
  absent.n_ics = 4;
  absent.n_undefined = 8;
  rep.rows.push_back(absent);
  const std::string csv = report_to_csv(rep);
  CHECK(csv.find("variable,lead_days,rmse,acc,csi,sedi,n_ics,n_undefined") == 0);
  CHECK(csv.find("tracer_a0,5,0.5,0.9,0.3,0.2,4,0") != std::string::npos);
  CHECK(csv.find("height,10,1,nan,nan,nan,4,8") != std::string::npos);
  CHECK(report_to_csv(rep) == csv);
}
