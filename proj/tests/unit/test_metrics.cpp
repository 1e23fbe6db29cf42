#include <doctest.h>

#include <cmath>
#include <limits>

#include "fusad/error.hpp"
#include "fusad/metrics.hpp"
#include "fusad/random.hpp"

using namespace fusad;
using doctest::Approx;

TEST_CASE("accuracy") {
  CHECK(accuracy({0, 1, 2}, {0, 1, 2}) == 1.0);
  CHECK(accuracy({1, 0}, {0, 1}) == 0.0);
  CHECK(accuracy({0, 1, 1, 0}, {0, 1, 1, 1}) == 0.75);
  CHECK_THROWS_AS(accuracy({0}, {0, 1}), InputError);
}

TEST_CASE("mse and mae") {
  const std::vector<double> t = {1, -2, 3.5, 0};
  auto e = mse_mae(t, t);
  CHECK(e.mse == 0.0);
  CHECK(e.mae == 0.0);
  std::vector<double> p = t;
  for (double& v : p) v += 1;
  e = mse_mae(p, t);
  CHECK(e.mse == 1.0);
  CHECK(e.mae == 1.0);
  Rng rng(3);
  std::vector<std::vector<double>> a(4, std::vector<double>(6)), b = a;
  std::vector<double> fa, fb;
  for (auto* m : {&a, &b})
    for (auto& row : *m)
      for (double& v : row) v = rng.normal();
  double se = 0, ae = 0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      se += (a[i][j] - b[i][j]) * (a[i][j] - b[i][j]);
      ae += std::abs(a[i][j] - b[i][j]);
      fa.push_back(a[i][j]);
      fb.push_back(b[i][j]);
    }
  e = mse_mae(fa, fb);
  CHECK(e.mse == Approx(se / 24).epsilon(1e-14));
  CHECK(e.mae == Approx(ae / 24).epsilon(1e-14));
}

TEST_CASE("precision, recall, F1") {
  const std::vector<int> truth = {0, 1, 1, 0, 1};
  for (bool pa : {false, true}) {
    const auto r = prf1(truth, truth, pa);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.f1 == 1.0);
  }
  std::vector<int> seg(30, 0), pred(30, 0);
  for (int t = 10; t <= 20; ++t) seg[t] = 1;
  pred[15] = 1;
  CHECK(prf1(pred, seg, false).recall == Approx(1.0 / 11));
  CHECK(prf1(pred, seg, true).recall == 1.0);
  const auto none = prf1(std::vector<int>(30, 0), seg, true);
  CHECK(none.precision == 0.0);
  CHECK(none.f1 == 0.0);
  CHECK_THROWS_AS(prf1({0, 1}, {0}, false), InputError);
}

TEST_CASE("point adjustment never lowers precision or recall") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> truth(60, 0), pred(60);
    for (int s = 0; s < 3; ++s) {
      const std::size_t start = rng.index(55), len = 1 + rng.index(5);
      for (std::size_t t = start; t < start + len; ++t) truth[t] = 1;
    }
    for (int& v : pred) v = rng.uniform(0, 1) < 0.15;
    const auto raw = prf1(pred, truth, false), adj = prf1(pred, truth, true);
    CHECK(adj.recall >= raw.recall);
    CHECK(adj.precision >= raw.precision);
    if (raw.precision + raw.recall > 0)
      CHECK(raw.f1 == Approx(2 * raw.precision * raw.recall / (raw.precision + raw.recall)));
  }
}

TEST_CASE("metrics ignore sample order for classification") {
  std::vector<int> p = {0, 1, 1, 2, 0}, y = {0, 1, 2, 2, 1};
  const double a = accuracy(p, y);
  std::swap(p[0], p[3]);
  std::swap(y[0], y[3]);
  CHECK(accuracy(p, y) == a);
}

TEST_CASE("argmax rows") { CHECK(argmax_rows({0.1, 0.9, 3, -1, 0.2, 0.2}, 2) == std::vector<int>{1, 0, 0}); }

TEST_CASE("reports refuse non-finite values") {
  MetricReport r;
  r.task = Task::forecasting;
  r.metrics["mse"] = 0.5;
  const auto j = r.to_json();
  CHECK(j["task"] == "forecasting");
  CHECK(j["metrics"]["mse"] == 0.5);
  r.metrics["mae"] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(r.to_json(), NumericalError);
}
