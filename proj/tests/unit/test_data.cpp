#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "fusad/data.hpp"
#include "fusad/error.hpp"
#include "fusad/fft.hpp"

using namespace fusad;
namespace fs = std::filesystem;
using doctest::Approx;

namespace {

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("fusad_test_data_" + name);
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("series csv loading") {
  std::string text = "a,b,c\n";
  for (int r = 0; r < 10; ++r) text += std::to_string(r) + "," + std::to_string(r * 2) + "," + std::to_string(-r) + "\n";
  const Series s = load_series_csv(write_file("ok.csv", text));
  CHECK(s.channels() == 3);
  CHECK(s.length() == 10);
  CHECK(s.names == std::vector<std::string>{"a", "b", "c"});
  CHECK(s.values[1][4] == 8.0);
  CHECK(s.labels.empty());
}

TEST_CASE("timestamps and labels are split off") {
  const Series s = load_series_csv(write_file("ts.csv", "timestamp,x,label\n2020-01-01,1.5,0\n2020-01-02,2.5,1\n"));
  CHECK(s.channels() == 1);
  CHECK(s.timestamps == std::vector<std::string>{"2020-01-01", "2020-01-02"});
  CHECK(s.labels == std::vector<int>{0, 1});
}

TEST_CASE("bad cells name their row and column") {
  try {
    load_series_csv(write_file("bad.csv", "a,b\n1,2\n3,oops\n"));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("b") != std::string::npos);
  }
  CHECK_THROWS_AS(load_series_csv(write_file("ragged.csv", "a,b\n1,2\n3\n")), ParseError);
  CHECK_THROWS_AS(load_series_csv(write_file("nan.csv", "a\n1\nnan\n")), ParseError);
  CHECK_THROWS_AS(load_series_csv(write_file("empty.csv", "a,b\n")), InputError);
  CHECK_THROWS_AS(load_series_csv(fs::temp_directory_path() / "fusad_no_such_file.csv"), InputError);
}

TEST_CASE("csv round trip is exact") {
  Series s;
  s.names = {"x", "y"};
  s.values = {{0.1, 1.0 / 3.0, -2e-17, 12345.678901234567}, {std::nextafter(1.0, 2.0), 0, -1, 3.5e300}};
  s.labels = {0, 1, 1, 0};
  const auto p = fs::temp_directory_path() / "fusad_test_data_rt.csv";
  save_series_csv(s, p);
  const Series back = load_series_csv(p);
  CHECK(back.values == s.values);
  CHECK(back.labels == s.labels);
  CHECK(back.names == s.names);
}

TEST_CASE("manifest round trip") {
  Manifest m;
  m.task = Task::anomaly;
  m.n_channels = 2;
  m.split_train_end = 700;
  m.extra["source"] = "unit";
  const auto p = fs::temp_directory_path() / "fusad_test_data.manifest";
  save_manifest(m, p);
  const Manifest back = load_manifest(p);
  CHECK(back.task == Task::anomaly);
  CHECK(back.n_channels == 2);
  CHECK(back.split_train_end == 700);
  CHECK(back.extra.at("source") == "unit");
  const Manifest colon = load_manifest(write_file("colon.manifest", "# comment\ntask: forecasting\nhorizon: 8\n"));
  CHECK(colon.horizon == 8);
  CHECK_THROWS_AS(load_manifest(write_file("notask.manifest", "horizon = 3\n")), InputError);
}

TEST_CASE("z-score normalization") {
  Series s;
  s.names = {"a", "b"};
  s.values = {{2, 4, 6}, {5, 5, 5}};
  const Normalizer z = fit_zscore(s, 3);
  Series t = s;
  z.apply(t);
  double mean = 0, var = 0;
  for (double v : t.values[0]) mean += v / 3;
  for (double v : t.values[0]) var += (v - mean) * (v - mean) / 3;
  CHECK(std::abs(mean) < 1e-15);
  CHECK(var == Approx(1.0).epsilon(1e-14));
  for (double v : t.values[1]) CHECK(v == 0.0);
  CHECK(z.constant[1]);
  z.invert(t);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(t.values[c][i] - s.values[c][i]) < 1e-10);
}

TEST_CASE("normalization statistics come from the training prefix only") {
  Series s;
  s.names = {"a"};
  s.values = {{1, 3, 100, 200}};
  const Normalizer z = fit_zscore(s, 2);
  CHECK(z.mean[0] == 2.0);
  CHECK(z.std[0] == 1.0);
}

TEST_CASE("sliding windows") {
  Series s;
  s.names = {"a"};
  s.values = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
  const auto w = sliding_windows(s, {4, 2, 1});
  REQUIRE(w.size() == 5);
  CHECK(window_count(10, {4, 2, 1}) == 5);
  CHECK(w[4].lookback == std::vector<double>{4, 5, 6, 7});
  CHECK(w[4].target == std::vector<double>{8, 9});
  CHECK(sliding_windows(s, {4, 2, 10}).size() == 1);
  std::set<double> covered;
  for (const auto& win : sliding_windows(s, {3, 0, 1}))
    for (double v : win.lookback) covered.insert(v);
  CHECK(covered.size() == 10);
  CHECK_THROWS_AS(sliding_windows(s, {9, 2, 1}), InputError);
  CHECK_THROWS_AS(sliding_windows(s, {4, 2, 0}), InputError);
}

TEST_CASE("window datasets") {
  Series s;
  s.names = {"a", "b"};
  s.values = {{0, 1, 2, 3, 4, 5}, {10, 11, 12, 13, 14, 15}};
  s.labels = {0, 0, 1, 0, 0, 0};
  const SeriesDataset f = forecasting_dataset(s, {3, 1, 1});
  CHECK(f.size() == 3);
  const Tensor x = f.batch_inputs({1});
  CHECK(x.shape() == Shape{1, 2, 3});
  CHECK(x.at({0, 1, 0}) == 11.0);
  CHECK(f.batch_targets({2}).at({0, 1, 0}) == 15.0);
  const SeriesDataset a = anomaly_dataset(s, {3, 0, 3});
  CHECK(a.size() == 2);
  CHECK(a.point_labels == std::vector<int>{0, 0, 1, 0, 0, 0});
  const Series mid = slice_series(s, 2, 5);
  CHECK(mid.values[1] == std::vector<double>{12, 13, 14});
  CHECK(mid.labels == std::vector<int>{1, 0, 0});
}

TEST_CASE("splits") {
  CHECK(chronological_split(10, 0.7) == 7);
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) labels.push_back(i % 3);
  std::vector<std::size_t> tr, va;
  stratified_split(labels, 0.2, 4, tr, va);
  CHECK(tr.size() + va.size() == 30);
  std::vector<int> per(3, 0);
  for (auto i : va) ++per[labels[i]];
  CHECK(per == std::vector<int>{2, 2, 2});
  std::vector<std::size_t> tr2, va2;
  stratified_split(labels, 0.2, 4, tr2, va2);
  CHECK(va == va2);
}

TEST_CASE("classification corpus") {
  SynthClassificationSpec spec;
  spec.n_per_class = 7;
  spec.freqs = {3, 9, 14};
  spec.noise = 0.0;
  const SeriesDataset ds = synth_classification(spec);
  CHECK(ds.size() == 21);
  CHECK(ds.num_classes == 3);
  std::vector<int> counts(3, 0);
  for (int y : ds.labels) ++counts[y];
  CHECK(counts == std::vector<int>{7, 7, 7});
  // noiseless classes are told apart by their dominant bin
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::vector<double> x(ds.inputs.begin() + i * 96, ds.inputs.begin() + (i + 1) * 96);
    const auto bins = fusad::rfft(x);
    std::size_t best = 0;
    for (std::size_t k = 1; k < bins.size(); ++k)
      if (std::abs(bins[k]) > std::abs(bins[best])) best = k;
    CHECK(static_cast<double>(best) == spec.freqs[ds.labels[i]]);
  }
  const SeriesDataset again = synth_classification(spec);
  CHECK(again.inputs == ds.inputs);
  const auto p = fs::temp_directory_path() / "fusad_test_data_cls.csv";
  save_classification_csv(ds, p);
  const SeriesDataset back = load_classification_csv(p, 1);
  CHECK(back.inputs == ds.inputs);
  CHECK(back.labels == ds.labels);
}

TEST_CASE("anomaly corpus") {
  SynthAnomalySpec spec;
  spec.length = 400;
  spec.spikes = 0;
  const auto clean = synth_anomaly(spec);
  for (int v : clean.series.labels) CHECK(v == 0);

  spec.spikes = 1;
  spec.seed = 9;
  const auto one = synth_anomaly(spec);
  REQUIRE(one.injections.size() == 1);
  const auto at = one.injections[0].start;
  for (std::size_t t = 0; t < 400; ++t) CHECK(one.series.labels[t] == (t == at ? 1 : 0));
  double mean = 0, var = 0;
  for (double v : one.base.values[0]) mean += v / 400;
  for (double v : one.base.values[0]) var += (v - mean) * (v - mean) / 400;
  CHECK(std::abs(one.injections[0].amplitude) == Approx(10.0 * std::sqrt(var)).epsilon(1e-12));

  spec.spikes = 4;
  spec.level_shifts = 2;
  spec.clean_prefix = 100;
  const auto many = synth_anomaly(spec);
  Series undone = many.series;
  for (const auto& inj : many.injections) {
    CHECK(inj.start >= 100);
    for (std::size_t t = inj.start; t < inj.start + inj.length; ++t) undone.values[0][t] -= inj.amplitude;
  }
  for (std::size_t t = 0; t < 400; ++t) CHECK(std::abs(undone.values[0][t] - many.base.values[0][t]) < 1e-12);
  CHECK(synth_anomaly(spec).series.values == many.series.values);
}
