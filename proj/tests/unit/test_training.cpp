#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fusad/error.hpp"
#include "fusad/training.hpp"
#include "oracles.hpp"

using namespace fusad;
using doctest::Approx;

namespace {

FusADConfig small_model(Task task, std::uint64_t seed = 3) {
  FusADConfig c;
  c.seq_len = 32;
  c.patch = {8, 8};
  c.layers = 1;
  c.task = task;
  c.num_classes = task == Task::classification ? 2 : 0;
  c.horizon = task == Task::forecasting ? 4 : 0;
  c.seed = seed;
  return c;
}

SeriesDataset small_corpus(std::size_t per_class = 12, double noise = 0.2, std::uint64_t seed = 1) {
  SynthClassificationSpec s;
  s.n_per_class = per_class;
  s.length = 32;
  s.freqs = {2, 6};
  s.noise = noise;
  s.seed = seed;
  return synth_classification(s);
}

}  // namespace

TEST_CASE("masked mse") {
  const Tensor x({3}, {1, 2, 3}), zero = Tensor::zeros({3});
  CHECK(masked_mse(x, x, {1, 1, 1}).item() == 0.0);
  CHECK(masked_mse(x, zero, {1, 0, 1}).item() == 5.0);
  Rng rng(1);
  const Tensor a = oracle::random_tensor({2, 5}, rng), b = oracle::random_tensor({2, 5}, rng);
  CHECK(masked_mse(a, b, std::vector<double>(10, 1.0)).item() == Approx(mse_loss(a, b).item()).epsilon(1e-14));
  CHECK_THROWS_AS(masked_mse(x, zero, {0, 0, 0}), ContractError);
  Tensor p = oracle::random_tensor({2, 5}, rng, 1.0, true);
  std::vector<double> lambda = {1, 0, 1, 1, 0, 0, 1, 0, 0, 1};
  CHECK(oracle::gradient_error({p}, [&] { return masked_mse(a, p, lambda); }) < 1e-6);
}

TEST_CASE("label smoothing cross-entropy") {
  SUBCASE("eps = 0 is plain cross-entropy") {
    const Tensor logits({2, 3}, {0.5, -1.0, 2.0, 1.0, 1.0, -0.5});
    const std::vector<int> y = {2, 0};
    double ce = 0;
    for (int b = 0; b < 2; ++b) {
      double z = 0;
      for (int j = 0; j < 3; ++j) z += std::exp(logits.at({std::size_t(b), std::size_t(j)}));
      ce -= std::log(std::exp(logits.at({std::size_t(b), std::size_t(y[b])})) / z) / 2;
    }
    CHECK(label_smooth_ce(logits, y, 0.0).item() == Approx(ce).epsilon(1e-14));
  }
  SUBCASE("uniform logits give log k") {
    for (double eps : {0.0, 0.1, 0.5})
      CHECK(label_smooth_ce(Tensor::full({1, 5}, 0.3), {3}, eps).item() == Approx(std::log(5.0)).epsilon(1e-14));
  }
  SUBCASE("hand-evaluated two-class case") {
    // y = [0.95, 0.05]; log softmax = [2 - ln(1 + e^2), -ln(1 + e^2)]
    CHECK(label_smooth_ce(Tensor({1, 2}, {2.0, 0.0}), {0}, 0.1).item() == Approx(0.22692801104297222).epsilon(1e-14));
  }
  SUBCASE("smoothed targets") {
    const auto y = smooth_labels(1, 4, 0.2);
    const std::vector<double> expected = {0.05, 0.85, 0.05, 0.05};
    for (std::size_t i = 0; i < 4; ++i) CHECK(y[i] == Approx(expected[i]).epsilon(1e-15));
  }
  SUBCASE("gradient") {
    Rng rng(2);
    Tensor logits = oracle::random_tensor({3, 4}, rng, 2.0, true);
    CHECK(oracle::gradient_error({logits}, [&] { return label_smooth_ce(logits, {0, 3, 1}, 0.1); }) < 1e-6);
  }
  CHECK_THROWS_AS(label_smooth_ce(Tensor::zeros({1, 2}), {2}, 0.1), ContractError);
}

TEST_CASE("patch masking") {
  CHECK(masked_patch_count(0.01, 2) == 1);
  CHECK(masked_patch_count(0.99, 2) == 1);
  CHECK(masked_patch_count(0.25, 12) == 3);
  CHECK_THROWS_AS(masked_patch_count(0.25, 1), ConfigError);
  Rng rng(3);
  const auto two = sample_patch_mask(50, 2, 0.01, rng);
  for (std::size_t r = 0; r < 50; ++r) CHECK(two[2 * r] + two[2 * r + 1] == 1);
  const auto m = sample_patch_mask(20, 12, 0.25, rng);
  std::vector<int> hits(12, 0);
  for (std::size_t r = 0; r < 20; ++r) {
    int count = 0;
    for (std::size_t z = 0; z < 12; ++z) {
      count += m[r * 12 + z];
      hits[z] += m[r * 12 + z];
    }
    CHECK(count == 3);
  }
  const auto lambda = timestep_mask({0, 1, 1, 0}, 2, 2, 4, 6);
  CHECK(lambda == std::vector<double>{0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 0, 0});
}

TEST_CASE("train configuration checks") {
  TrainConfig c;
  CHECK(effective_weight_decay(c, Task::classification) == 1e-4);
  CHECK(effective_weight_decay(c, Task::forecasting) == 1e-6);
  c.batch_size = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.label_smoothing = 1.5;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("pretraining is deterministic and descends") {
  const SeriesDataset data = small_corpus(16);
  TrainConfig tc;
  tc.epochs_pretrain = 6;
  tc.batch_size = 8;
  tc.seed = 5;
  FusADModel a(small_model(Task::classification)), b(small_model(Task::classification));
  const auto ra = pretrain(a, data, {}, tc);
  const auto rb = pretrain(b, data, {}, tc);
  REQUIRE(ra.trace.size() == 6);
  CHECK_FALSE(ra.aborted);
  for (std::size_t i = 0; i < 6; ++i) CHECK(ra.trace[i].loss == rb.trace[i].loss);
  CHECK(ra.trace.back().loss < ra.trace.front().loss);
  MaskSpec learnable;
  learnable.policy = MaskTokenPolicy::learnable_token;
  CHECK_THROWS_AS(pretrain(a, data, learnable, tc), ConfigError);
}

TEST_CASE("classification fine-tuning separates the toy classes") {
  const SeriesDataset data = small_corpus(20, 0.3);
  TrainConfig tc;
  tc.epochs_finetune = 15;
  tc.batch_size = 8;
  tc.lr_finetune = 2e-3;
  FusADModel m(small_model(Task::classification));
  const auto r = finetune(m, data, data, Task::classification, tc);
  CHECK(r.trace.size() == 15);
  CHECK(r.best_metric >= 0.95);
  CHECK(validation_metric(m, data, Task::classification) == r.best_metric);
}

TEST_CASE("fine-tuning one head leaves the others untouched") {
  FusADConfig c = small_model(Task::classification);
  c.horizon = 4;
  FusADModel m(c);
  const auto fore_before = m.find("head.fore.weight")->value.clone();
  const auto ano_before = m.find("head.ano.weight")->value.clone();
  TrainConfig tc;
  tc.epochs_finetune = 2;
  tc.batch_size = 8;
  finetune(m, small_corpus(8), SeriesDataset{}, Task::classification, tc);
  const auto fore = m.find("head.fore.weight")->value, ano = m.find("head.ano.weight")->value;
  CHECK(std::equal(fore.data().begin(), fore.data().end(), fore_before.data().begin()));
  CHECK(std::equal(ano.data().begin(), ano.data().end(), ano_before.data().begin()));
}

TEST_CASE("forecasting fine-tuning beats repeating the last value") {
  SynthSineSpec s;
  s.length = 400;
  s.periods = {16};
  Series series = synth_sine(s);
  const SeriesDataset all = forecasting_dataset(series, {32, 4, 2});
  std::vector<std::size_t> fit, test;
  for (std::size_t i = 0; i < all.size(); ++i) (i < all.size() * 3 / 4 ? fit : test).push_back(i);
  const SeriesDataset train = all.subset(fit), held = all.subset(test);
  FusADModel m(small_model(Task::forecasting));
  TrainConfig tc;
  tc.epochs_finetune = 15;
  tc.batch_size = 16;
  tc.lr_finetune = 2e-3;
  finetune(m, train, held, Task::forecasting, tc);
  std::vector<double> naive;
  for (std::size_t i = 0; i < held.size(); ++i)
    for (std::size_t h = 0; h < 4; ++h) naive.push_back(held.inputs[i * 32 + 31]);
  CHECK(validation_metric(m, held, Task::forecasting) < mse_loss(Tensor({naive.size()}, naive), Tensor({held.targets.size()}, held.targets)).item());
}

TEST_CASE("anomaly fine-tuning and series scoring") {
  SynthAnomalySpec spec;
  spec.length = 600;
  spec.period = 16;
  spec.spikes = 1;
  spec.clean_prefix = 400;
  spec.seed = 2;
  const auto synth = synth_anomaly(spec);
  const Series train = slice_series(synth.series, 0, 400), test = slice_series(synth.series, 400, 600);
  FusADModel m(small_model(Task::anomaly));
  TrainConfig tc;
  tc.epochs_finetune = 4;
  tc.batch_size = 16;
  tc.lr_finetune = 2e-3;
  tc.outlier_augmentation = 1.0;
  finetune(m, anomaly_dataset(train, {32, 0, 4}), SeriesDataset{}, Task::anomaly, tc);
  const auto scores = score_series(m, test);
  REQUIRE(scores.size() == 200);
  const auto top = std::max_element(scores.begin(), scores.end()) - scores.begin();
  CHECK(test.labels[static_cast<std::size_t>(top)] == 1);
}

TEST_CASE("score_series averages overlapping windows") {
  FusADModel m(small_model(Task::anomaly));
  Series s;
  s.names = {"x"};
  s.values = {std::vector<double>(70)};
  Rng rng(4);
  for (double& v : s.values[0]) v = rng.normal();
  const auto scores = score_series(m, s);
  REQUIRE(scores.size() == 70);
  auto window = [&](std::size_t start) {
    return anomaly_scores(m, Tensor({1, 1, 32}, std::vector<double>(s.values[0].begin() + start, s.values[0].begin() + start + 32)));
  };
  const Tensor w0 = window(0), w1 = window(32), w2 = window(38);
  CHECK(scores[5] == Approx(w0.data()[5]).epsilon(1e-12));
  CHECK(scores[33] == Approx(w1.data()[1]).epsilon(1e-12));
  CHECK(scores[40] == Approx(0.5 * (w1.data()[8] + w2.data()[2])).epsilon(1e-12));
  CHECK(scores[69] == Approx(w2.data()[31]).epsilon(1e-12));
  Series tiny = slice_series(s, 0, 20);
  CHECK_THROWS_AS(score_series(m, tiny), InputError);
}

TEST_CASE("divergence restores the last good parameters") {
  FusADModel m(small_model(Task::classification));
  const SeriesDataset data = small_corpus(8);
  TrainConfig tc;
  tc.epochs_finetune = 3;
  tc.lr_finetune = 1e300;
  tc.batch_size = 8;
  const auto before = m.find("head.cls.weight")->value.clone();
  const auto r = finetune(m, data, SeriesDataset{}, Task::classification, tc);
  CHECK(r.aborted);
  CHECK_FALSE(r.diagnostic.empty());
  for (const auto& p : m.parameters()) CHECK(p.value.all_finite());
  if (r.trace.empty()) {
    const auto after = m.find("head.cls.weight")->value;
    CHECK(std::equal(after.data().begin(), after.data().end(), before.data().begin()));
  }
}

TEST_CASE("trace files") {
  const std::vector<EpochRecord> trace = {{1, 0.5, 0.5, 0.1}, {2, 0.25, 0.3, 0.2}};
  const auto dir = std::filesystem::temp_directory_path();
  write_trace_jsonl(trace, dir / "fusad_trace.jsonl");
  write_trace_csv(trace, dir / "fusad_trace.csv");
  std::ifstream j(dir / "fusad_trace.jsonl"), c(dir / "fusad_trace.csv");
  std::string line;
  int lines = 0;
  while (std::getline(j, line)) {
    const auto rec = nlohmann::json::parse(line);
    CHECK(rec.contains("epoch"));
    CHECK(rec.contains("wall_time"));
    ++lines;
  }
  CHECK(lines == 2);
  std::getline(c, line);
  CHECK(line == "epoch,loss,metric,wall_time");
}

TEST_CASE("a pretrained trunk helps when labels are scarce") {
  // 10% of a 200-sample corpus is labelled; pretraining sees all of it unlabelled.
  double scratch_total = 0, pretrained_total = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SynthClassificationSpec cs;
    cs.n_per_class = 100;
    cs.noise = 1.0;
    cs.seed = seed;
    const SeriesDataset all = synth_classification(cs);
    std::vector<std::size_t> labelled, rest;
    for (std::size_t i = 0; i < all.size(); ++i) (i % 10 < 2 ? labelled : rest).push_back(i);
    const SeriesDataset fit = all.subset(labelled), val = all.subset(rest);
    FusADConfig c;
    c.patch = {8, 32};
    c.num_classes = 2;
    c.seed = seed;
    TrainConfig tc;
    tc.epochs_pretrain = 10;
    tc.epochs_finetune = 20;
    tc.batch_size = 16;
    tc.lr_finetune = 1e-3;
    tc.seed = seed;
    FusADModel scratch(c), pretrained(c);
    finetune(scratch, fit, SeriesDataset{}, Task::classification, tc);
    pretrain(pretrained, all, {}, tc);
    finetune(pretrained, fit, SeriesDataset{}, Task::classification, tc);
    const double a = validation_metric(scratch, val, Task::classification);
    const double b = validation_metric(pretrained, val, Task::classification);
    MESSAGE("seed " << seed << ": scratch " << a << ", pretrained " << b);
    scratch_total += a;
    pretrained_total += b;
  }
  CHECK(pretrained_total >= scratch_total);
}
