#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fusad/config.hpp"
#include "fusad/error.hpp"

using namespace fusad;
using nlohmann::json;

TEST_CASE("defaults follow the published setup") {
  const FusADConfig m;
  CHECK(m.layers == 2);
  CHECK(m.spectral.use_hanning);
  CHECK(m.spectral.gate_temperature == 0.1);
  CHECK(m.spectral.morlet_center == 6.0);
  CHECK(m.spectral.num_scales == 16);
  const TrainConfig t;
  CHECK(t.lr_pretrain == 1e-3);
  CHECK(t.lr_finetune == 1e-4);
  CHECK(t.batch_size == 128);
  CHECK(t.label_smoothing == 0.1);
  CHECK(MaskSpec{}.ratio == 0.25);
  CHECK(AnomalyOptions{}.percentile == 99.0);
}

TEST_CASE("model config round trips through json") {
  FusADConfig c;
  c.n_channels = 3;
  c.seq_len = 50;
  c.patch = {5, 16, PadPolicy::zero};
  c.spectral.mode = MaskMode::hard_always;
  c.spectral.scales = {1.0, 2.0, 4.0};
  c.ifm.kernel_large = 9;
  c.task = Task::anomaly;
  c.ablation.no_asm_wavelet = true;
  c.mask_token = MaskTokenPolicy::learnable_token;
  c.seed = 77;
  const FusADConfig back = model_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.patch.pad == PadPolicy::zero);
  CHECK(back.spectral.scales == c.spectral.scales);
}

TEST_CASE("unknown and mistyped keys are rejected") {
  CHECK_THROWS_AS(model_config_from_json(json{{"embed_dimm", 8}}), ConfigError);
  CHECK_THROWS_AS(model_config_from_json(json{{"ifm", {{"kernel_mid", "three"}}}}), ConfigError);
  CHECK_THROWS_AS(model_config_from_json(json{{"layers", -1}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(json{{"lr", 0.1}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(json{{"model", {{"task", "regression"}}}}), ConfigError);
  try {
    run_config_from_json(json{{"model", {{"spectral", {{"tau", 1}}}}}});
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("model.spectral.tau") != std::string::npos);
  }
}

TEST_CASE("run config") {
  const json j = {{"seed", 5},
                  {"model", {{"embed_dim", 16}, {"task", "forecasting"}}},
                  {"train", {{"epochs_finetune", 3}, {"seed", 9}}},
                  {"mask", {{"ratio", 0.35}}},
                  {"window", {{"lookback", 48}, {"horizon", 12}}},
                  {"data", {{"train", "x.csv"}}},
                  {"output_dir", "out"}};
  const RunConfig r = run_config_from_json(j);
  CHECK(r.model.seed == 5);
  CHECK(r.train.seed == 9);
  CHECK(r.model.patch.embed_dim == 16);
  CHECK(r.mask.ratio == 0.35);
  CHECK(r.window.horizon == 12);
  CHECK(r.explicit_model_keys.count("embed_dim") == 1);
  CHECK(r.explicit_model_keys.count("seq_len") == 0);
  const RunConfig again = run_config_from_json(to_json(r));
  CHECK(to_json(again) == to_json(r));
}

TEST_CASE("mask token policy must agree") {
  const json j = {{"model", {{"mask_token", "zero"}}}, {"mask", {{"policy", "learnable_token"}}}};
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
}

TEST_CASE("syntax errors name the file") {
  const auto p = std::filesystem::temp_directory_path() / "fusad_bad_config.json";
  std::ofstream(p) << "{\"seed\": 1,,}";
  try {
    load_run_config(p);
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("fusad_bad_config.json") != std::string::npos);
  }
}
