#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fusad/cli.hpp"
#include "fusad/data.hpp"
#include "fusad/model.hpp"
#include "fusad/random.hpp"

using namespace fusad;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fusad");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("fusad_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Drops the wall_time field from every trace line.
std::string trace_without_time(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line, out;
  while (std::getline(in, line)) {
    json j = json::parse(line);
    j.erase("wall_time");
    out += j.dump() + "\n";
  }
  return out;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

json small_classification_config(const fs::path& dir) {
  return {{"seed", 3},
          {"model", {{"patch_len", 8}, {"embed_dim", 8}, {"layers", 1}}},
          {"train", {{"epochs_pretrain", 2}, {"epochs_finetune", 2}, {"batch_size", 8}}},
          {"data", {{"train", (dir / "classification.csv").string()}}},
          {"output_dir", (dir / "out").string()}};
}

}  // namespace

TEST_CASE("synth writes a deterministic corpus and manifest") {
  const fs::path a = fresh_dir("synth_a"), b = fresh_dir("synth_b");
  for (const auto& d : {a, b}) {
    const Run r = cli({"synth", "--kind", "classification", "--n-per-class", "6", "--length", "24", "--channels", "2",
                       "--seed", "4", "-o", d.string()});
    REQUIRE(r.code == 0);
  }
  CHECK(slurp(a / "classification.csv") == slurp(b / "classification.csv"));
  const Manifest m = load_manifest(a / "classification.manifest");
  CHECK(m.task == Task::classification);
  CHECK(m.n_channels == 2);
  const SeriesDataset ds = load_classification_csv(a / "classification.csv", 2);
  CHECK(ds.size() == 12);
  CHECK(ds.length == 24);

  REQUIRE(cli({"synth", "--kind", "anomaly", "--length", "500", "--spikes", "3", "-o", a.string()}).code == 0);
  const Series s = load_series_csv(a / "anomaly.csv");
  CHECK(s.length() == 500);
  CHECK(s.channels() == 1);
  CHECK(load_manifest(a / "anomaly.manifest").task == Task::anomaly);
  CHECK(fs::exists(a / "anomaly_injections.csv"));

  REQUIRE(cli({"synth", "--kind", "forecasting", "--length", "300", "--channels", "3", "-o", a.string()}).code == 0);
  CHECK(load_series_csv(a / "forecasting.csv").channels() == 3);
  CHECK(load_manifest(a / "forecasting.manifest").horizon == 16);

  CHECK(cli({"synth", "--kind", "regression", "-o", a.string()}).code == 1);
}

TEST_CASE("pretrain, finetune and eval") {
  const fs::path d = fresh_dir("pipeline");
  REQUIRE(cli({"synth", "--kind", "classification", "--n-per-class", "10", "--length", "32", "-o", d.string()}).code == 0);
  const fs::path cfg = write_config(d, small_classification_config(d));

  const Run pre = cli({"pretrain", "-c", cfg.string()});
  REQUIRE_MESSAGE(pre.code == 0, pre.err);
  CHECK(fs::exists(d / "out" / "pretrain.ckpt"));
  CHECK(fs::exists(d / "out" / "resolved_config.json"));
  const std::string first = trace_without_time(d / "out" / "pretrain_trace.jsonl");
  CHECK_FALSE(first.empty());
  CHECK(json::parse(pre.out)["command"] == "pretrain");

  SUBCASE("reruns reproduce the trace") {
    REQUIRE(cli({"pretrain", "-c", cfg.string()}).code == 0);
    CHECK(trace_without_time(d / "out" / "pretrain_trace.jsonl") == first);
  }
  SUBCASE("fine-tuning from the pretrained trunk, then a read-only eval") {
    const Run fine = cli({"finetune", "-c", cfg.string(), "--task", "classification", "--from-checkpoint",
                          (d / "out" / "pretrain.ckpt").string()});
    REQUIRE_MESSAGE(fine.code == 0, fine.err);
    const json report = json::parse(fine.out);
    CHECK(report["metrics"].contains("accuracy"));
    CHECK(report["config"]["pretrained_trunk"] == true);
    const fs::path ckpt = d / "out" / "finetune.ckpt";
    const auto before = file_checksum(ckpt);
    const auto stamp = fs::last_write_time(ckpt);
    const Run ev = cli({"eval", "-c", cfg.string(), "--checkpoint", ckpt.string()});
    REQUIRE_MESSAGE(ev.code == 0, ev.err);
    CHECK(file_checksum(ckpt) == before);
    CHECK(fs::last_write_time(ckpt) == stamp);
    CHECK(json::parse(ev.out)["metrics"]["accuracy"] == report["metrics"]["accuracy"]);
  }
  SUBCASE("a task that contradicts the manifest is a configuration error") {
    const Run bad = cli({"finetune", "-c", cfg.string(), "--task", "forecasting"});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("manifest") != std::string::npos);
  }
}

TEST_CASE("missing data names the path") {
  const fs::path d = fresh_dir("missing");
  json j = small_classification_config(d);
  j["data"]["train"] = (d / "nowhere.csv").string();
  const Run r = cli({"pretrain", "-c", write_config(d, j).string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("nowhere.csv") != std::string::npos);
}

TEST_CASE("configuration and usage errors exit with 1") {
  const fs::path d = fresh_dir("badcfg");
  json j = small_classification_config(d);
  j["model"]["embed_dimension"] = 4;
  const Run r = cli({"pretrain", "-c", write_config(d, j).string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("embed_dimension") != std::string::npos);
  CHECK(cli({"pretrain"}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"denoise", "-i", "x.csv", "-o", "y.csv"}).code == 1);
}

TEST_CASE("ablation flags change parameter counts as accounted") {
  const fs::path d = fresh_dir("params");
  const fs::path cfg = write_config(d, {{"model", {{"n_channels", 2}, {"seq_len", 48}, {"patch_len", 8}, {"embed_dim", 8},
                                                   {"num_classes", 3}, {"horizon", 6}}}});
  auto count = [&](std::vector<std::string> flags) {
    std::vector<std::string> args{"params", "-c", cfg.string()};
    args.insert(args.end(), flags.begin(), flags.end());
    const Run r = cli(args);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const json j = json::parse(r.out);
    CHECK(j["accounted"] == j["built"]);
    return j;
  };
  const json full = count({});
  const std::size_t total = full["accounted"];
  const auto comp = full["components"];
  const std::size_t d8 = 8, layers = 2;
  CHECK(count({"--no-ifm"})["accounted"] == total - layers * std::size_t(comp["layer0.ifm"]));
  CHECK(count({"--no-asm"})["accounted"] ==
        total - layers * (std::size_t(comp["layer0.asm.proj"]) + std::size_t(comp["layer0.asm.thresholds"])));
  CHECK(count({"--no-asm-threshold"})["accounted"] == total - layers * 2);
  CHECK(count({"--no-asm-wavelet"})["accounted"] == total - layers * (d8 * d8 + 2 * 0));
  CHECK(count({"--no-asm-fourier"})["accounted"] == total - layers * (d8 * d8 + 2));
  CHECK(count({"--no-pretrain"})["accounted"] == total);
  CHECK(cli({"params", "-c", cfg.string(), "--no-asm-fourier", "--no-asm-wavelet"}).code == 1);
}

TEST_CASE("FUSAD_SEED overrides the configured seed") {
  const fs::path d = fresh_dir("seed");
  REQUIRE(cli({"synth", "--kind", "classification", "--n-per-class", "8", "--length", "32", "-o", d.string()}).code == 0);
  const fs::path cfg = write_config(d, small_classification_config(d));
  setenv("FUSAD_SEED", "41", 1);
  const Run a = cli({"pretrain", "-c", cfg.string()});
  unsetenv("FUSAD_SEED");
  REQUIRE(a.code == 0);
  const json resolved = json::parse(slurp(d / "out" / "resolved_config.json"));
  CHECK(resolved["seed"] == 41);
  CHECK(resolved["model"]["seed"] == 41);
  CHECK(resolved["train"]["seed"] == 41);
  setenv("FUSAD_SEED", "forty", 1);
  CHECK(cli({"pretrain", "-c", cfg.string()}).code == 1);
  unsetenv("FUSAD_SEED");
}

TEST_CASE("denoise") {
  const fs::path d = fresh_dir("denoise");
  Series clean, noisy;
  clean.names = noisy.names = {"x"};
  clean.values = noisy.values = {std::vector<double>(512)};
  Rng rng(8);
  for (std::size_t t = 0; t < 512; ++t) {
    clean.values[0][t] = std::sqrt(2.0) * std::sin(2 * 3.141592653589793 * 21.0 * t / 512);
    noisy.values[0][t] = clean.values[0][t] + rng.normal();
  }
  save_series_csv(clean, d / "clean.csv");
  save_series_csv(noisy, d / "noisy.csv");

  const Run fit = cli({"denoise", "-i", (d / "noisy.csv").string(), "-o", (d / "den.csv").string(), "--fit",
                       "--reference", (d / "clean.csv").string()});
  REQUIRE_MESSAGE(fit.code == 0, fit.err);
  const json ch = json::parse(fit.out)["channels"][0];
  CHECK(double(ch["snr_gain_db"]) >= 10.0);
  CHECK(fit.err.find("SNR") != std::string::npos);

  std::istringstream spec(slurp(d / "den.csv.spectrum.csv"));
  std::string line;
  std::getline(spec, line);
  CHECK(line == "channel,bin,frequency,power,kept");
  int rows = 0;
  while (std::getline(spec, line)) ++rows;
  CHECK(rows == 257);

  const Run pass = cli({"denoise", "-i", (d / "noisy.csv").string(), "-o", (d / "pass.csv").string(), "--theta1",
                        "-1e9", "--theta2", "1e9"});
  REQUIRE(pass.code == 0);
  const Series out = load_series_csv(d / "pass.csv");
  for (std::size_t t = 0; t < 512; ++t) CHECK(std::abs(out.values[0][t] - noisy.values[0][t]) < 1e-9);

  const auto before = slurp(d / "noisy.csv");
  CHECK(cli({"denoise", "-i", (d / "noisy.csv").string(), "-o", (d / "noisy.csv").string(), "--fit"}).code == 1);
  CHECK(slurp(d / "noisy.csv") == before);
}
