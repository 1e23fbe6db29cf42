#include "fusad/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "fusad/config.hpp"
#include "fusad/data.hpp"
#include "fusad/error.hpp"
#include "fusad/metrics.hpp"
#include "fusad/model.hpp"
#include "fusad/spectral.hpp"
#include "fusad/training.hpp"

namespace fusad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Data preparation shared by pretrain / finetune / eval.

struct Prepared {
  Task task = Task::forecasting;
  SeriesDataset fit;
  SeriesDataset val;
  SeriesDataset test;
  Series calibration;  // anomaly: clean tail of the training region
  Series test_series;  // anomaly: scored series
  std::string eval_split = "test";
};

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is not set in the configuration");
  if (!fs::exists(path)) throw InputError(what + " not found: " + path);
}

std::optional<Manifest> find_manifest(const RunConfig& run) {
  if (!run.data.manifest.empty()) {
    require_file(run.data.manifest, "manifest");
    return load_manifest(run.data.manifest);
  }
  fs::path guess = fs::path(run.data.train).replace_extension(".manifest");
  if (fs::exists(guess)) return load_manifest(guess);
  return std::nullopt;
}

Task resolve_task(const RunConfig& run, const std::optional<Manifest>& manifest, const std::optional<Task>& requested) {
  Task task = run.model.task;
  if (requested) {
    task = *requested;
  } else if (!run.explicit_model_keys.count("task") && manifest) {
    task = manifest->task;
  }
  if (manifest && manifest->task != task) {
    throw ConfigError("task " + to_string(task) + " does not match the dataset manifest task " +
                      to_string(manifest->task));
  }
  return task;
}

void append(SeriesDataset& into, const SeriesDataset& from) {
  into.inputs.insert(into.inputs.end(), from.inputs.begin(), from.inputs.end());
  into.labels.insert(into.labels.end(), from.labels.begin(), from.labels.end());
  into.targets.insert(into.targets.end(), from.targets.begin(), from.targets.end());
  into.point_labels.insert(into.point_labels.end(), from.point_labels.begin(), from.point_labels.end());
}

std::size_t series_split(const Series& s, const std::optional<Manifest>& manifest) {
  std::size_t split = manifest && manifest->split_train_end > 0 ? manifest->split_train_end
                                                                  : chronological_split(s.length(), 0.8);
  if (split == 0 || split > s.length()) {
    throw InputError("split_train_end " + std::to_string(split) + " is outside the series length " +
                     std::to_string(s.length()));
  }
  return split;
}

Prepared prepare(const RunConfig& run, const std::optional<Task>& requested) {
  require_file(run.data.train, "data.train");
  if (!run.data.test.empty()) require_file(run.data.test, "data.test");
  const auto manifest = find_manifest(run);
  Prepared p;
  p.task = resolve_task(run, manifest, requested);
  const double val_fraction = run.train.val_fraction;

  if (p.task == Task::classification) {
    std::size_t channels = run.model.n_channels;
    if (manifest && manifest->n_channels > 0) channels = manifest->n_channels;
    SeriesDataset all = load_classification_csv(run.data.train, channels);
    SeriesDataset train = all;
    if (!run.data.test.empty()) {
      p.test = load_classification_csv(run.data.test, channels);
    } else if (manifest && manifest->split_train_end > 0 && manifest->split_train_end < all.size()) {
      std::vector<std::size_t> head, tail;
      for (std::size_t i = 0; i < all.size(); ++i) (i < manifest->split_train_end ? head : tail).push_back(i);
      train = all.subset(head);
      p.test = all.subset(tail);
    }
    std::vector<std::size_t> fit_idx, val_idx;
    stratified_split(train.labels, val_fraction, run.train.seed, fit_idx, val_idx);
    p.fit = train.subset(fit_idx);
    p.val = train.subset(val_idx);
    p.fit.num_classes = p.val.num_classes = p.test.num_classes = std::max(all.num_classes, p.test.num_classes);
    const Normalizer z = fit_zscore(p.fit);
    z.apply(p.fit);
    z.apply(p.val);
    if (p.test.size() > 0) z.apply(p.test);
    if (p.test.size() == 0) p.eval_split = "val";
    return p;
  }

  Series s = load_series_csv(run.data.train);
  std::optional<Series> test_file;
  if (!run.data.test.empty()) test_file = load_series_csv(run.data.test);
  const std::size_t split = test_file ? s.length() : series_split(s, manifest);
  const Normalizer z = fit_zscore(s, split);
  z.apply(s);
  if (test_file) z.apply(*test_file);
  WindowSpec w = run.window;
  const std::size_t inner = chronological_split(split, 1.0 - val_fraction);

  if (p.task == Task::forecasting) {
    if (w.horizon == 0) w.horizon = manifest && manifest->horizon > 0 ? manifest->horizon : run.model.horizon;
    if (w.horizon == 0) throw ConfigError("forecasting needs window.horizon (or a manifest horizon) of at least 1");
    p.fit = forecasting_dataset(slice_series(s, 0, inner), w);
    if (split > inner && split - inner >= w.horizon && inner >= w.lookback) {
      const Series tail = slice_series(s, inner - w.lookback, split);
      if (tail.length() >= w.lookback + w.horizon) p.val = forecasting_dataset(tail, w);
    }
    if (test_file) {
      p.test = forecasting_dataset(*test_file, w);
    } else if (s.length() >= split + w.horizon && split >= w.lookback) {
      p.test = forecasting_dataset(slice_series(s, split - w.lookback, s.length()), w);
    }
    if (p.test.size() == 0) p.eval_split = "val";
    return p;
  }

  // anomaly
  p.fit = anomaly_dataset(slice_series(s, 0, inner), w);
  p.calibration = slice_series(s, inner, split);
  if (p.calibration.length() < w.lookback) {
    throw InputError("anomaly calibration split has " + std::to_string(p.calibration.length()) +
                     " steps, fewer than the lookback " + std::to_string(w.lookback) + "; raise train.val_fraction");
  }
  p.val = anomaly_dataset(p.calibration, WindowSpec{w.lookback, 0, w.lookback});
  p.test_series = test_file ? *test_file : slice_series(s, split, s.length());
  if (p.test_series.length() < w.lookback) {
    p.test_series = p.calibration;
    p.eval_split = "calibration";
  }
  return p;
}

FusADConfig resolve_model(const RunConfig& run, const Prepared& p) {
  FusADConfig c = run.model;
  c.task = p.task;
  auto infer = [&](const std::string& key, std::size_t& field, std::size_t value) {
    if (run.explicit_model_keys.count(key) && field != value) {
      throw ConfigError("model." + key + " = " + std::to_string(field) + " but the data implies " +
                        std::to_string(value));
    }
    field = value;
  };
  infer("n_channels", c.n_channels, p.fit.n_channels);
  infer("seq_len", c.seq_len, p.fit.length);
  if (p.task == Task::classification) infer("num_classes", c.num_classes, p.fit.num_classes);
  if (p.task == Task::forecasting) infer("horizon", c.horizon, p.fit.horizon);
  validate(c);
  return c;
}

void check_model_matches(const FusADModel& m, const Prepared& p) {
  const auto& c = m.config();
  if (c.n_channels != p.fit.n_channels || c.seq_len != p.fit.length) {
    throw ConfigError("checkpoint model expects [" + std::to_string(c.n_channels) + ", " + std::to_string(c.seq_len) +
                      "] inputs but the data gives [" + std::to_string(p.fit.n_channels) + ", " +
                      std::to_string(p.fit.length) + "]");
  }
  if (p.task == Task::forecasting && c.horizon != p.fit.horizon) {
    throw ConfigError("checkpoint horizon " + std::to_string(c.horizon) + " differs from the data horizon " +
                      std::to_string(p.fit.horizon));
  }
}

MetricReport evaluate(FusADModel& m, const Prepared& p, const RunConfig& run) {
  MetricReport r;
  r.task = p.task;
  r.config = to_json(run);
  r.config["model"] = to_json(m.config());
  r.config["eval_split"] = p.eval_split;
  switch (p.task) {
    case Task::classification: {
      const SeriesDataset& ds = p.test.size() > 0 ? p.test : p.val;
      if (ds.size() == 0) throw InputError("no evaluation samples");
      const auto pred = argmax_rows(predict(m, ds, p.task), m.config().num_classes);
      r.metrics["accuracy"] = accuracy(pred, ds.labels);
      r.metrics["samples"] = static_cast<double>(ds.size());
      for (std::size_t i = 0; i < pred.size(); ++i) r.per_sample.push_back(pred[i] == ds.labels[i] ? 1.0 : 0.0);
      break;
    }
    case Task::forecasting: {
      const SeriesDataset& ds = p.test.size() > 0 ? p.test : p.val;
      if (ds.size() == 0) throw InputError("no evaluation windows; the series is too short for lookback + horizon");
      const auto pred = predict(m, ds, p.task);
      const auto err = mse_mae(pred, ds.targets);
      std::vector<double> naive;
      naive.reserve(ds.targets.size());
      for (std::size_t i = 0; i < ds.size() * ds.n_channels; ++i) {
        const double last = ds.inputs[i * ds.length + ds.length - 1];
        naive.insert(naive.end(), ds.horizon, last);
      }
      r.metrics["mse"] = err.mse;
      r.metrics["mae"] = err.mae;
      r.metrics["naive_last_value_mse"] = mse_mae(naive, ds.targets).mse;
      r.metrics["windows"] = static_cast<double>(ds.size());
      const std::size_t per = ds.n_channels * ds.horizon;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        double e = 0;
        for (std::size_t j = 0; j < per; ++j) e += std::pow(pred[i * per + j] - ds.targets[i * per + j], 2);
        r.per_sample.push_back(e / static_cast<double>(per));
      }
      break;
    }
    case Task::anomaly: {
      const double threshold = anomaly_threshold(score_series(m, p.calibration), run.anomaly.percentile);
      const auto scores = score_series(m, p.test_series);
      const auto labels = label_scores(scores, threshold);
      r.metrics["threshold"] = threshold;
      double positives = 0;
      for (int l : labels) positives += l;
      r.metrics["predicted_positives"] = positives;
      if (!p.test_series.labels.empty()) {
        const Prf1 raw = prf1(labels, p.test_series.labels, false);
        const Prf1 adj = prf1(labels, p.test_series.labels, true);
        r.metrics["precision_raw"] = raw.precision;
        r.metrics["recall_raw"] = raw.recall;
        r.metrics["f1_raw"] = raw.f1;
        r.metrics["precision_adjusted"] = adj.precision;
        r.metrics["recall_adjusted"] = adj.recall;
        r.metrics["f1_adjusted"] = adj.f1;
        const Prf1& main = run.anomaly.point_adjust ? adj : raw;
        r.metrics["precision"] = main.precision;
        r.metrics["recall"] = main.recall;
        r.metrics["f1"] = main.f1;
      }
      r.per_sample = scores;
      break;
    }
  }
  return r;
}

void write_json(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json resolved(const RunConfig& run, const FusADConfig& model) {
  json j = to_json(run);
  j["model"] = to_json(model);
  return j;
}

// ---------------------------------------------------------------------------

struct CommonOptions {
  std::string config;
  std::string output_dir;
  Ablation ablation;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool config_required) {
  auto* c = cmd->add_option("-c,--config", o.config, "JSON run configuration");
  if (config_required) c->required();
  cmd->add_option("-o,--output-dir", o.output_dir, "Override output_dir");
}

void add_ablation_flags(CLI::App* cmd, Ablation& a) {
  cmd->add_flag("--no-asm", a.no_asm, "Bypass the adaptive spectral module");
  cmd->add_flag("--no-asm-fourier", a.no_asm_fourier, "Drop the Fourier branch of the ASM");
  cmd->add_flag("--no-asm-threshold", a.no_asm_threshold, "Keep every frequency bin (no learnable thresholds)");
  cmd->add_flag("--no-asm-wavelet", a.no_asm_wavelet, "Drop the wavelet branch of the ASM");
  cmd->add_flag("--no-ifm", a.no_ifm, "Bypass the information fusion module");
  cmd->add_flag("--no-pretrain", a.no_pretrain, "Train from scratch even when a checkpoint is given");
}

RunConfig load_run(const CommonOptions& o) {
  RunConfig run = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (!o.output_dir.empty()) run.output_dir = o.output_dir;
  Ablation& a = run.model.ablation;
  a.no_asm = a.no_asm || o.ablation.no_asm;
  a.no_asm_fourier = a.no_asm_fourier || o.ablation.no_asm_fourier;
  a.no_asm_threshold = a.no_asm_threshold || o.ablation.no_asm_threshold;
  a.no_asm_wavelet = a.no_asm_wavelet || o.ablation.no_asm_wavelet;
  a.no_ifm = a.no_ifm || o.ablation.no_ifm;
  a.no_pretrain = a.no_pretrain || o.ablation.no_pretrain;
  if (const char* env = std::getenv("FUSAD_SEED"); env && *env) {
    std::uint64_t seed = 0;
    const std::string text(env);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw ConfigError("FUSAD_SEED must be a non-negative integer, got '" + text + "'");
    }
    run.seed = seed;
    run.model.seed = seed;
    run.train.seed = seed;
  }
  return run;
}

std::optional<Task> optional_task(const std::string& name) {
  if (name.empty()) return std::nullopt;
  return task_from_string(name);
}

int cmd_pretrain(const CommonOptions& o, std::ostream& out, std::ostream& err) {
  RunConfig run = load_run(o);
  const Prepared p = prepare(run, std::nullopt);
  const FusADConfig cfg = resolve_model(run, p);
  FusADModel model(cfg);
  SeriesDataset data = p.fit;
  append(data, p.val);
  const TrainResult res = pretrain(model, data, run.mask, run.train);

  const fs::path dir = run.output_dir;
  write_json(resolved(run, cfg), dir / "resolved_config.json");
  write_trace_jsonl(res.trace, dir / "pretrain_trace.jsonl");
  write_trace_csv(res.trace, dir / "pretrain_trace.csv");
  const fs::path ckpt = dir / "pretrain.ckpt";
  save_model(model, ckpt);
  json report{{"command", "pretrain"},
              {"checkpoint", ckpt.string()},
              {"epochs", res.trace.size()},
              {"parameters", model.parameter_count()},
              {"aborted", res.aborted}};
  if (!res.trace.empty()) {
    report["first_loss"] = res.trace.front().loss;
    report["final_loss"] = res.trace.back().loss;
  }
  out << report.dump() << '\n';
  if (res.aborted) {
    err << "error: " << res.diagnostic << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_finetune(const CommonOptions& o, const std::string& task_name, const std::string& from, std::ostream& out,
                 std::ostream& err) {
  RunConfig run = load_run(o);
  const Prepared p = prepare(run, optional_task(task_name));
  const FusADConfig cfg = resolve_model(run, p);
  FusADModel model(cfg);
  bool loaded = false;
  if (!from.empty()) {
    if (cfg.ablation.no_pretrain) {
      err << "note: --no-pretrain set, ignoring checkpoint " << from << "\n";
    } else {
      require_file(from, "checkpoint");
      load_trunk(model, from);
      loaded = true;
    }
  }
  const TrainResult res = finetune(model, p.fit, p.val, p.task, run.train);

  const fs::path dir = run.output_dir;
  write_json(resolved(run, cfg), dir / "resolved_config.json");
  write_trace_jsonl(res.trace, dir / "finetune_trace.jsonl");
  write_trace_csv(res.trace, dir / "finetune_trace.csv");
  const fs::path ckpt = dir / "finetune.ckpt";
  save_model(model, ckpt);
  if (res.aborted) {
    out << json{{"command", "finetune"}, {"checkpoint", ckpt.string()}, {"aborted", true}}.dump() << '\n';
    err << "error: " << res.diagnostic << "\n";
    return kExitNumerical;
  }
  MetricReport report = evaluate(model, p, run);
  report.config["pretrained_trunk"] = loaded;
  report.config["best_epoch"] = res.best_epoch;
  report.config["checkpoint"] = ckpt.string();
  const json j = report.to_json();
  write_json(j, dir / "report.json");
  out << j.dump() << '\n';
  return kExitOk;
}

int cmd_eval(const CommonOptions& o, const std::string& task_name, const std::string& checkpoint, std::ostream& out) {
  RunConfig run = load_run(o);
  require_file(checkpoint, "checkpoint");
  FusADModel model = load_model(checkpoint);
  const auto requested = optional_task(task_name);
  if (requested && *requested != model.config().task) {
    throw ConfigError("--task " + task_name + " does not match the checkpoint's task " +
                      to_string(model.config().task));
  }
  run.model.task = model.config().task;
  run.explicit_model_keys.insert("task");
  const Prepared p = prepare(run, model.config().task);
  check_model_matches(model, p);
  MetricReport report = evaluate(model, p, run);
  report.config["checkpoint"] = checkpoint;
  const json j = report.to_json();
  write_json(j, fs::path(run.output_dir) / "eval_report.json");
  out << j.dump() << '\n';
  return kExitOk;
}

struct DenoiseOptions {
  std::string input;
  std::string output;
  std::string spectrum;
  std::string reference;
  std::optional<double> theta1;
  std::optional<double> theta2;
  bool fit = false;
  bool hanning = false;
};

double snr_db(const std::vector<double>& signal, const std::vector<double>& reference) {
  double p_ref = 0;
  double p_err = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    p_ref += reference[i] * reference[i];
    p_err += (signal[i] - reference[i]) * (signal[i] - reference[i]);
  }
  return 10.0 * std::log10(p_ref / std::max(p_err, 1e-300));
}

int cmd_denoise(const DenoiseOptions& o, std::ostream& out, std::ostream& err) {
  if (!o.fit && !(o.theta1 && o.theta2)) throw ConfigError("denoise needs --theta1 and --theta2, or --fit");
  if (o.fit && (o.theta1 || o.theta2)) throw ConfigError("--fit and explicit thresholds are exclusive");
  require_file(o.input, "input");
  if (fs::exists(o.output) && fs::equivalent(o.input, o.output)) {
    throw ConfigError("output would overwrite the input file " + o.input);
  }
  const Series in = load_series_csv(o.input);
  std::optional<Series> reference;
  if (!o.reference.empty()) {
    require_file(o.reference, "reference");
    reference = load_series_csv(o.reference);
    if (reference->channels() != in.channels() || reference->length() != in.length()) {
      throw InputError("reference series shape differs from the input");
    }
  }
  Series result = in;
  const fs::path spectrum_path = o.spectrum.empty() ? fs::path(o.output + ".spectrum.csv") : fs::path(o.spectrum);
  if (spectrum_path.has_parent_path()) fs::create_directories(spectrum_path.parent_path());
  std::ofstream spec(spectrum_path);
  if (!spec) throw InputError("cannot write " + spectrum_path.string());
  spec.precision(17);
  spec << "channel,bin,frequency,power,kept\n";
  json channels = json::array();
  const double length = static_cast<double>(in.length());
  for (std::size_t n = 0; n < in.channels(); ++n) {
    const auto [lo, hi] = o.fit ? fit_band_thresholds(in.values[n], o.hanning) : std::pair{*o.theta1, *o.theta2};
    const DenoiseResult d = denoise_signal(in.values[n], lo, hi, o.hanning);
    result.values[n] = d.signal;
    std::size_t kept = 0;
    for (std::size_t k = 0; k < d.power.size(); ++k) {
      spec << in.names[n] << ',' << k << ',' << static_cast<double>(k) / length << ',' << d.power[k] << ','
           << (d.kept[k] ? 1 : 0) << '\n';
      kept += d.kept[k];
    }
    json c{{"channel", in.names[n]}, {"theta1", lo}, {"theta2", hi}, {"kept_bins", kept}, {"bins", d.power.size()}};
    if (reference) {
      const double before = snr_db(in.values[n], reference->values[n]);
      const double after = snr_db(d.signal, reference->values[n]);
      c["snr_in_db"] = before;
      c["snr_out_db"] = after;
      c["snr_gain_db"] = after - before;
      err << "channel " << in.names[n] << ": SNR " << before << " dB -> " << after << " dB (gain " << after - before
          << " dB)\n";
    }
    channels.push_back(c);
  }
  save_series_csv(result, o.output);
  out << json{{"command", "denoise"}, {"output", o.output}, {"spectrum", spectrum_path.string()}, {"channels", channels}}
             .dump()
      << '\n';
  return kExitOk;
}

struct SynthOptions {
  std::string kind;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::size_t length = 0;
  std::size_t channels = 1;
  std::size_t n_per_class = 50;
  std::vector<double> freqs{3.0, 9.0};
  double noise = -1.0;
  double period = 24.0;
  std::size_t horizon = 16;
  std::size_t spikes = 10;
  double spike_amplitude = 10.0;
  std::size_t level_shifts = 0;
  double train_fraction = -1.0;
};

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  const Task task = task_from_string(o.kind);
  const fs::path dir = o.out_dir;
  const fs::path csv = dir / (o.kind + ".csv");
  const fs::path manifest_path = dir / (o.kind + ".manifest");
  Manifest m;
  m.task = task;
  m.n_channels = o.channels;
  json report{{"command", "synth"}, {"kind", o.kind}, {"csv", csv.string()}, {"manifest", manifest_path.string()}};
  if (task == Task::classification) {
    SynthClassificationSpec spec;
    spec.n_per_class = o.n_per_class;
    spec.n_channels = o.channels;
    spec.length = o.length ? o.length : 96;
    spec.freqs = o.freqs;
    spec.noise = o.noise >= 0 ? o.noise : 0.5;
    spec.seed = o.seed;
    const SeriesDataset ds = synth_classification(spec);
    save_classification_csv(ds, csv);
    const double frac = o.train_fraction > 0 ? o.train_fraction : 0.8;
    // samples are interleaved by class, so a prefix split stays balanced
    m.split_train_end = static_cast<std::size_t>(std::floor(frac * static_cast<double>(ds.size())));
    report["rows"] = ds.size();
    report["columns"] = 1 + spec.n_channels * spec.length;
  } else if (task == Task::forecasting) {
    SynthSineSpec spec;
    spec.n_channels = o.channels;
    spec.length = o.length ? o.length : 1200;
    spec.periods = {o.period};
    spec.noise = o.noise >= 0 ? o.noise : 0.0;
    spec.seed = o.seed;
    const Series s = synth_sine(spec);
    save_series_csv(s, csv);
    m.split_train_end = chronological_split(s.length(), o.train_fraction > 0 ? o.train_fraction : 0.8);
    m.horizon = o.horizon;
    report["rows"] = s.length();
    report["columns"] = s.channels();
  } else {
    SynthAnomalySpec spec;
    spec.n_channels = o.channels;
    spec.length = o.length ? o.length : 3000;
    spec.period = o.period;
    spec.noise = o.noise >= 0 ? o.noise : 0.1;
    spec.spikes = o.spikes;
    spec.spike_amplitude = o.spike_amplitude;
    spec.level_shifts = o.level_shifts;
    const double frac = o.train_fraction > 0 ? o.train_fraction : 2.0 / 3.0;
    spec.clean_prefix = chronological_split(spec.length, frac);
    spec.seed = o.seed;
    const SynthAnomalyResult r = synth_anomaly(spec);
    save_series_csv(r.series, csv);
    m.split_train_end = spec.clean_prefix;
    const fs::path inj = dir / (o.kind + "_injections.csv");
    std::ofstream f(inj);
    if (!f) throw InputError("cannot write " + inj.string());
    f.precision(17);
    f << "start,length,amplitude,kind\n";
    for (const auto& i : r.injections) {
      f << i.start << ',' << i.length << ',' << i.amplitude << ',' << (i.spike ? "spike" : "level_shift") << '\n';
    }
    report["rows"] = r.series.length();
    report["columns"] = r.series.channels() + 1;
    report["injections"] = r.injections.size();
  }
  m.extra["seed"] = std::to_string(o.seed);
  save_manifest(m, manifest_path);
  out << report.dump() << '\n';
  return kExitOk;
}

int cmd_params(const CommonOptions& o, std::ostream& out) {
  const RunConfig run = load_run(o);
  const ParameterAccounting acc = parameter_accounting(run.model);
  const FusADModel model(run.model);
  out << json{{"command", "params"},
              {"accounted", acc.total()},
              {"built", model.parameter_count()},
              {"components", acc.components}}
             .dump()
      << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"FusAD: adaptive time-frequency fusion for time series"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fusad 0.1.0");

  CommonOptions pre_opts, fine_opts, eval_opts, param_opts;
  std::string fine_task, fine_from, eval_task, eval_ckpt;

  auto* pre = app.add_subcommand("pretrain", "Masked-reconstruction pretraining");
  add_common(pre, pre_opts, true);
  add_ablation_flags(pre, pre_opts.ablation);

  auto* fine = app.add_subcommand("finetune", "Train a task head (and the trunk)");
  add_common(fine, fine_opts, true);
  add_ablation_flags(fine, fine_opts.ablation);
  fine->add_option("--task", fine_task, "classification | forecasting | anomaly");
  fine->add_option("--from-checkpoint", fine_from, "Pretrained checkpoint whose trunk initializes the model");

  auto* ev = app.add_subcommand("eval", "Evaluate a saved model");
  add_common(ev, eval_opts, true);
  ev->add_option("--task", eval_task, "Expected task of the checkpoint");
  ev->add_option("--checkpoint", eval_ckpt, "Checkpoint to evaluate")->required();

  DenoiseOptions dn;
  auto* den = app.add_subcommand("denoise", "FFT band-threshold denoising of a CSV series");
  den->add_option("-i,--input", dn.input, "Input series CSV")->required();
  den->add_option("-o,--output", dn.output, "Denoised CSV")->required();
  den->add_option("--spectrum", dn.spectrum, "Spectrum dump (default <output>.spectrum.csv)");
  den->add_option("--theta1", dn.theta1, "Lower log-power threshold");
  den->add_option("--theta2", dn.theta2, "Upper log-power threshold");
  den->add_flag("--fit", dn.fit, "Fit thresholds around the dominant band");
  den->add_flag("--hanning", dn.hanning, "Apply a Hanning window before the FFT");
  den->add_option("--reference", dn.reference, "Clean reference CSV; logs SNR before and after");

  SynthOptions sy;
  auto* syn = app.add_subcommand("synth", "Write a synthetic corpus and its manifest");
  syn->add_option("--kind", sy.kind, "classification | forecasting | anomaly")->required();
  syn->add_option("-o,--out-dir", sy.out_dir, "Output directory");
  syn->add_option("--seed", sy.seed, "Generator seed");
  syn->add_option("--length", sy.length, "Series length (samples per series for classification)");
  syn->add_option("--channels", sy.channels, "Number of channels");
  syn->add_option("--n-per-class", sy.n_per_class, "Samples per class");
  syn->add_option("--freqs", sy.freqs, "Cycles per series, one per class");
  syn->add_option("--noise", sy.noise, "Gaussian noise standard deviation");
  syn->add_option("--period", sy.period, "Sine period in steps");
  syn->add_option("--horizon", sy.horizon, "Forecast horizon written to the manifest");
  syn->add_option("--spikes", sy.spikes, "Injected spikes");
  syn->add_option("--spike-amplitude", sy.spike_amplitude, "Spike size in base-signal standard deviations");
  syn->add_option("--level-shifts", sy.level_shifts, "Injected level-shift segments");
  syn->add_option("--train-fraction", sy.train_fraction, "Fraction before split_train_end");

  auto* par = app.add_subcommand("params", "Parameter accounting for a configuration");
  add_common(par, param_opts, false);
  add_ablation_flags(par, param_opts.ablation);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("fusad");

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (pre->parsed()) return cmd_pretrain(pre_opts, out, err);
    if (fine->parsed()) return cmd_finetune(fine_opts, fine_task, fine_from, out, err);
    if (ev->parsed()) return cmd_eval(eval_opts, eval_task, eval_ckpt, out);
    if (den->parsed()) return cmd_denoise(dn, out, err);
    if (syn->parsed()) return cmd_synth(sy, out);
    if (par->parsed()) return cmd_params(param_opts, out);
    return kExitConfig;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace fusad
