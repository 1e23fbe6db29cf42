#include "fusad/config.hpp"

#include <fstream>
#include <type_traits>

#include "fusad/error.hpp"

namespace fusad {

using nlohmann::json;

namespace {

// Reads an object field by field and remembers which keys were consumed, so
// that finish() can reject anything left over.
class StrictObject {
 public:
  StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(label() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const json& v = j_.at(key);
    const std::string path = where_.empty() ? key : where_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path + " must be true or false");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(path + " must be an integer");
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
        throw ConfigError(path + " must not be negative");
      }
      out = v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path + " must be a number");
      out = v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path + " must be a string");
      out = v.get<std::string>();
    } else {
      if (!v.is_array()) throw ConfigError(path + " must be an array of numbers");
      out.clear();
      for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError(path + " must be an array of numbers");
        out.push_back(e.get<double>());
      }
    }
  }

  /// Child object, or nullptr when absent.
  const json* child(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown configuration key '" + path(key) + "'");
    }
  }

 private:
  std::string label() const { return where_.empty() ? "configuration" : "'" + where_ + "'"; }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <class Fn>
auto convert_enum(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

FusADConfig read_model(const json& j, const std::string& where, std::set<std::string>* explicit_keys) {
  FusADConfig c;
  StrictObject o(j, where);
  if (explicit_keys) {
    for (const auto& [key, value] : j.items()) explicit_keys->insert(key);
  }
  o.get("n_channels", c.n_channels);
  o.get("seq_len", c.seq_len);
  o.get("patch_len", c.patch.patch_len);
  o.get("embed_dim", c.patch.embed_dim);
  std::string text;
  if (o.has("pad")) {
    o.get("pad", text);
    c.patch.pad = convert_enum(o.path("pad"), [&] { return pad_policy_from_string(text); });
  }
  o.get("layers", c.layers);
  if (o.has("task")) {
    o.get("task", text);
    c.task = convert_enum(o.path("task"), [&] { return task_from_string(text); });
  }
  o.get("num_classes", c.num_classes);
  o.get("horizon", c.horizon);
  if (o.has("mask_token")) {
    o.get("mask_token", text);
    c.mask_token = convert_enum(o.path("mask_token"), [&] { return mask_token_policy_from_string(text); });
  }
  o.get("seed", c.seed);
  if (const json* s = o.child("spectral")) {
    StrictObject so(*s, o.path("spectral"));
    so.get("use_hanning", c.spectral.use_hanning);
    so.get("gate_temperature", c.spectral.gate_temperature);
    so.get("scales", c.spectral.scales);
    so.get("num_scales", c.spectral.num_scales);
    so.get("morlet_center", c.spectral.morlet_center);
    if (so.has("mode")) {
      so.get("mode", text);
      c.spectral.mode = convert_enum(so.path("mode"), [&] { return mask_mode_from_string(text); });
    }
    so.finish();
  }
  if (const json* f = o.child("ifm")) {
    StrictObject fo(*f, o.path("ifm"));
    fo.get("kernel_mid", c.ifm.kernel_mid);
    fo.get("kernel_small", c.ifm.kernel_small);
    fo.get("kernel_large", c.ifm.kernel_large);
    fo.get("kernel_out", c.ifm.kernel_out);
    fo.get("exp_clip", c.ifm.exp_clip);
    fo.get("residual", c.ifm.residual);
    fo.finish();
  }
  if (const json* a = o.child("ablation")) {
    StrictObject ao(*a, o.path("ablation"));
    ao.get("no_asm", c.ablation.no_asm);
    ao.get("no_asm_fourier", c.ablation.no_asm_fourier);
    ao.get("no_asm_threshold", c.ablation.no_asm_threshold);
    ao.get("no_asm_wavelet", c.ablation.no_asm_wavelet);
    ao.get("no_ifm", c.ablation.no_ifm);
    ao.get("no_pretrain", c.ablation.no_pretrain);
    ao.finish();
  }
  o.finish();
  return c;
}

TrainConfig read_train(const json& j, const std::string& where) {
  TrainConfig c;
  StrictObject o(j, where);
  o.get("lr_pretrain", c.lr_pretrain);
  o.get("lr_finetune", c.lr_finetune);
  o.get("weight_decay", c.weight_decay);
  o.get("batch_size", c.batch_size);
  o.get("epochs_pretrain", c.epochs_pretrain);
  o.get("epochs_finetune", c.epochs_finetune);
  o.get("label_smoothing", c.label_smoothing);
  o.get("val_fraction", c.val_fraction);
  o.get("outlier_augmentation", c.outlier_augmentation);
  o.get("seed", c.seed);
  o.finish();
  return c;
}

MaskSpec read_mask(const json& j, const std::string& where) {
  MaskSpec m;
  StrictObject o(j, where);
  o.get("ratio", m.ratio);
  if (o.has("policy")) {
    std::string text;
    o.get("policy", text);
    m.policy = convert_enum(o.path("policy"), [&] { return mask_token_policy_from_string(text); });
  }
  o.finish();
  if (!(m.ratio > 0.0 && m.ratio < 1.0)) throw ConfigError(o.path("ratio") + " must lie in (0, 1)");
  return m;
}

WindowSpec read_window(const json& j, const std::string& where) {
  WindowSpec w;
  StrictObject o(j, where);
  o.get("lookback", w.lookback);
  o.get("horizon", w.horizon);
  o.get("stride", w.stride);
  o.finish();
  if (w.lookback == 0 || w.stride == 0) throw ConfigError(where + ": lookback and stride must be positive");
  return w;
}

}  // namespace

json to_json(const FusADConfig& c) {
  return json{
      {"n_channels", c.n_channels},
      {"seq_len", c.seq_len},
      {"patch_len", c.patch.patch_len},
      {"embed_dim", c.patch.embed_dim},
      {"pad", to_string(c.patch.pad)},
      {"layers", c.layers},
      {"task", to_string(c.task)},
      {"num_classes", c.num_classes},
      {"horizon", c.horizon},
      {"mask_token", to_string(c.mask_token)},
      {"seed", c.seed},
      {"spectral",
       {{"use_hanning", c.spectral.use_hanning},
        {"gate_temperature", c.spectral.gate_temperature},
        {"scales", c.spectral.scales},
        {"num_scales", c.spectral.num_scales},
        {"morlet_center", c.spectral.morlet_center},
        {"mode", to_string(c.spectral.mode)}}},
      {"ifm",
       {{"kernel_mid", c.ifm.kernel_mid},
        {"kernel_small", c.ifm.kernel_small},
        {"kernel_large", c.ifm.kernel_large},
        {"kernel_out", c.ifm.kernel_out},
        {"exp_clip", c.ifm.exp_clip},
        {"residual", c.ifm.residual}}},
      {"ablation",
       {{"no_asm", c.ablation.no_asm},
        {"no_asm_fourier", c.ablation.no_asm_fourier},
        {"no_asm_threshold", c.ablation.no_asm_threshold},
        {"no_asm_wavelet", c.ablation.no_asm_wavelet},
        {"no_ifm", c.ablation.no_ifm},
        {"no_pretrain", c.ablation.no_pretrain}}},
  };
}

FusADConfig model_config_from_json(const json& j) { return read_model(j, "model", nullptr); }

json to_json(const TrainConfig& c) {
  return json{{"lr_pretrain", c.lr_pretrain},         {"lr_finetune", c.lr_finetune},
              {"weight_decay", c.weight_decay},       {"batch_size", c.batch_size},
              {"epochs_pretrain", c.epochs_pretrain}, {"epochs_finetune", c.epochs_finetune},
              {"label_smoothing", c.label_smoothing}, {"val_fraction", c.val_fraction},
              {"outlier_augmentation", c.outlier_augmentation}, {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) { return read_train(j, "train"); }

json to_json(const MaskSpec& m) { return json{{"ratio", m.ratio}, {"policy", to_string(m.policy)}}; }

MaskSpec mask_spec_from_json(const json& j) { return read_mask(j, "mask"); }

json to_json(const WindowSpec& w) {
  return json{{"lookback", w.lookback}, {"horizon", w.horizon}, {"stride", w.stride}};
}

WindowSpec window_spec_from_json(const json& j) { return read_window(j, "window"); }

json to_json(const RunConfig& c) {
  return json{
      {"seed", c.seed},
      {"model", to_json(c.model)},
      {"mask", to_json(c.mask)},
      {"train", to_json(c.train)},
      {"window", to_json(c.window)},
      {"data", {{"train", c.data.train}, {"test", c.data.test}, {"manifest", c.data.manifest}}},
      {"anomaly", {{"percentile", c.anomaly.percentile}, {"point_adjust", c.anomaly.point_adjust}}},
      {"output_dir", c.output_dir},
  };
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  StrictObject o(j, "");
  o.get("seed", c.seed);
  if (const json* m = o.child("model")) c.model = read_model(*m, "model", &c.explicit_model_keys);
  if (const json* m = o.child("mask")) c.mask = read_mask(*m, "mask");
  if (const json* t = o.child("train")) c.train = read_train(*t, "train");
  if (const json* w = o.child("window")) c.window = read_window(*w, "window");
  if (const json* d = o.child("data")) {
    StrictObject d_obj(*d, "data");
    d_obj.get("train", c.data.train);
    d_obj.get("test", c.data.test);
    d_obj.get("manifest", c.data.manifest);
    d_obj.finish();
  }
  if (const json* a = o.child("anomaly")) {
    StrictObject a_obj(*a, "anomaly");
    a_obj.get("percentile", c.anomaly.percentile);
    a_obj.get("point_adjust", c.anomaly.point_adjust);
    a_obj.finish();
    if (!(c.anomaly.percentile >= 0.0 && c.anomaly.percentile <= 100.0)) {
      throw ConfigError("anomaly.percentile must lie in [0, 100]");
    }
  }
  o.get("output_dir", c.output_dir);
  o.finish();

  // One seed drives everything unless a section sets its own.
  if (!c.explicit_model_keys.count("seed")) c.model.seed = c.seed;
  if (!(j.contains("train") && j.at("train").contains("seed"))) c.train.seed = c.seed;
  if (j.contains("mask") && j.at("mask").contains("policy")) {
    if (c.explicit_model_keys.count("mask_token") && c.model.mask_token != c.mask.policy) {
      throw ConfigError("mask.policy (" + to_string(c.mask.policy) + ") contradicts model.mask_token (" +
                        to_string(c.model.mask_token) + ")");
    }
    c.model.mask_token = c.mask.policy;
  } else {
    c.mask.policy = c.model.mask_token;
  }
  validate(c.train);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace fusad
