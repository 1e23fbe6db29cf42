#include "fusad/model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fusad/config.hpp"
#include "fusad/error.hpp"

namespace fusad {

std::string to_string(Task task) {
  switch (task) {
    case Task::classification:
      return "classification";
    case Task::forecasting:
      return "forecasting";
    case Task::anomaly:
      return "anomaly";
  }
  return "?";
}

Task task_from_string(const std::string& name) {
  if (name == "classification") return Task::classification;
  if (name == "forecasting") return Task::forecasting;
  if (name == "anomaly") return Task::anomaly;
  throw ConfigError("unknown task '" + name + "' (expected classification, forecasting or anomaly)");
}

std::string to_string(MaskTokenPolicy policy) {
  return policy == MaskTokenPolicy::learnable_token ? "learnable_token" : "zero";
}

MaskTokenPolicy mask_token_policy_from_string(const std::string& name) {
  if (name == "zero") return MaskTokenPolicy::zero;
  if (name == "learnable_token") return MaskTokenPolicy::learnable_token;
  throw ConfigError("unknown mask token policy '" + name + "'");
}

void validate(const FusADConfig& c) {
  if (c.n_channels == 0) throw ConfigError("n_channels must be positive");
  if (c.seq_len == 0) throw ConfigError("seq_len must be positive");
  if (c.patch.patch_len == 0 || c.patch.embed_dim == 0) throw ConfigError("patch_len and embed_dim must be positive");
  if (c.layers == 0) throw ConfigError("the model needs at least one layer");
  if (c.num_classes == 1) throw ConfigError("classification needs at least 2 classes");
  if (c.ablation.no_asm_fourier && c.ablation.no_asm_wavelet && !c.ablation.no_asm) {
    throw ConfigError("removing both ASM branches is the no_asm ablation; set that flag instead");
  }
  validate(c.ifm);
  if (!(c.spectral.gate_temperature > 0)) throw ConfigError("gate_temperature must be positive");
}

std::size_t ParameterAccounting::total() const {
  std::size_t n = 0;
  for (const auto& [name, count] : components) n += count;
  return n;
}

ParameterAccounting parameter_accounting(const FusADConfig& c) {
  validate(c);
  ParameterAccounting acc;
  const std::size_t b = c.patch.patch_len;
  const std::size_t d = c.patch.embed_dim;
  const std::size_t z = c.tokens();
  acc.components["embedding"] = b * d + d + z * d;
  if (c.mask_token == MaskTokenPolicy::learnable_token) acc.components["mask_token"] = d;
  const bool fourier = !c.ablation.no_asm_fourier;
  const bool wavelet = !c.ablation.no_asm_wavelet;
  const bool threshold = fourier && !c.ablation.no_asm_threshold;
  const std::size_t branches = (fourier ? 1 : 0) + (wavelet ? 1 : 0);
  const std::size_t kernels = 4 * c.ifm.kernel_mid + c.ifm.kernel_small + c.ifm.kernel_large + c.ifm.kernel_out;
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = "layer" + std::to_string(l);
    acc.components[p + ".norms"] = 4 * d;
    if (!c.ablation.no_asm) {
      if (threshold) acc.components[p + ".asm.thresholds"] = 2;
      acc.components[p + ".asm.proj"] = d * branches * d + d;
    }
    if (!c.ablation.no_ifm) acc.components[p + ".ifm"] = d * d * kernels + 7 * d;
  }
  acc.components["head.recon"] = d * b + b;
  acc.components["head.ano"] = d * b + b;
  if (c.num_classes >= 2) acc.components["head.cls"] = c.n_channels * d * c.num_classes + c.num_classes;
  if (c.horizon >= 1) acc.components["head.fore"] = d * z * c.horizon + c.horizon;
  return acc;
}

bool is_trunk_parameter(const std::string& name) {
  return name.rfind("embed.", 0) == 0 || name.rfind("layer", 0) == 0;
}

// ---------------------------------------------------------------------------

namespace {

struct Layer {
  Tensor norm_asm_gamma;
  Tensor norm_asm_beta;
  Tensor norm_ifm_gamma;
  Tensor norm_ifm_beta;
  std::unique_ptr<AdaptiveSpectralModule> spectral;
  std::unique_ptr<InformationFusionModule> fusion;
};

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(v), true);
}

}  // namespace

struct FusADModel::Impl {
  std::unique_ptr<PatchEmbedding> embedding;
  Tensor mask_token;
  std::vector<Layer> layers;
  Tensor recon_w, recon_b, ano_w, ano_b, cls_w, cls_b, fore_w, fore_b;
};

FusADModel::FusADModel(FusADConfig config) : config_(std::move(config)), impl_(std::make_unique<Impl>()) {
  validate(config_);
  Rng rng(config_.seed);
  const std::size_t b = config_.patch.patch_len;
  const std::size_t d = config_.patch.embed_dim;
  const std::size_t z = config_.tokens();

  impl_->embedding = std::make_unique<PatchEmbedding>(config_.patch, z, rng, "embed");
  if (config_.mask_token == MaskTokenPolicy::learnable_token) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.normal(0.0, 0.02);
    impl_->mask_token = Tensor({d}, std::move(v), true);
  }

  const AsmBranches branches{!config_.ablation.no_asm_fourier, !config_.ablation.no_asm_wavelet,
                             !config_.ablation.no_asm_threshold};
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    Layer layer;
    layer.norm_asm_gamma = Tensor::full({d}, 1.0, true);
    layer.norm_asm_beta = Tensor::zeros({d}, true);
    layer.norm_ifm_gamma = Tensor::full({d}, 1.0, true);
    layer.norm_ifm_beta = Tensor::zeros({d}, true);
    if (!config_.ablation.no_asm) {
      layer.spectral = std::make_unique<AdaptiveSpectralModule>(config_.spectral, d, z, branches, rng, prefix + ".asm");
    }
    if (!config_.ablation.no_ifm) {
      layer.fusion = std::make_unique<InformationFusionModule>(config_.ifm, d, rng, prefix + ".ifm");
    }
    impl_->layers.push_back(std::move(layer));
  }

  const double head_bound = 1.0 / std::sqrt(static_cast<double>(d));
  impl_->recon_w = uniform_tensor({d, b}, head_bound, rng);
  impl_->recon_b = uniform_tensor({b}, head_bound, rng);
  impl_->ano_w = uniform_tensor({d, b}, head_bound, rng);
  impl_->ano_b = uniform_tensor({b}, head_bound, rng);
  if (config_.num_classes >= 2) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(config_.n_channels * d));
    impl_->cls_w = uniform_tensor({config_.n_channels * d, config_.num_classes}, bound, rng);
    impl_->cls_b = uniform_tensor({config_.num_classes}, bound, rng);
  }
  if (config_.horizon >= 1) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d * z));
    impl_->fore_w = uniform_tensor({d * z, config_.horizon}, bound, rng);
    impl_->fore_b = uniform_tensor({config_.horizon}, bound, rng);
  }
}

FusADModel::FusADModel(FusADModel&&) noexcept = default;
FusADModel& FusADModel::operator=(FusADModel&&) noexcept = default;
FusADModel::~FusADModel() = default;

std::size_t FusADModel::layer_count() const { return impl_->layers.size(); }

AdaptiveSpectralModule* FusADModel::spectral_module(std::size_t layer) { return impl_->layers.at(layer).spectral.get(); }

InformationFusionModule* FusADModel::fusion_module(std::size_t layer) { return impl_->layers.at(layer).fusion.get(); }

Tensor FusADModel::encode(const Tensor& x, const std::vector<std::uint8_t>* token_mask) {
  if (x.rank() != 3 || x.size(1) != config_.n_channels || x.size(2) != config_.seq_len) {
    throw ShapeError("model expects input [B, " + std::to_string(config_.n_channels) + ", " +
                     std::to_string(config_.seq_len) + "], got " + shape_str(x.shape()));
  }
  const std::size_t batch = x.size(0);
  const std::size_t m = batch * config_.n_channels;
  const std::size_t z = config_.tokens();
  const std::size_t d = config_.patch.embed_dim;

  const Tensor patches = patchify(reshape(x, {m, config_.seq_len}), config_.patch.patch_len, config_.patch.pad);
  Tensor tokens = impl_->embedding->forward(patches);  // [M, Z, D]
  if (token_mask) {
    if (token_mask->size() != m * z) {
      throw ShapeError("token mask needs " + std::to_string(m * z) + " entries, got " +
                       std::to_string(token_mask->size()));
    }
    std::vector<double> keep(m * z);
    std::vector<double> hide(m * z);
    for (std::size_t i = 0; i < keep.size(); ++i) {
      hide[i] = (*token_mask)[i] ? 1.0 : 0.0;
      keep[i] = 1.0 - hide[i];
    }
    tokens = mul(tokens, Tensor({m, z, 1}, std::move(keep)));
    if (config_.mask_token == MaskTokenPolicy::learnable_token) {
      tokens = add(tokens, mul(Tensor({m, z, 1}, std::move(hide)), impl_->mask_token));
    }
  }
  Tensor h = transpose(tokens, 1, 2);  // [M, D, Z]
  (void)d;
  for (auto& layer : impl_->layers) {
    Tensor a = layer_norm(h, layer.norm_asm_gamma, layer.norm_asm_beta, 1);
    if (layer.spectral) a = layer.spectral->forward(a, training_);
    Tensor c = layer_norm(a, layer.norm_ifm_gamma, layer.norm_ifm_beta, 1);
    h = layer.fusion ? layer.fusion->forward(c) : c;
  }
  return h;
}

namespace {

Tensor token_head(const Tensor& h, const Tensor& w, const Tensor& b, std::size_t batch, std::size_t channels,
                  std::size_t seq_len) {
  const std::size_t m = h.size(0);
  const std::size_t z = h.size(2);
  const std::size_t patch = w.size(1);
  Tensor out = add(matmul(transpose(h, 1, 2), w), b);  // [M, Z, b]
  out = reshape(out, {m, z * patch});
  if (z * patch != seq_len) out = slice(out, 1, 0, seq_len);
  return reshape(out, {batch, channels, seq_len});
}

}  // namespace

Tensor FusADModel::reconstruct(const Tensor& x, const std::vector<std::uint8_t>* token_mask) {
  const Tensor h = encode(x, token_mask);
  return token_head(h, impl_->recon_w, impl_->recon_b, x.size(0), config_.n_channels, config_.seq_len);
}

Tensor FusADModel::forward(const Tensor& x, Task task) {
  if (task == Task::classification && config_.num_classes < 2) {
    throw ConfigError("classification requested but the model has no classification head (num_classes < 2)");
  }
  if (task == Task::forecasting && config_.horizon == 0) {
    throw ConfigError("forecasting requested but the model has no forecasting head (horizon = 0)");
  }
  const Tensor h = encode(x);
  const std::size_t batch = x.size(0);
  const std::size_t n = config_.n_channels;
  const std::size_t m = h.size(0);
  const std::size_t d = h.size(1);
  const std::size_t z = h.size(2);
  switch (task) {
    case Task::classification: {
      const Tensor pooled = reshape(mean(h, 2), {batch, n * d});
      return add(matmul(pooled, impl_->cls_w), impl_->cls_b);
    }
    case Task::forecasting: {
      const Tensor flat = reshape(h, {m, d * z});
      return reshape(add(matmul(flat, impl_->fore_w), impl_->fore_b), {batch, n, config_.horizon});
    }
    case Task::anomaly:
      return token_head(h, impl_->ano_w, impl_->ano_b, batch, n, config_.seq_len);
  }
  throw ConfigError("unknown task");
}

std::vector<Parameter> FusADModel::parameters() const {
  std::vector<Parameter> out = impl_->embedding->parameters();
  if (impl_->mask_token.defined()) out.push_back({"embed.mask_token", impl_->mask_token});
  for (std::size_t l = 0; l < impl_->layers.size(); ++l) {
    const auto& layer = impl_->layers[l];
    const std::string p = "layer" + std::to_string(l);
    out.push_back({p + ".norm_asm.gamma", layer.norm_asm_gamma});
    out.push_back({p + ".norm_asm.beta", layer.norm_asm_beta});
    if (layer.spectral) {
      for (auto& q : layer.spectral->parameters()) out.push_back(std::move(q));
    }
    out.push_back({p + ".norm_ifm.gamma", layer.norm_ifm_gamma});
    out.push_back({p + ".norm_ifm.beta", layer.norm_ifm_beta});
    if (layer.fusion) {
      for (auto& q : layer.fusion->parameters()) out.push_back(std::move(q));
    }
  }
  out.push_back({"head.recon.weight", impl_->recon_w});
  out.push_back({"head.recon.bias", impl_->recon_b});
  out.push_back({"head.ano.weight", impl_->ano_w});
  out.push_back({"head.ano.bias", impl_->ano_b});
  if (impl_->cls_w.defined()) {
    out.push_back({"head.cls.weight", impl_->cls_w});
    out.push_back({"head.cls.bias", impl_->cls_b});
  }
  if (impl_->fore_w.defined()) {
    out.push_back({"head.fore.weight", impl_->fore_w});
    out.push_back({"head.fore.bias", impl_->fore_b});
  }
  return out;
}

std::vector<Parameter> FusADModel::trunk_parameters() const {
  std::vector<Parameter> out;
  for (auto& p : parameters()) {
    if (is_trunk_parameter(p.name)) out.push_back(std::move(p));
  }
  return out;
}

std::size_t FusADModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.value.numel();
  return n;
}

std::optional<Parameter> FusADModel::find(const std::string& name) const {
  for (auto& p : parameters()) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

void FusADModel::init_thresholds(const Tensor& x) {
  NoGradGuard no_grad;
  const bool was_training = training_;
  training_ = false;
  const std::size_t m = x.size(0) * config_.n_channels;
  const Tensor patches = patchify(reshape(x, {m, config_.seq_len}), config_.patch.patch_len, config_.patch.pad);
  Tensor h = transpose(impl_->embedding->forward(patches), 1, 2);
  for (auto& layer : impl_->layers) {
    Tensor a = layer_norm(h, layer.norm_asm_gamma, layer.norm_asm_beta, 1);
    if (layer.spectral) {
      layer.spectral->init_thresholds_from(a);
      a = layer.spectral->forward(a, false);
    }
    Tensor c = layer_norm(a, layer.norm_ifm_gamma, layer.norm_ifm_beta, 1);
    h = layer.fusion ? layer.fusion->forward(c) : c;
  }
  training_ = was_training;
}

void FusADModel::mark_thresholds_initialized() {
  for (auto& layer : impl_->layers) {
    if (layer.spectral) layer.spectral->mark_thresholds_initialized();
  }
}

// ---------------------------------------------------------------------------

Tensor anomaly_scores(FusADModel& model, const Tensor& x) {
  NoGradGuard no_grad;
  const bool was_training = model.training();
  model.set_training(false);
  const Tensor recon = model.forward(x, Task::anomaly);
  model.set_training(was_training);
  const Tensor err = mean(square(sub(x, recon)), 1);  // [B, T]
  return err;
}

double anomaly_threshold(const std::vector<double>& calibration_scores, double percentile_q) {
  if (calibration_scores.empty()) throw ConfigError("anomaly threshold needs a non-empty calibration split");
  return percentile(calibration_scores, percentile_q);
}

std::vector<int> label_scores(const std::vector<double>& scores, double threshold) {
  std::vector<int> labels(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) labels[i] = scores[i] > threshold ? 1 : 0;
  return labels;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kMagic = "FUSAD-CHECKPOINT";

std::uint64_t fnv1a(const char* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

void put_le(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  FusADConfig config;
  std::vector<CheckpointEntry> entries;
};

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::istringstream header(bytes);
  auto fail = [&](const std::string& why) -> LoadError { return LoadError("checkpoint " + path.string() + ": " + why); };

  std::string line;
  if (!std::getline(header, line) || line != kMagic) throw fail("not a FusAD checkpoint");
  int version = 0;
  {
    std::string key;
    if (!std::getline(header, line)) throw fail("missing version");
    std::istringstream ls(line);
    if (!(ls >> key >> version) || key != "version") throw fail("malformed version line");
    if (version != kCheckpointVersion) {
      throw fail("version " + std::to_string(version) + " does not match supported version " +
                 std::to_string(kCheckpointVersion));
    }
  }
  Checkpoint ck;
  if (!std::getline(header, line) || line.rfind("config ", 0) != 0) throw fail("missing config line");
  try {
    ck.config = model_config_from_json(nlohmann::json::parse(line.substr(7)));
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("config is not valid JSON: ") + e.what());
  } catch (const ConfigError& e) {
    throw fail(std::string("config rejected: ") + e.what());
  }
  std::size_t count = 0;
  {
    std::string key;
    if (!std::getline(header, line)) throw fail("missing parameter count");
    std::istringstream ls(line);
    if (!(ls >> key >> count) || key != "params") throw fail("malformed parameter count");
  }
  std::size_t payload_values = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(header, line)) throw fail("manifest truncated");
    std::istringstream ls(line);
    CheckpointEntry e;
    std::string dtype;
    std::size_t rank = 0;
    if (!(ls >> e.name >> dtype >> rank) || dtype != "f64" || rank > 8) throw fail("malformed manifest entry");
    e.shape.resize(rank);
    for (auto& d : e.shape) {
      if (!(ls >> d) || d == 0) throw fail("malformed shape for " + e.name);
    }
    payload_values += shape_numel(e.shape);
    ck.entries.push_back(std::move(e));
  }
  std::uint64_t checksum = 0;
  std::size_t payload_bytes = 0;
  {
    std::string k1, k2;
    if (!std::getline(header, line)) throw fail("missing payload line");
    std::istringstream ls(line);
    if (!(ls >> k1 >> payload_bytes >> k2 >> std::hex >> checksum) || k1 != "payload" || k2 != "fnv1a") {
      throw fail("malformed payload line");
    }
  }
  if (payload_bytes != payload_values * 8) throw fail("manifest and payload size disagree");
  const auto offset = static_cast<std::size_t>(header.tellg());
  if (header.fail() || offset > bytes.size() || bytes.size() - offset != payload_bytes) {
    throw fail("payload truncated or has trailing bytes (expected " + std::to_string(payload_bytes) + " bytes)");
  }
  const char* p = bytes.data() + offset;
  if (fnv1a(p, payload_bytes) != checksum) throw fail("payload checksum mismatch (file corrupt)");
  for (auto& e : ck.entries) {
    e.values.resize(shape_numel(e.shape));
    for (double& v : e.values) {
      v = get_le(p);
      p += 8;
    }
  }
  return ck;
}

void copy_into(Parameter& target, const CheckpointEntry& e, const std::filesystem::path& path) {
  if (target.value.shape() != e.shape) {
    throw LoadError("checkpoint " + path.string() + ": parameter " + e.name + " has shape " + shape_str(e.shape) +
                    ", model expects " + shape_str(target.value.shape()));
  }
  auto dst = target.value.mutable_data();
  std::copy(e.values.begin(), e.values.end(), dst.begin());
}

}  // namespace

void save_model(const FusADModel& model, const std::filesystem::path& path) {
  std::string payload;
  std::ostringstream manifest;
  const auto params = model.parameters();
  for (const auto& p : params) {
    manifest << p.name << " f64 " << p.value.rank();
    for (std::size_t d : p.value.shape()) manifest << ' ' << d;
    manifest << '\n';
    for (double v : p.value.data()) put_le(payload, v);
  }
  std::ostringstream out;
  out << kMagic << '\n'
      << "version " << kCheckpointVersion << '\n'
      << "config " << to_json(model.config()).dump() << '\n'
      << "params " << params.size() << '\n'
      << manifest.str() << "payload " << payload.size() << " fnv1a " << std::hex << fnv1a(payload.data(), payload.size())
      << '\n';
  const std::string head = out.str();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw InputError("cannot write checkpoint " + path.string());
  file.write(head.data(), static_cast<std::streamsize>(head.size()));
  file.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!file) throw InputError("failed writing checkpoint " + path.string());
}

FusADModel load_model(const std::filesystem::path& path) {
  const Checkpoint ck = read_checkpoint(path);
  FusADModel model(ck.config);
  auto params = model.parameters();
  if (params.size() != ck.entries.size()) {
    throw LoadError("checkpoint " + path.string() + " holds " + std::to_string(ck.entries.size()) +
                    " parameters, its config builds " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != ck.entries[i].name) {
      throw LoadError("checkpoint " + path.string() + ": expected parameter " + params[i].name + ", found " +
                      ck.entries[i].name);
    }
    copy_into(params[i], ck.entries[i], path);
  }
  model.mark_thresholds_initialized();
  return model;
}

void load_trunk(FusADModel& model, const std::filesystem::path& path) {
  const Checkpoint ck = read_checkpoint(path);
  for (auto& p : model.trunk_parameters()) {
    auto it = std::find_if(ck.entries.begin(), ck.entries.end(), [&](const auto& e) { return e.name == p.name; });
    if (it == ck.entries.end()) {
      throw LoadError("checkpoint " + path.string() + " lacks trunk parameter " + p.name +
                      " (trunk configuration mismatch)");
    }
    copy_into(p, *it, path);
  }
  model.mark_thresholds_initialized();
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a(bytes.data(), bytes.size());
}

}  // namespace fusad
