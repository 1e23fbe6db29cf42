#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fusad/random.hpp"
#include "fusad/tensor.hpp"

namespace fusad {

enum class PadPolicy { replicate_last, zero };

std::string to_string(PadPolicy policy);
PadPolicy pad_policy_from_string(const std::string& name);

struct PatchConfig {
  std::size_t patch_len = 8;
  std::size_t embed_dim = 64;
  PadPolicy pad = PadPolicy::replicate_last;
};

/// ceil(T / b).
std::size_t num_patches(std::size_t length, std::size_t patch_len);

/// [..., T] -> [..., Z, b] with Z = ceil(T / b); a short final patch is completed per `pad`.
Tensor patchify(const Tensor& x, std::size_t patch_len, PadPolicy pad);

/// Per-patch dense projection b -> b' plus a learnable positional row per patch index.
class PatchEmbedding {
 public:
  PatchEmbedding(const PatchConfig& config, std::size_t max_patches, Rng& rng, const std::string& prefix);

  /// [M, Z, b] -> [M, Z, b']. Throws CapacityError when Z exceeds the positional table.
  Tensor forward(const Tensor& patches) const;

  std::vector<Parameter> parameters() const;
  std::size_t max_patches() const { return max_patches_; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  Tensor& positions() { return positions_; }

 private:
  PatchConfig config_;
  std::size_t max_patches_;
  std::string prefix_;
  Tensor weight_;     // [b, b']
  Tensor bias_;       // [b']
  Tensor positions_;  // [Z_max, b']
};

}  // namespace fusad
