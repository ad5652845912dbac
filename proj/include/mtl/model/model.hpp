#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mtl/core/batch.hpp"
#include "mtl/core/config.hpp"
#include "mtl/nn/ops.hpp"
#include "mtl/nn/params.hpp"

namespace mtl {

// Source of the HSE prior fed to the P2F head: the reference map (training)
// or the model's own HSE prediction with gradients blocked (test time).
enum class PriorSource { Reference, Prediction };

struct ModelOutput {
  nn::Var hse;                    // [N,1,h/2,w/2] in (0,1); undefined for LczOnly
  std::vector<nn::Var> lcz_heads; // probability maps at native head resolution
  nn::Var lcz_avg;                // [N,K,h,w]; undefined for HseOnly
  nn::Var p2f_head;               // defined when the P2F head is active
};

struct LczBranchOutput {
  std::vector<nn::Var> heads;
  nn::Var avg;
  nn::Var cbam_feat;  // attention output at h/2, the P2F conditioning tap
  nn::Var pool_feat;  // post-pool trunk features at h/4
};

// The multi-task CNN: shared backbone, CBAM-gated task branches, multi-scale
// LCZ heads and the optional P2F prior head.
class MtlModel {
 public:
  static constexpr int kCbamReductionRatio = 8;

  explicit MtlModel(ModelConfig cfg, std::uint64_t seed = 0);

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }

  // Full forward pass. hse_ref (shape [N, h/2, w/2]) is required when the
  // P2F prior source is Reference.
  ModelOutput forward(const Tensor& images, const Tensor* hse_ref, bool train_mode,
                      PriorSource prior_source, std::mt19937_64* dropout_rng = nullptr);

  // Sub-network entry points (exposed for testing and oracles).
  nn::Var backbone_forward(const nn::Var& x, bool train_mode);
  nn::Var cbam_forward(const nn::Var& x, const std::string& prefix);
  nn::Var hse_branch_forward(const nn::Var& feat, bool train_mode,
                             std::mt19937_64& rng);
  LczBranchOutput lcz_branch_forward(const nn::Var& feat, bool train_mode,
                                     std::mt19937_64& rng);
  nn::Var p2f_forward(const nn::Var& prior, const nn::Var& lcz_cbam_feat);

 private:
  nn::Var conv_unit(const nn::Var& x, const std::string& prefix, bool train_mode);
  void register_conv_unit(const std::string& prefix, int c_in, int c_out,
                          nn::ParamGroup group, std::mt19937_64& rng);
  void register_cbam(const std::string& prefix, int channels, nn::ParamGroup group,
                     std::mt19937_64& rng);
  void register_head(const std::string& prefix, int c_in, int c_out,
                     nn::ParamGroup group, std::mt19937_64& rng);
  nn::Var head_probs(const nn::Var& feat, const std::string& prefix);

  ModelConfig cfg_;
  nn::ParameterStore params_;
  std::mt19937_64 fallback_rng_;
};

}  // namespace mtl
