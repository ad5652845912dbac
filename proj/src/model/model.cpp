#include "mtl/model/model.hpp"

#include <cmath>

namespace mtl {

using nn::ParamGroup;
using nn::Var;

MtlModel::MtlModel(ModelConfig cfg, std::uint64_t seed)
    : cfg_(cfg), fallback_rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
  validate_config(cfg_);
  const int f = cfg_.base_features;
  const int f4 = 4 * f;
  if (cfg_.cbam_enabled) {
    if (f4 < kCbamReductionRatio)
      throw ConfigError("CBAM requires 4*base_features >= reduction ratio");
    if (f4 % kCbamReductionRatio != 0)
      throw ConfigError("CBAM requires channels divisible by the reduction ratio");
  }
  std::mt19937_64 rng(seed);

  const bool want_hse = cfg_.task != TaskMode::LczOnly;
  const bool want_lcz = cfg_.task != TaskMode::HseOnly;

  // Backbone: ConvBlock(f), ConvBlock(2f), pool (2f -> 4f), ConvBlock(4f) x2.
  register_conv_unit("backbone.block1.conv1", cfg_.bands, f, ParamGroup::Shared, rng);
  register_conv_unit("backbone.block1.conv2", f, f, ParamGroup::Shared, rng);
  register_conv_unit("backbone.block2.conv1", f, 2 * f, ParamGroup::Shared, rng);
  register_conv_unit("backbone.block2.conv2", 2 * f, 2 * f, ParamGroup::Shared, rng);
  register_conv_unit("backbone.block3.conv1", f4, f4, ParamGroup::Shared, rng);
  register_conv_unit("backbone.block3.conv2", f4, f4, ParamGroup::Shared, rng);
  register_conv_unit("backbone.block4.conv1", f4, f4, ParamGroup::Shared, rng);
  register_conv_unit("backbone.block4.conv2", f4, f4, ParamGroup::Shared, rng);

  if (want_hse) {
    register_cbam("hse.cbam", f4, ParamGroup::HseBranch, rng);
    register_conv_unit("hse.conv1", f4, f4, ParamGroup::HseBranch, rng);
    register_head("hse.head", f4, 1, ParamGroup::HseBranch, rng);
  }
  if (want_lcz) {
    register_cbam("lcz.cbam", f4, ParamGroup::LczBranch, rng);
    register_conv_unit("lcz.conv1", f4, f4, ParamGroup::LczBranch, rng);
    register_conv_unit("lcz.conv2", f4, f4, ParamGroup::LczBranch, rng);
    register_head("lcz.head_final", f4, cfg_.num_classes, ParamGroup::LczBranch, rng);
    if (cfg_.aux_head_count >= 1)
      register_head("lcz.head_backbone", f4, cfg_.num_classes, ParamGroup::LczBranch, rng);
    if (cfg_.aux_head_count >= 2)
      register_head("lcz.head_cbam", f4, cfg_.num_classes, ParamGroup::LczBranch, rng);
    if (cfg_.aux_head_count >= 3)
      register_head("lcz.head_pool", f4, cfg_.num_classes, ParamGroup::LczBranch, rng);
    if (cfg_.p2f_enabled)
      register_head("lcz.head_p2f", f4, cfg_.num_classes, ParamGroup::LczBranch, rng);
  }

  params_.add("task.s_hse", Tensor::scalar(0.0), ParamGroup::TaskWeights);
  params_.add("task.s_lcz", Tensor::scalar(0.0), ParamGroup::TaskWeights);
}

void MtlModel::register_conv_unit(const std::string& prefix, int c_in, int c_out,
                                  ParamGroup group, std::mt19937_64& rng) {
  params_.add(prefix + ".dw", nn::kaiming_uniform({c_in, 3, 3}, 9, rng), group);
  params_.add(prefix + ".pw", nn::kaiming_uniform({c_out, c_in}, c_in, rng), group);
  params_.add(prefix + ".b", Tensor({c_out}), group);
  params_.add(prefix + ".bn_g", Tensor::full({c_out}, 1.0), group);
  params_.add(prefix + ".bn_b", Tensor({c_out}), group);
  params_.add(prefix + ".bn_mean", Tensor({c_out}), group, /*trainable=*/false);
  params_.add(prefix + ".bn_var", Tensor::full({c_out}, 1.0), group, /*trainable=*/false);
}

void MtlModel::register_cbam(const std::string& prefix, int channels, ParamGroup group,
                             std::mt19937_64& rng) {
  if (!cfg_.cbam_enabled) return;
  int hidden = std::max(1, channels / kCbamReductionRatio);
  params_.add(prefix + ".mlp_w1", nn::kaiming_uniform({hidden, channels}, channels, rng), group);
  params_.add(prefix + ".mlp_b1", Tensor({hidden}), group);
  params_.add(prefix + ".mlp_w2", nn::kaiming_uniform({channels, hidden}, hidden, rng), group);
  params_.add(prefix + ".mlp_b2", Tensor({channels}), group);
  params_.add(prefix + ".sp_w", nn::kaiming_uniform({1, 2, 7, 7}, 2 * 49, rng), group);
  params_.add(prefix + ".sp_b", Tensor({1}), group);
}

void MtlModel::register_head(const std::string& prefix, int c_in, int c_out,
                             ParamGroup group, std::mt19937_64& rng) {
  params_.add(prefix + ".pw", nn::kaiming_uniform({c_out, c_in}, c_in, rng), group);
  params_.add(prefix + ".b", Tensor({c_out}), group);
}

Var MtlModel::conv_unit(const Var& x, const std::string& prefix, bool train_mode) {
  Var y = nn::separable_conv(x, params_.get(prefix + ".dw"), params_.get(prefix + ".pw"),
                             params_.get(prefix + ".b"));
  y = nn::batch_norm(y, params_.get(prefix + ".bn_g"), params_.get(prefix + ".bn_b"),
                     params_.buffer(prefix + ".bn_mean"),
                     params_.buffer(prefix + ".bn_var"), train_mode);
  return nn::relu(y);
}

Var MtlModel::backbone_forward(const Var& x, bool train_mode) {
  if (x.value().dim(2) % 2 != 0 || x.value().dim(3) % 2 != 0)
    throw ShapeError("backbone input spatial dims must be even");
  Var y = conv_unit(x, "backbone.block1.conv1", train_mode);
  y = conv_unit(y, "backbone.block1.conv2", train_mode);
  y = conv_unit(y, "backbone.block2.conv1", train_mode);
  y = conv_unit(y, "backbone.block2.conv2", train_mode);
  y = nn::concat_channels(nn::max_pool2(y), nn::avg_pool2(y));
  y = conv_unit(y, "backbone.block3.conv1", train_mode);
  y = conv_unit(y, "backbone.block3.conv2", train_mode);
  y = conv_unit(y, "backbone.block4.conv1", train_mode);
  y = conv_unit(y, "backbone.block4.conv2", train_mode);
  return y;
}

Var MtlModel::cbam_forward(const Var& x, const std::string& prefix) {
  if (!cfg_.cbam_enabled) return x;
  auto mlp = [&](const Var& v) {
    Var h = nn::dense(v, params_.get(prefix + ".mlp_w1"), params_.get(prefix + ".mlp_b1"));
    h = nn::relu(h);
    return nn::dense(h, params_.get(prefix + ".mlp_w2"), params_.get(prefix + ".mlp_b2"));
  };
  Var mc = nn::sigmoid(nn::add(mlp(nn::global_avg_pool(x)), mlp(nn::global_max_pool(x))));
  Var x1 = nn::scale_channels(x, mc);
  Var ms = nn::sigmoid(nn::conv2d_same(nn::channel_mean_max(x1),
                                       params_.get(prefix + ".sp_w"),
                                       params_.get(prefix + ".sp_b")));
  return nn::scale_spatial(x1, ms);
}

Var MtlModel::head_probs(const Var& feat, const std::string& prefix) {
  return nn::softmax_channels(
      nn::pointwise_conv(feat, params_.get(prefix + ".pw"), params_.get(prefix + ".b")));
}

Var MtlModel::hse_branch_forward(const Var& feat, bool train_mode, std::mt19937_64& rng) {
  Var y = cbam_forward(feat, "hse.cbam");
  y = conv_unit(y, "hse.conv1", train_mode);
  y = nn::dropout(y, cfg_.dropout_rate, train_mode, rng);
  y = nn::pointwise_conv(y, params_.get("hse.head.pw"), params_.get("hse.head.b"));
  return nn::sigmoid(y);
}

LczBranchOutput MtlModel::lcz_branch_forward(const Var& feat, bool train_mode,
                                             std::mt19937_64& rng) {
  LczBranchOutput out;
  out.cbam_feat = cbam_forward(feat, "lcz.cbam");
  Var t = conv_unit(out.cbam_feat, "lcz.conv1", train_mode);
  t = nn::dropout(t, cfg_.dropout_rate, train_mode, rng);
  out.pool_feat = nn::max_pool2(t);
  Var t2 = conv_unit(out.pool_feat, "lcz.conv2", train_mode);
  t2 = nn::dropout(t2, cfg_.dropout_rate, train_mode, rng);

  out.heads.push_back(head_probs(t2, "lcz.head_final"));
  if (cfg_.aux_head_count >= 1) out.heads.push_back(head_probs(feat, "lcz.head_backbone"));
  if (cfg_.aux_head_count >= 2)
    out.heads.push_back(head_probs(out.cbam_feat, "lcz.head_cbam"));
  if (cfg_.aux_head_count >= 3)
    out.heads.push_back(head_probs(out.pool_feat, "lcz.head_pool"));
  return out;
}

Var MtlModel::p2f_forward(const Var& prior, const Var& lcz_cbam_feat) {
  for (std::size_t i = 0; i < prior.value().numel(); ++i)
    if (prior.value()[i] < 0.0 || prior.value()[i] > 1.0)
      throw RangeError("P2F prior values must lie in [0, 1]");
  Var p = prior;
  if (p.value().dim(2) != lcz_cbam_feat.value().dim(2) ||
      p.value().dim(3) != lcz_cbam_feat.value().dim(3))
    p = nn::resize_nearest(p, lcz_cbam_feat.value().dim(2), lcz_cbam_feat.value().dim(3));
  Var conditioned = nn::scale_spatial(lcz_cbam_feat, p);
  return head_probs(conditioned, "lcz.head_p2f");
}

ModelOutput MtlModel::forward(const Tensor& images, const Tensor* hse_ref,
                              bool train_mode, PriorSource prior_source,
                              std::mt19937_64* dropout_rng) {
  std::mt19937_64& rng = dropout_rng ? *dropout_rng : fallback_rng_;
  const int h = images.dim(2), w = images.dim(3);
  ModelOutput out;
  Var x(images, /*requires_grad=*/false);
  Var feat = backbone_forward(x, train_mode);

  const bool want_hse = cfg_.task != TaskMode::LczOnly;
  const bool want_lcz = cfg_.task != TaskMode::HseOnly;

  if (want_hse) out.hse = hse_branch_forward(feat, train_mode, rng);
  if (!want_lcz) return out;

  LczBranchOutput lb = lcz_branch_forward(feat, train_mode, rng);
  std::vector<Var> heads = lb.heads;

  if (cfg_.p2f_enabled) {
    Var prior;
    if (prior_source == PriorSource::Reference) {
      if (!hse_ref || hse_ref->empty())
        throw MissingReferenceError("P2F prior source is Reference but hse_ref is missing");
      const int n = hse_ref->dim(0);
      prior = Var(hse_ref->reshape({n, 1, hse_ref->dim(1), hse_ref->dim(2)}), false);
    } else {
      if (!out.hse.defined())
        throw MissingReferenceError("P2F prior source is Prediction but the HSE branch is off");
      prior = nn::detach(out.hse);
    }
    out.p2f_head = p2f_forward(prior, lb.cbam_feat);
    heads.push_back(out.p2f_head);
  }

  std::vector<Var> upsampled;
  upsampled.reserve(heads.size());
  for (const Var& head : heads) upsampled.push_back(nn::upsample_bilinear(head, h, w));
  out.lcz_avg = nn::average(upsampled);
  out.lcz_heads = std::move(heads);
  return out;
}

}  // namespace mtl
