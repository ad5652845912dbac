#include "mtl/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

namespace mtl::train {

namespace fs = std::filesystem;

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(cfg.lr_decay_factor > 0.0 && cfg.lr_decay_factor <= 1.0))
    throw ConfigError("lr_decay_factor must lie in (0, 1]");
  if (cfg.lr_decay_every_epochs < 1) throw ConfigError("lr_decay_every_epochs must be >= 1");
  if (cfg.patience < 1) throw ConfigError("patience must be >= 1");
  if (cfg.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (cfg.lr0 <= 0.0) throw ConfigError("lr0 must be positive");
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  if (epoch < 0) throw ConfigError("epoch must be >= 0");
  int k = epoch / cfg.lr_decay_every_epochs;
  return cfg.lr0 * std::pow(cfg.lr_decay_factor, k);
}

NadamOptimizer::NadamOptimizer(double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void NadamOptimizer::step_tensor(const std::string& name, Tensor& value,
                                 const Tensor& grad, double lr) {
  for (std::size_t i = 0; i < grad.numel(); ++i)
    if (!std::isfinite(grad[i]))
      throw NonFiniteGradError("non-finite gradient in parameter: " + name);
  auto& m = m_[name];
  auto& v = v_[name];
  if (m.empty()) m = Tensor(value.dims());
  if (v.empty()) v = Tensor(value.dims());
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc1_next = 1.0 - std::pow(beta1_, t_ + 1);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < value.numel(); ++i) {
    double g = grad[i];
    m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
    v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
    double m_hat = m[i] / bc1_next;
    double v_hat = v[i] / bc2;
    double update = (beta1_ * m_hat + (1.0 - beta1_) * g / bc1) /
                    (std::sqrt(v_hat) + eps_);
    value[i] -= lr * update;
  }
}

void NadamOptimizer::step(nn::ParameterStore& params, double lr) {
  // Validate all gradients before mutating any state.
  for (const auto& [name, e] : params.entries()) {
    if (!e.trainable) continue;
    const Tensor& g = e.var.node()->grad;
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (!std::isfinite(g[i]))
        throw NonFiniteGradError("non-finite gradient in parameter: " + name);
  }
  ++t_;
  for (const auto& [name, e] : params.entries()) {
    if (!e.trainable) continue;
    nn::Var var = e.var;  // shares the node; value/grad mutate in place
    Tensor& g = var.node()->grad;
    if (g.empty()) continue;  // parameter unused in this graph
    Tensor& value = var.mutable_value();
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.empty()) m = Tensor(value.dims());
    if (v.empty()) v = Tensor(value.dims());
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc1_next = 1.0 - std::pow(beta1_, t_ + 1);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < value.numel(); ++i) {
      double gi = g[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      double m_hat = m[i] / bc1_next;
      double v_hat = v[i] / bc2;
      value[i] -= lr * (beta1_ * m_hat + (1.0 - beta1_) * gi / bc1) /
                  (std::sqrt(v_hat) + eps_);
    }
  }
}

bool EarlyStopping::observe(int epoch, double monitored) {
  improved_last_ = monitored < best_value_ - 1e-6;
  if (improved_last_) {
    best_value_ = monitored;
    best_epoch_ = epoch;
    since_ = 0;
  } else {
    ++since_;
  }
  return since_ > patience_;
}

namespace {

struct BatchLoss {
  nn::Var total;
  LossReport report;
};

BatchLoss batch_loss(MtlModel& model, const SampleBatch& batch, bool train_mode,
                     std::mt19937_64* rng) {
  const ModelConfig& cfg = model.config();
  ModelOutput out = model.forward(batch.images, &batch.hse_ref, train_mode,
                                  PriorSource::Reference, rng);
  BatchLoss bl;
  nn::Var s_hse = model.params().get("task.s_hse");
  nn::Var s_lcz = model.params().get("task.s_lcz");
  bl.report.s_hse = s_hse.item();
  bl.report.s_lcz = s_lcz.item();
  if (cfg.task == TaskMode::Both) {
    nn::Var lh = weighted_mae_loss(out.hse, batch.hse_ref);
    nn::Var ll = lcz_cross_entropy_loss(out.lcz_avg, batch.lcz_ref);
    bl.total = multitask_loss_var(lh, ll, s_hse, s_lcz);
    bl.report.l_hse = lh.item();
    bl.report.l_lcz = ll.item();
  } else if (cfg.task == TaskMode::HseOnly) {
    bl.total = weighted_mae_loss(out.hse, batch.hse_ref);
    bl.report.l_hse = bl.total.item();
  } else {
    bl.total = lcz_cross_entropy_loss(out.lcz_avg, batch.lcz_ref);
    bl.report.l_lcz = bl.total.item();
  }
  bl.report.l_mt = bl.total.item();
  return bl;
}

}  // namespace

LossReport evaluate_loss(MtlModel& model, const std::vector<data::PatchSample>& samples,
                         int batch_size) {
  if (samples.empty()) throw EmptySplitError("evaluate_loss: empty sample set");
  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  LossReport acc;
  std::size_t batches = 0;
  for (std::size_t lo = 0; lo < samples.size(); lo += static_cast<std::size_t>(batch_size)) {
    std::size_t hi = std::min(samples.size(), lo + static_cast<std::size_t>(batch_size));
    SampleBatch batch = data::make_batch(samples, order, lo, hi);
    BatchLoss bl = batch_loss(model, batch, /*train_mode=*/false, nullptr);
    acc.l_hse += bl.report.l_hse;
    acc.l_lcz += bl.report.l_lcz;
    acc.l_mt += bl.report.l_mt;
    acc.s_hse = bl.report.s_hse;
    acc.s_lcz = bl.report.s_lcz;
    ++batches;
  }
  acc.l_hse /= static_cast<double>(batches);
  acc.l_lcz /= static_cast<double>(batches);
  acc.l_mt /= static_cast<double>(batches);
  return acc;
}

FitResult fit(MtlModel& model, const std::vector<data::PatchSample>& train_set,
              const std::vector<data::PatchSample>& val_set, const TrainConfig& cfg,
              const std::string& out_dir) {
  validate_train_config(cfg);
  if (train_set.empty()) throw EmptySplitError("fit: empty train split");
  if (val_set.empty()) throw EmptySplitError("fit: empty val split");

  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0xd1b54a32d192ed03ULL);
  NadamOptimizer opt;
  EarlyStopping stopper(cfg.patience);
  const bool fixed_weights = cfg.weighting == WeightingMode::Fixed1to1;

  FitResult result;
  std::map<std::string, Tensor> best_snapshot = model.params().snapshot();
  std::ofstream steps_csv;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    steps_csv.open(fs::path(out_dir) / "steps.csv");
    steps_csv << loss_report_csv_header() << "\n";
  }

  std::vector<int> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  int step = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch - 1);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    std::size_t batches = 0;
    for (std::size_t lo = 0; lo < train_set.size();
         lo += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t hi = std::min(train_set.size(), lo + static_cast<std::size_t>(cfg.batch_size));
      SampleBatch batch = data::make_batch(train_set, order, lo, hi);
      model.params().zero_grads();
      BatchLoss bl = batch_loss(model, batch, /*train_mode=*/true, &dropout_rng);
      nn::backward(bl.total);
      if (fixed_weights) {
        nn::Var sh = model.params().get("task.s_hse");
        nn::Var sl = model.params().get("task.s_lcz");
        nn::zero_grad(sh);
        nn::zero_grad(sl);
      }
      opt.step(model.params(), lr);
      ++step;
      log.train_l_hse += bl.report.l_hse;
      log.train_l_lcz += bl.report.l_lcz;
      log.train_l_mt += bl.report.l_mt;
      ++batches;
      if (steps_csv.is_open())
        steps_csv << loss_report_csv_row(step, bl.report) << "\n";
    }
    log.train_l_hse /= static_cast<double>(batches);
    log.train_l_lcz /= static_cast<double>(batches);
    log.train_l_mt /= static_cast<double>(batches);

    LossReport val = evaluate_loss(model, val_set, cfg.batch_size);
    log.val_l_mt = val.l_mt;
    log.s_hse = model.params().get("task.s_hse").item();
    log.s_lcz = model.params().get("task.s_lcz").item();
    result.history.push_back(log);

    bool stop = stopper.observe(epoch, val.l_mt);
    if (stopper.improved_last()) best_snapshot = model.params().snapshot();
    result.stopped_epoch = epoch;
    if (stop) break;
  }

  result.best_epoch = stopper.best_epoch();
  result.best_val_loss = stopper.best_value();
  model.params().restore(best_snapshot);

  if (!out_dir.empty()) {
    std::ofstream hist(fs::path(out_dir) / "history.csv");
    hist << "epoch,lr,train_l_hse,train_l_lcz,train_l_mt,val_l_mt,s_hse,s_lcz\n";
    hist.precision(10);
    for (const auto& e : result.history)
      hist << e.epoch << ',' << e.lr << ',' << e.train_l_hse << ',' << e.train_l_lcz
           << ',' << e.train_l_mt << ',' << e.val_l_mt << ',' << e.s_hse << ','
           << e.s_lcz << "\n";
    model.params().save((fs::path(out_dir) / "checkpoint").string(), model.config(),
                        result.best_epoch);
  }
  return result;
}

}  // namespace mtl::train
