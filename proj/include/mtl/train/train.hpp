#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mtl/data/dataset.hpp"
#include "mtl/loss/loss.hpp"
#include "mtl/model/model.hpp"

namespace mtl::train {

enum class WeightingMode { Learned, Fixed1to1 };

struct TrainConfig {
  int batch_size = 8;
  double lr0 = 0.002;
  double lr_decay_factor = 0.25;
  int lr_decay_every_epochs = 2;
  int patience = 10;
  int max_epochs = 50;
  std::uint64_t seed = 0;
  WeightingMode weighting = WeightingMode::Learned;
};

void validate_train_config(const TrainConfig& cfg);

// lr0 * factor^floor(epoch / every), epoch counted from 0.
double lr_at_epoch(const TrainConfig& cfg, int epoch);

// Nesterov-Adam update with bias correction:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   step = lr (b1 m_hat + (1-b1) g / (1-b1^t)) / (sqrt(v_hat) + eps)
class NadamOptimizer {
 public:
  explicit NadamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  // One update over every trainable parameter with a non-empty gradient.
  // Throws NonFiniteGradError (naming the parameter) before touching state.
  void step(nn::ParameterStore& params, double lr);

  // Scalar single-parameter variant used by tests/oracles.
  void step_tensor(const std::string& name, Tensor& value, const Tensor& grad, double lr);

  int t() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  int t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

// Strict-improvement early stopping: improved means value < best - 1e-6;
// stopping triggers once the epochs since the last improvement exceed
// `patience`.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Call once per epoch (1-based); returns true when training should stop.
  bool observe(int epoch, double monitored);

  bool improved_last() const { return improved_last_; }
  int best_epoch() const { return best_epoch_; }
  double best_value() const { return best_value_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  double best_value_ = std::numeric_limits<double>::infinity();
  int since_ = 0;
  bool improved_last_ = false;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_l_hse = 0.0;
  double train_l_lcz = 0.0;
  double train_l_mt = 0.0;
  double val_l_mt = 0.0;
  double s_hse = 0.0;
  double s_lcz = 0.0;
};

struct FitResult {
  std::vector<EpochLog> history;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  int stopped_epoch = 0;
};

// Full optimization loop: seeded shuffling, Nadam steps, per-epoch validation
// of the multi-task loss at frozen s, early stopping, best-checkpoint restore.
// Writes history.csv / steps.csv and the best checkpoint under out_dir when
// out_dir is non-empty.
FitResult fit(MtlModel& model, const std::vector<data::PatchSample>& train_set,
              const std::vector<data::PatchSample>& val_set, const TrainConfig& cfg,
              const std::string& out_dir = "");

// Multi-task (or single-task) loss of a sample set at frozen parameters.
LossReport evaluate_loss(MtlModel& model, const std::vector<data::PatchSample>& samples,
                         int batch_size);

}  // namespace mtl::train
