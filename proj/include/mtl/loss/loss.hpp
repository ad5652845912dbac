#pragma once

#include <string>

#include "mtl/core/batch.hpp"
#include "mtl/nn/graph.hpp"

namespace mtl {

// Per-step loss snapshot; l_mt always satisfies the closed-form combination
// of the other fields.
struct LossReport {
  double l_hse = 0.0;
  double l_lcz = 0.0;
  double l_mt = 0.0;
  double s_hse = 0.0;
  double s_lcz = 0.0;
};

// Sample-weighted mean absolute error with weights e^{y_ref}, normalized by
// the weight sum.
double weighted_mae(const Tensor& pred, const Tensor& ref);
nn::Var weighted_mae_loss(const nn::Var& pred, const Tensor& ref);

// Cross entropy of averaged per-pixel probabilities against integer labels;
// kIgnoreLabel pixels are skipped, probabilities floored at 1e-12.
double lcz_cross_entropy(const Tensor& avg_probs, const LabelGrid& labels);
nn::Var lcz_cross_entropy_loss(const nn::Var& avg_probs, const LabelGrid& labels);

// Homoscedastic-uncertainty combination with s = log(sigma^2):
//   0.5 e^{-s_hse} l_hse + e^{-s_lcz} l_lcz + s_hse/2 + s_lcz/2.
double multitask_loss(double l_hse, double l_lcz, const TaskWeights& w);
nn::Var multitask_loss_var(const nn::Var& l_hse, const nn::Var& l_lcz,
                           const nn::Var& s_hse, const nn::Var& s_lcz);

// Closed-form minimizers of the combination above for fixed positive losses:
// s_hse* = log(l_hse), s_lcz* = log(2 l_lcz). Test oracle for the learned
// weights; throws DomainError on non-positive losses.
TaskWeights optimal_task_weights(double l_hse, double l_lcz);

std::string loss_report_csv_header();
std::string loss_report_csv_row(int step, const LossReport& r);

}  // namespace mtl
