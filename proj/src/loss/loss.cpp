#include "mtl/loss/loss.hpp"

#include <cmath>
#include <memory>
#include <sstream>

#include "mtl/core/errors.hpp"
#include "mtl/nn/ops.hpp"

namespace mtl {

namespace {
constexpr double kProbFloor = 1e-12;
}

double weighted_mae(const Tensor& pred, const Tensor& ref) {
  if (pred.numel() != ref.numel()) throw ShapeError("weighted_mae: shape mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    double w = std::exp(ref[i]);
    num += w * std::abs(pred[i] - ref[i]);
    den += w;
  }
  return num / den;
}

nn::Var weighted_mae_loss(const nn::Var& pred, const Tensor& ref) {
  if (pred.value().numel() != ref.numel())
    throw ShapeError("weighted_mae: shape mismatch");
  auto weights = std::make_shared<std::vector<double>>(ref.numel());
  double den = 0.0;
  for (std::size_t i = 0; i < ref.numel(); ++i) {
    (*weights)[i] = std::exp(ref[i]);
    den += (*weights)[i];
  }
  double num = 0.0;
  for (std::size_t i = 0; i < ref.numel(); ++i)
    num += (*weights)[i] * std::abs(pred.value()[i] - ref[i]);
  Tensor out = Tensor::scalar(num / den);
  Tensor ref_copy = ref;
  return nn::make_result(std::move(out), {pred},
                         [pred, weights, ref_copy, den](nn::Node& res) mutable {
                           if (!pred.requires_grad()) return;
                           double g = res.grad[0] / den;
                           Tensor& gx = pred.grad();
                           for (std::size_t i = 0; i < gx.numel(); ++i) {
                             double d = pred.value()[i] - ref_copy[i];
                             double s = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
                             gx[i] += g * (*weights)[i] * s;
                           }
                         });
}

namespace {

double cross_entropy_impl(const Tensor& probs, const LabelGrid& labels,
                          std::size_t* count_out) {
  if (probs.ndim() != 4) throw ShapeError("lcz_cross_entropy: probs must be [N,K,h,w]");
  const int N = probs.dim(0), K = probs.dim(1), H = probs.dim(2), W = probs.dim(3);
  if (labels.ndim() != 3 || labels.dim(0) != N || labels.dim(1) != H || labels.dim(2) != W)
    throw ShapeError("lcz_cross_entropy: label grid must be [N,h,w]");
  double sum = 0.0;
  std::size_t count = 0;
  for (int n = 0; n < N; ++n)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        std::uint8_t lab = labels[(static_cast<std::size_t>(n) * H + i) * W + j];
        if (lab == kIgnoreLabel) continue;
        if (lab >= K) throw IndexError("lcz_cross_entropy: label out of range");
        double p = std::max(probs.at4(n, lab, i, j), kProbFloor);
        sum -= std::log(p);
        ++count;
      }
  if (count == 0) throw EmptyBatchError("lcz_cross_entropy: every pixel is IGNORE");
  if (count_out) *count_out = count;
  return sum / static_cast<double>(count);
}

}  // namespace

double lcz_cross_entropy(const Tensor& avg_probs, const LabelGrid& labels) {
  return cross_entropy_impl(avg_probs, labels, nullptr);
}

nn::Var lcz_cross_entropy_loss(const nn::Var& avg_probs, const LabelGrid& labels) {
  std::size_t count = 0;
  double value = cross_entropy_impl(avg_probs.value(), labels, &count);
  auto labels_copy = std::make_shared<LabelGrid>(labels);
  return nn::make_result(
      Tensor::scalar(value), {avg_probs}, [avg_probs, labels_copy, count](nn::Node& res) mutable {
        if (!avg_probs.requires_grad()) return;
        const Tensor& p = avg_probs.value();
        const int N = p.dim(0), H = p.dim(2), W = p.dim(3);
        double g = res.grad[0] / static_cast<double>(count);
        Tensor& gx = avg_probs.grad();
        for (int n = 0; n < N; ++n)
          for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
              std::uint8_t lab = (*labels_copy)[(static_cast<std::size_t>(n) * H + i) * W + j];
              if (lab == kIgnoreLabel) continue;
              double pv = p.at4(n, lab, i, j);
              if (pv > kProbFloor) gx.at4(n, lab, i, j) -= g / pv;
            }
      });
}

double multitask_loss(double l_hse, double l_lcz, const TaskWeights& w) {
  return 0.5 * std::exp(-w.s_hse) * l_hse + std::exp(-w.s_lcz) * l_lcz +
         0.5 * w.s_hse + 0.5 * w.s_lcz;
}

nn::Var multitask_loss_var(const nn::Var& l_hse, const nn::Var& l_lcz,
                           const nn::Var& s_hse, const nn::Var& s_lcz) {
  double lh = l_hse.item(), ll = l_lcz.item();
  double sh = s_hse.item(), sl = s_lcz.item();
  double value = 0.5 * std::exp(-sh) * lh + std::exp(-sl) * ll + 0.5 * sh + 0.5 * sl;
  return nn::make_result(
      Tensor::scalar(value), {l_hse, l_lcz, s_hse, s_lcz},
      [l_hse, l_lcz, s_hse, s_lcz](nn::Node& res) mutable {
        double g = res.grad[0];
        double lh = l_hse.item(), ll = l_lcz.item();
        double sh = s_hse.item(), sl = s_lcz.item();
        if (l_hse.requires_grad()) l_hse.grad()[0] += g * 0.5 * std::exp(-sh);
        if (l_lcz.requires_grad()) l_lcz.grad()[0] += g * std::exp(-sl);
        if (s_hse.requires_grad())
          s_hse.grad()[0] += g * (-0.5 * std::exp(-sh) * lh + 0.5);
        if (s_lcz.requires_grad())
          s_lcz.grad()[0] += g * (-std::exp(-sl) * ll + 0.5);
      });
}

TaskWeights optimal_task_weights(double l_hse, double l_lcz) {
  if (l_hse <= 0.0 || l_lcz <= 0.0)
    throw DomainError("optimal_task_weights: losses must be positive");
  return TaskWeights{std::log(l_hse), std::log(2.0 * l_lcz)};
}

std::string loss_report_csv_header() { return "step,l_hse,l_lcz,l_mt,s_hse,s_lcz"; }

std::string loss_report_csv_row(int step, const LossReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << step << ',' << r.l_hse << ',' << r.l_lcz << ',' << r.l_mt << ',' << r.s_hse
     << ',' << r.s_lcz;
  return os.str();
}

}  // namespace mtl
