#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtl/core/lcz.hpp"
#include "mtl/core/tensor.hpp"

namespace mtl::metrics {

// K x K reference-by-prediction counts; counts(i, j) = reference class i
// predicted as j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int k);

  int k() const { return k_; }
  long long& counts(int ref, int pred);
  long long counts(int ref, int pred) const;
  long long total() const;
  long long row_sum(int i) const;
  long long col_sum(int j) const;

  // Tallies (ref, pred) pairs; kIgnoreLabel in either sequence skips the pair.
  void accumulate(std::span<const std::uint8_t> refs,
                  std::span<const std::uint8_t> preds);
  void merge(const ConfusionMatrix& other);

 private:
  int k_;
  std::vector<long long> counts_;
};

struct PenaltyMatrix {
  int k = 0;
  std::vector<double> w;  // row-major, diagonal 1, entries in [0,1]

  double at(int i, int j) const { return w[static_cast<std::size_t>(i) * k + j]; }
  void validate() const;
};

double oa(const ConfusionMatrix& cm);
double kappa(const ConfusionMatrix& cm);  // DegenerateError when p_e == 1
double aa(const ConfusionMatrix& cm);     // mean recall over classes with references
double recall(const ConfusionMatrix& cm, int cls, bool* degenerate = nullptr);
double precision(const ConfusionMatrix& cm, int cls, bool* degenerate = nullptr);
double f_score(const ConfusionMatrix& cm, int cls, bool* degenerate = nullptr);
double weighted_accuracy(const ConfusionMatrix& cm, const PenaltyMatrix& w);

// 17x17 default: diagonal 1, 0.5 within the urban/natural group, 0 across.
PenaltyMatrix default_lcz_penalty();
PenaltyMatrix load_penalty_csv(const std::string& path, int k);

// HSE density helpers. Density values must lie in [0,1].
LabelGrid binarize_density(const Tensor& density, double threshold = 0.5);
double density_mae(const Tensor& pred, const Tensor& ref);  // percent scale

// Full evaluation report serialized to JSON (schema: oa, kappa, aa, wa,
// per_class, mae_percent).
struct EvalReport {
  double oa = 0.0, kappa = 0.0, aa = 0.0, wa = 0.0;
  struct PerClass {
    int index;
    std::string name;
    double recall;
    double f_score;
    bool degenerate;
  };
  std::vector<PerClass> per_class;
  double mae_percent = 0.0;
  // Aggregated-binary HSE assessment.
  double hse_kappa = 0.0, hse_aa = 0.0, hse_recall = 0.0, hse_f = 0.0;
};

std::string report_to_json(const EvalReport& r);

}  // namespace mtl::metrics
