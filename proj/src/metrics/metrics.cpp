#include "mtl/metrics/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mtl/core/errors.hpp"

namespace mtl::metrics {

ConfusionMatrix::ConfusionMatrix(int k) : k_(k) {
  if (k < 1) throw ConfigError("confusion matrix needs k >= 1");
  counts_.assign(static_cast<std::size_t>(k) * k, 0);
}

long long& ConfusionMatrix::counts(int ref, int pred) {
  return counts_[static_cast<std::size_t>(ref) * k_ + pred];
}

long long ConfusionMatrix::counts(int ref, int pred) const {
  return counts_[static_cast<std::size_t>(ref) * k_ + pred];
}

long long ConfusionMatrix::total() const {
  long long n = 0;
  for (long long c : counts_) n += c;
  return n;
}

long long ConfusionMatrix::row_sum(int i) const {
  long long n = 0;
  for (int j = 0; j < k_; ++j) n += counts(i, j);
  return n;
}

long long ConfusionMatrix::col_sum(int j) const {
  long long n = 0;
  for (int i = 0; i < k_; ++i) n += counts(i, j);
  return n;
}

void ConfusionMatrix::accumulate(std::span<const std::uint8_t> refs,
                                 std::span<const std::uint8_t> preds) {
  if (refs.size() != preds.size())
    throw ShapeError("accumulate: label sequences differ in length");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    std::uint8_t r = refs[i], p = preds[i];
    if (r == kIgnoreLabel || p == kIgnoreLabel) continue;
    if (r >= k_ || p >= k_) throw IndexError("accumulate: label >= k");
    ++counts(r, p);
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw ShapeError("merge: k mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

void PenaltyMatrix::validate() const {
  if (k < 1 || w.size() != static_cast<std::size_t>(k) * k)
    throw ShapeError("penalty matrix: bad dims");
  for (int i = 0; i < k; ++i) {
    if (at(i, i) != 1.0) throw RangeError("penalty matrix: diagonal must be 1");
    for (int j = 0; j < k; ++j)
      if (at(i, j) < 0.0 || at(i, j) > 1.0)
        throw RangeError("penalty matrix: entries must lie in [0,1]");
  }
}

namespace {
long long require_total(const ConfusionMatrix& cm) {
  long long n = cm.total();
  if (n <= 0) throw DegenerateError("metric on an empty confusion matrix");
  return n;
}
}  // namespace

double oa(const ConfusionMatrix& cm) {
  long long n = require_total(cm);
  long long diag = 0;
  for (int i = 0; i < cm.k(); ++i) diag += cm.counts(i, i);
  return static_cast<double>(diag) / static_cast<double>(n);
}

double kappa(const ConfusionMatrix& cm) {
  long long n = require_total(cm);
  double dn = static_cast<double>(n);
  double po = oa(cm);
  double pe = 0.0;
  for (int i = 0; i < cm.k(); ++i)
    pe += static_cast<double>(cm.row_sum(i)) * static_cast<double>(cm.col_sum(i)) / (dn * dn);
  if (pe >= 1.0) throw DegenerateError("kappa undefined: p_e = 1");
  return (po - pe) / (1.0 - pe);
}

double aa(const ConfusionMatrix& cm) {
  require_total(cm);
  double sum = 0.0;
  int classes = 0;
  for (int i = 0; i < cm.k(); ++i) {
    long long row = cm.row_sum(i);
    if (row == 0) continue;
    sum += static_cast<double>(cm.counts(i, i)) / static_cast<double>(row);
    ++classes;
  }
  if (classes == 0) throw DegenerateError("aa: no class has references");
  return sum / classes;
}

double recall(const ConfusionMatrix& cm, int cls, bool* degenerate) {
  if (cls < 0 || cls >= cm.k()) throw IndexError("recall: class out of range");
  long long row = cm.row_sum(cls);
  if (degenerate) *degenerate = (row == 0);
  if (row == 0) return 0.0;
  return static_cast<double>(cm.counts(cls, cls)) / static_cast<double>(row);
}

double precision(const ConfusionMatrix& cm, int cls, bool* degenerate) {
  if (cls < 0 || cls >= cm.k()) throw IndexError("precision: class out of range");
  long long col = cm.col_sum(cls);
  if (degenerate) *degenerate = (col == 0);
  if (col == 0) return 0.0;
  return static_cast<double>(cm.counts(cls, cls)) / static_cast<double>(col);
}

double f_score(const ConfusionMatrix& cm, int cls, bool* degenerate) {
  bool dr = false, dp = false;
  double r = recall(cm, cls, &dr);
  double p = precision(cm, cls, &dp);
  bool deg = dr || dp || (p + r == 0.0);
  if (degenerate) *degenerate = deg;
  if (deg) return 0.0;
  return 2.0 * p * r / (p + r);
}

double weighted_accuracy(const ConfusionMatrix& cm, const PenaltyMatrix& w) {
  if (w.k != cm.k()) throw ShapeError("weighted_accuracy: penalty matrix dims mismatch");
  long long n = require_total(cm);
  double sum = 0.0;
  for (int i = 0; i < cm.k(); ++i)
    for (int j = 0; j < cm.k(); ++j)
      sum += w.at(i, j) * static_cast<double>(cm.counts(i, j));
  return sum / static_cast<double>(n);
}

PenaltyMatrix default_lcz_penalty() {
  PenaltyMatrix m;
  m.k = kNumLczClasses;
  m.w.assign(static_cast<std::size_t>(m.k) * m.k, 0.0);
  for (int i = 0; i < m.k; ++i)
    for (int j = 0; j < m.k; ++j) {
      if (i == j)
        m.w[static_cast<std::size_t>(i) * m.k + j] = 1.0;
      else if (class_group(i) == class_group(j))
        m.w[static_cast<std::size_t>(i) * m.k + j] = 0.5;
    }
  return m;
}

PenaltyMatrix load_penalty_csv(const std::string& path, int k) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open penalty matrix: " + path);
  PenaltyMatrix m;
  m.k = k;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= k) throw FormatError(path + ": too many rows", 0);
    std::istringstream is(line);
    std::string cell;
    int col = 0;
    while (std::getline(is, cell, ',')) {
      if (col >= k) throw FormatError(path + ": too many columns", 0);
      m.w.push_back(std::stod(cell));
      ++col;
    }
    if (col != k) throw FormatError(path + ": row with wrong column count", 0);
    ++row;
  }
  if (row != k) throw FormatError(path + ": wrong row count", 0);
  m.validate();
  return m;
}

LabelGrid binarize_density(const Tensor& density, double threshold) {
  LabelGrid out(density.dims());
  for (std::size_t i = 0; i < density.numel(); ++i) {
    double v = density[i];
    if (v < 0.0 || v > 1.0) throw RangeError("binarize_density: value outside [0,1]");
    out[i] = v >= threshold ? 1 : 0;
  }
  return out;
}

double density_mae(const Tensor& pred, const Tensor& ref) {
  if (pred.numel() != ref.numel()) throw ShapeError("density_mae: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) sum += std::abs(pred[i] - ref[i]);
  return 100.0 * sum / static_cast<double>(pred.numel());
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["oa"] = r.oa;
  j["kappa"] = r.kappa;
  j["aa"] = r.aa;
  j["wa"] = r.wa;
  j["mae_percent"] = r.mae_percent;
  nlohmann::json pc = nlohmann::json::array();
  for (const auto& c : r.per_class)
    pc.push_back({{"index", c.index},
                  {"name", c.name},
                  {"recall", c.recall},
                  {"f_score", c.f_score},
                  {"degenerate", c.degenerate}});
  j["per_class"] = pc;
  j["hse_binary"] = {{"kappa", r.hse_kappa},
                     {"aa", r.hse_aa},
                     {"recall", r.hse_recall},
                     {"f_score", r.hse_f}};
  return j.dump(2);
}

}  // namespace mtl::metrics
