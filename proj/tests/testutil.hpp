#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "mtl/core/tensor.hpp"
#include "mtl/nn/graph.hpp"

namespace testutil {

inline mtl::Tensor random_tensor(std::vector<int> dims, std::mt19937_64& rng,
                                 double lo = -1.0, double hi = 1.0) {
  mtl::Tensor t(std::move(dims));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
  return t;
}

// Reduces a forward output to a scalar with fixed random coefficients so
// every output element contributes to the gradient under test.
inline mtl::nn::Var dot_reduce(const mtl::nn::Var& y, std::mt19937_64& rng) {
  auto coeffs = std::make_shared<mtl::Tensor>(random_tensor(y.value().dims(), rng));
  double v = 0.0;
  for (std::size_t i = 0; i < y.value().numel(); ++i) v += (*coeffs)[i] * y.value()[i];
  return mtl::nn::make_result(mtl::Tensor::scalar(v), {y}, [y, coeffs](mtl::nn::Node& res) {
    if (!y.requires_grad()) return;
    double g = res.grad[0];
    mtl::Tensor& gx = y.grad();
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g * (*coeffs)[i];
  });
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

// Central finite differences of `scalar_fn` (a pure function of `input`)
// against the analytic gradient produced by `grad_fn`.
inline GradCheckResult grad_check(
    mtl::Tensor input, const std::function<double(const mtl::Tensor&)>& scalar_fn,
    const std::function<mtl::Tensor(const mtl::Tensor&)>& grad_fn, double h = 1e-5,
    std::size_t max_elems = 64) {
  mtl::Tensor analytic = grad_fn(input);
  GradCheckResult r;
  std::size_t step = std::max<std::size_t>(1, input.numel() / max_elems);
  for (std::size_t i = 0; i < input.numel(); i += step) {
    mtl::Tensor plus = input, minus = input;
    plus[i] += h;
    minus[i] -= h;
    double fd = (scalar_fn(plus) - scalar_fn(minus)) / (2.0 * h);
    double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-8});
    r.max_rel_err = std::max(r.max_rel_err, std::abs(fd - analytic[i]) / denom);
    ++r.checked;
  }
  return r;
}

}  // namespace testutil
