#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "mtl/core/errors.hpp"

namespace mtl {

// Dense row-major tensor. Computation runs in double throughout; the on-disk
// MTLT container stores f32 (see io.hpp).
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
    std::size_t n = 1;
    for (int d : dims_) {
      if (d <= 0) throw ShapeError("tensor dims must be positive");
      n *= static_cast<std::size_t>(d);
    }
    data_.assign(n, 0.0);
  }

  Tensor(std::vector<int> dims, std::vector<double> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    std::size_t n = 1;
    for (int d : dims_) {
      if (d <= 0) throw ShapeError("tensor dims must be positive");
      n *= static_cast<std::size_t>(d);
    }
    if (n != data_.size()) throw ShapeError("tensor data size does not match dims");
  }

  static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }

  static Tensor full(std::vector<int> dims, double v) {
    Tensor t(std::move(dims));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  bool empty() const { return data_.empty(); }
  int ndim() const { return static_cast<int>(dims_.size()); }
  int dim(int i) const { return dims_.at(static_cast<std::size_t>(i)); }
  const std::vector<int>& dims() const { return dims_; }
  std::size_t numel() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // NCHW helpers.
  std::size_t idx4(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * dims_[1] + c) * dims_[2] + h) * dims_[3] + w;
  }
  double& at4(int n, int c, int h, int w) { return data_[idx4(n, c, h, w)]; }
  double at4(int n, int c, int h, int w) const { return data_[idx4(n, c, h, w)]; }

  std::size_t idx2(int i, int j) const {
    return static_cast<std::size_t>(i) * dims_[1] + j;
  }
  double& at2(int i, int j) { return data_[idx2(i, j)]; }
  double at2(int i, int j) const { return data_[idx2(i, j)]; }

  Tensor reshape(std::vector<int> dims) const {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    if (n != data_.size()) throw ShapeError("reshape: element count mismatch");
    return Tensor(std::move(dims), data_);
  }

  bool same_dims(const Tensor& o) const { return dims_ == o.dims_; }

 private:
  std::vector<int> dims_;
  std::vector<double> data_;
};

// Integer label grid (class indices / IGNORE), stored as u8.
class LabelGrid {
 public:
  LabelGrid() = default;

  explicit LabelGrid(std::vector<int> dims) : dims_(std::move(dims)) {
    std::size_t n = 1;
    for (int d : dims_) {
      if (d <= 0) throw ShapeError("label grid dims must be positive");
      n *= static_cast<std::size_t>(d);
    }
    data_.assign(n, 0);
  }

  LabelGrid(std::vector<int> dims, std::vector<std::uint8_t> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    std::size_t n = 1;
    for (int d : dims_) n *= static_cast<std::size_t>(d);
    if (n != data_.size()) throw ShapeError("label grid data size does not match dims");
  }

  int ndim() const { return static_cast<int>(dims_.size()); }
  int dim(int i) const { return dims_.at(static_cast<std::size_t>(i)); }
  const std::vector<int>& dims() const { return dims_; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::uint8_t* data() { return data_.data(); }
  const std::uint8_t* data() const { return data_.data(); }
  std::vector<std::uint8_t>& vec() { return data_; }
  const std::vector<std::uint8_t>& vec() const { return data_; }

  std::uint8_t& operator[](std::size_t i) { return data_[i]; }
  std::uint8_t operator[](std::size_t i) const { return data_[i]; }

 private:
  std::vector<int> dims_;
  std::vector<std::uint8_t> data_;
};

}  // namespace mtl
