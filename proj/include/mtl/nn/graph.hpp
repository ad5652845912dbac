#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mtl/core/tensor.hpp"

namespace mtl::nn {

// One node of the dynamic compute graph built during a forward pass.
// `backprop` reads this node's grad and accumulates into the parents' grads.
struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same dims as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backprop;

  Tensor& ensure_grad() {
    if (grad.empty() && !value.empty()) grad = Tensor(value.dims());
    return grad;
  }
};

// Value handle over a graph node. Copying shares the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor v, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    node_->value = std::move(v);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  Tensor& grad() const { return node_->ensure_grad(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::shared_ptr<Node>& node() const { return node_; }

  double item() const { return node_->value[0]; }

 private:
  std::shared_ptr<Node> node_;
};

// Creates the result node of an op; requires_grad is inherited from parents.
Var make_result(Tensor value, std::vector<Var> parents,
                std::function<void(Node&)> backprop);

// Reverse-mode sweep from a scalar root (grad seeded with ones).
void backward(const Var& root);

// Clears the grad buffer of a single node.
void zero_grad(Var& v);

}  // namespace mtl::nn
