#include "mtl/nn/graph.hpp"

#include <algorithm>
#include <unordered_set>

namespace mtl::nn {

Var make_result(Tensor value, std::vector<Var> parents,
                std::function<void(Node&)> backprop) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  for (const auto& p : parents) {
    if (p.defined()) {
      node->parents.push_back(p.node());
      needs = needs || p.node()->requires_grad;
    }
  }
  node->requires_grad = needs;
  if (needs && backprop) {
    Node* raw = node.get();
    node->backprop = [raw, fn = std::move(backprop)]() { fn(*raw); };
  }
  return Var(node);
}

void backward(const Var& root) {
  if (!root.defined() || !root.node()->requires_grad) return;
  // Iterative post-order DFS to get a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  Tensor& g = root.node()->ensure_grad();
  std::fill(g.vec().begin(), g.vec().end(), 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop();
}

void zero_grad(Var& v) {
  if (!v.defined()) return;
  Tensor& g = v.node()->ensure_grad();
  std::fill(g.vec().begin(), g.vec().end(), 0.0);
}

}  // namespace mtl::nn
