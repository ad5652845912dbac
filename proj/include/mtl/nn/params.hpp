#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mtl/core/config.hpp"
#include "mtl/nn/graph.hpp"

namespace mtl::nn {

// Parameter groups mirror the loss structure: shared backbone weights, the
// two branch weight sets and the learned task weights (s_hse, s_lcz).
enum class ParamGroup { Shared, HseBranch, LczBranch, TaskWeights };

std::string group_name(ParamGroup g);
ParamGroup group_from_name(const std::string& s);

struct ParamEntry {
  Var var;
  ParamGroup group = ParamGroup::Shared;
  bool trainable = true;  // false for batch-norm running statistics
};

// Named model parameters with deterministic (lexicographic) iteration order.
class ParameterStore {
 public:
  Var add(const std::string& name, Tensor init, ParamGroup group,
          bool trainable = true);
  Var get(const std::string& name) const;
  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  Tensor& buffer(const std::string& name);  // mutable value of a non-trainable entry

  const std::map<std::string, ParamEntry>& entries() const { return entries_; }
  std::vector<std::string> names(bool trainable_only = false) const;

  void zero_grads();
  std::size_t parameter_count() const;

  // Deep copy / restore of all values (checkpoint-in-memory).
  std::map<std::string, Tensor> snapshot() const;
  void restore(const std::map<std::string, Tensor>& snap);

  // Checkpoint directory: manifest.json + one MTLT file per parameter.
  void save(const std::string& dir, const ModelConfig& cfg, int epoch) const;
  void load_values(const std::string& dir);  // into an already-built store

  static ModelConfig read_checkpoint_config(const std::string& dir, int* epoch = nullptr);

 private:
  std::map<std::string, ParamEntry> entries_;
};

// Kaiming-uniform fan-in initialization helpers.
Tensor kaiming_uniform(std::vector<int> dims, int fan_in, std::mt19937_64& rng);

}  // namespace mtl::nn
