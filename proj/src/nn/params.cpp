#include "mtl/nn/params.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mtl/core/errors.hpp"
#include "mtl/core/io.hpp"

namespace mtl::nn {

namespace fs = std::filesystem;
using nlohmann::json;

std::string group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::Shared: return "shared";
    case ParamGroup::HseBranch: return "hse_branch";
    case ParamGroup::LczBranch: return "lcz_branch";
    case ParamGroup::TaskWeights: return "task_weights";
  }
  return "shared";
}

ParamGroup group_from_name(const std::string& s) {
  if (s == "shared") return ParamGroup::Shared;
  if (s == "hse_branch") return ParamGroup::HseBranch;
  if (s == "lcz_branch") return ParamGroup::LczBranch;
  if (s == "task_weights") return ParamGroup::TaskWeights;
  throw FormatError("unknown parameter group: " + s, 0);
}

Var ParameterStore::add(const std::string& name, Tensor init, ParamGroup group,
                        bool trainable) {
  if (entries_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  Var v(std::move(init), trainable);
  entries_[name] = ParamEntry{v, group, trainable};
  return v;
}

Var ParameterStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second.var;
}

Tensor& ParameterStore::buffer(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown buffer: " + name);
  return it->second.var.mutable_value();
}

std::vector<std::string> ParameterStore::names(bool trainable_only) const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_)
    if (!trainable_only || e.trainable) out.push_back(k);
  return out;
}

void ParameterStore::zero_grads() {
  for (auto& [k, e] : entries_) zero_grad(e.var);
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [k, e] : entries_)
    if (e.trainable) n += e.var.value().numel();
  return n;
}

std::map<std::string, Tensor> ParameterStore::snapshot() const {
  std::map<std::string, Tensor> snap;
  for (const auto& [k, e] : entries_) snap[k] = e.var.value();
  return snap;
}

void ParameterStore::restore(const std::map<std::string, Tensor>& snap) {
  for (auto& [k, e] : entries_) {
    auto it = snap.find(k);
    if (it == snap.end()) throw ConfigError("snapshot missing parameter: " + k);
    e.var.mutable_value() = it->second;
  }
}

namespace {

json config_to_json(const ModelConfig& cfg) {
  return json{{"bands", cfg.bands},
              {"patch_h", cfg.patch_h},
              {"patch_w", cfg.patch_w},
              {"base_features", cfg.base_features},
              {"num_classes", cfg.num_classes},
              {"dropout_rate", cfg.dropout_rate},
              {"p2f_enabled", cfg.p2f_enabled},
              {"cbam_enabled", cfg.cbam_enabled},
              {"aux_head_count", cfg.aux_head_count},
              {"input_gsd_m", cfg.input_gsd_m},
              {"hse_gsd_m", cfg.hse_gsd_m},
              {"lcz_gsd_m", cfg.lcz_gsd_m},
              {"task", task_mode_name(cfg.task)}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.bands = j.at("bands").get<int>();
  cfg.patch_h = j.at("patch_h").get<int>();
  cfg.patch_w = j.at("patch_w").get<int>();
  cfg.base_features = j.at("base_features").get<int>();
  cfg.num_classes = j.at("num_classes").get<int>();
  cfg.dropout_rate = j.at("dropout_rate").get<double>();
  cfg.p2f_enabled = j.at("p2f_enabled").get<bool>();
  cfg.cbam_enabled = j.at("cbam_enabled").get<bool>();
  cfg.aux_head_count = j.at("aux_head_count").get<int>();
  cfg.input_gsd_m = j.at("input_gsd_m").get<double>();
  cfg.hse_gsd_m = j.at("hse_gsd_m").get<double>();
  cfg.lcz_gsd_m = j.at("lcz_gsd_m").get<double>();
  cfg.task = task_mode_from_name(j.at("task").get<std::string>());
  return cfg;
}

}  // namespace

void ParameterStore::save(const std::string& dir, const ModelConfig& cfg,
                          int epoch) const {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "mtl-checkpoint";
  manifest["version"] = 1;
  manifest["epoch"] = epoch;
  manifest["config"] = config_to_json(cfg);
  json params = json::array();
  for (const auto& [name, e] : entries_) {
    std::string file = name + ".mtlt";
    write_tensor((fs::path(dir) / file).string(), e.var.value());
    params.push_back(json{{"name", name},
                          {"file", file},
                          {"group", group_name(e.group)},
                          {"dims", e.var.value().dims()},
                          {"trainable", e.trainable}});
  }
  manifest["params"] = params;
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw IoError("cannot write checkpoint manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

namespace {

json read_manifest(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw IoError("cannot open checkpoint manifest in " + dir);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad checkpoint manifest: ") + e.what(), 0);
  }
  return j;
}

}  // namespace

void ParameterStore::load_values(const std::string& dir) {
  json manifest = read_manifest(dir);
  for (const auto& p : manifest.at("params")) {
    std::string name = p.at("name").get<std::string>();
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw FormatError("checkpoint parameter not in model: " + name, 0);
    Tensor t = read_tensor((fs::path(dir) / p.at("file").get<std::string>()).string());
    if (!t.same_dims(it->second.var.value()))
      throw FormatError("checkpoint dims mismatch for " + name, 0);
    it->second.var.mutable_value() = std::move(t);
  }
}

ModelConfig ParameterStore::read_checkpoint_config(const std::string& dir, int* epoch) {
  json manifest = read_manifest(dir);
  if (epoch) *epoch = manifest.at("epoch").get<int>();
  return config_from_json(manifest.at("config"));
}

Tensor kaiming_uniform(std::vector<int> dims, int fan_in, std::mt19937_64& rng) {
  Tensor t(std::move(dims));
  double bound = std::sqrt(6.0 / std::max(1, fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = u(rng);
  return t;
}

}  // namespace mtl::nn
