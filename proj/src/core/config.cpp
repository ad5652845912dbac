#include "mtl/core/config.hpp"

#include <cmath>

#include "mtl/core/errors.hpp"

namespace mtl {

void validate_config(const ModelConfig& cfg) {
  if (cfg.bands < 1) throw ConfigError("bands must be >= 1");
  if (cfg.patch_h <= 0 || cfg.patch_h % 4 != 0)
    throw ConfigError("patch_h divisible by 4");
  if (cfg.patch_w <= 0 || cfg.patch_w % 4 != 0)
    throw ConfigError("patch_w divisible by 4");
  if (cfg.base_features < 1) throw ConfigError("base_features must be >= 1");
  if (cfg.num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0))
    throw ConfigError("dropout_rate must be in [0, 1)");
  if (cfg.aux_head_count < 0) throw ConfigError("aux_head_count must be >= 0");
  if (cfg.input_gsd_m <= 0 || cfg.hse_gsd_m <= 0 || cfg.lcz_gsd_m <= 0)
    throw ConfigError("GSDs must be positive");
  double ratio = cfg.hse_gsd_m / cfg.input_gsd_m;
  if (ratio < 1.0 || std::abs(ratio - std::round(ratio)) > 1e-9)
    throw ConfigError("hse_gsd_m / input_gsd_m must be an integer >= 1");
}

std::string task_mode_name(TaskMode t) {
  switch (t) {
    case TaskMode::Both: return "mtl";
    case TaskMode::HseOnly: return "hse";
    case TaskMode::LczOnly: return "lcz";
  }
  return "mtl";
}

TaskMode task_mode_from_name(const std::string& s) {
  if (s == "mtl" || s == "both") return TaskMode::Both;
  if (s == "hse") return TaskMode::HseOnly;
  if (s == "lcz") return TaskMode::LczOnly;
  throw ConfigError("unknown task mode: " + s);
}

}  // namespace mtl
