#pragma once

#include <cstdint>
#include <string>

namespace mtl {

enum class TaskMode { Both, HseOnly, LczOnly };

struct ModelConfig {
  int bands = 10;           // input channel count
  int patch_h = 128;        // input patch height (px, 10 m GSD)
  int patch_w = 128;
  int base_features = 16;   // feature maps of the first backbone block
  int num_classes = 17;
  double dropout_rate = 0.1;
  bool p2f_enabled = false;
  bool cbam_enabled = true;  // identity attention when off (ablation axis)
  int aux_head_count = 3;
  double input_gsd_m = 10.0;
  double hse_gsd_m = 20.0;
  double lcz_gsd_m = 100.0;
  TaskMode task = TaskMode::Both;
};

// Throws ConfigError naming the first violated invariant.
void validate_config(const ModelConfig& cfg);

std::string task_mode_name(TaskMode t);
TaskMode task_mode_from_name(const std::string& s);

}  // namespace mtl
