#pragma once

#include <cstdint>

#include "mtl/core/batch.hpp"
#include "mtl/core/tensor.hpp"

namespace mtl::data {

// One generated scene: image at 10 m GSD, HSE density reference at 20 m and
// LCZ labels at 10 m, all derived from a single procedural built-up mask so
// the two references stay mutually consistent.
struct SceneBundle {
  Tensor image;     // [bands, H, W]
  Tensor hse_ref;   // [H/2, W/2] in [0,1]
  LabelGrid lcz_ref;  // [H, W], class indices or kIgnoreLabel
  Tensor coverage;  // [H, W] built fraction per 10 m cell (diagnostic)
  std::uint64_t seed = 0;
};

struct SynthParams {
  int height = 260;   // 10 m cells; must be divisible by 20
  int width = 260;
  int bands = 10;
  double urban_fraction = 0.5;  // 0 = no settlements, 1 = dense urban cores
  double noise_sigma = 0.02;
  double ignore_fraction = 0.01;  // labels withheld as kIgnoreLabel
};

// Deterministic in (seed, params).
SceneBundle generate_scene(std::uint64_t seed, const SynthParams& params);

// Deterministic per-class reflectance used to synthesize image bands.
double material_spectrum(int class_index, int band);
double built_spectrum(int band);

}  // namespace mtl::data
