#pragma once

#include "mtl/core/config.hpp"
#include "mtl/core/lcz.hpp"
#include "mtl/core/tensor.hpp"

namespace mtl {

// Learned task-weight parameters of the multi-task loss, s = log(sigma^2).
struct TaskWeights {
  double s_hse = 0.0;
  double s_lcz = 0.0;
};

// One training minibatch: images [N, bands, h, w] in [0,1], HSE density
// reference [N, h/2, w/2] in [0,1] (20 m grid) and LCZ labels [N, h, w]
// (10 m grid, class indices or kIgnoreLabel).
struct SampleBatch {
  Tensor images;
  Tensor hse_ref;
  LabelGrid lcz_ref;
};

// Checks the SampleBatch shape/range invariants against cfg.
void validate_batch(const SampleBatch& b, const ModelConfig& cfg);

}  // namespace mtl
