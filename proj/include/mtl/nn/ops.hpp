#pragma once

#include <random>
#include <vector>

#include "mtl/nn/graph.hpp"

namespace mtl::nn {

// All spatial ops take NCHW tensors. Convolutions are stride-1 with "same"
// zero padding unless noted.

// k: [C, 3, 3], one kernel per input channel.
Var depthwise_conv3x3(const Var& x, const Var& k);

// w: [Co, Ci]; b: [Co] or an undefined Var for no bias.
Var pointwise_conv(const Var& x, const Var& w, const Var& b);

// General conv for small kernels (odd kh, kw). w: [Co, Ci, kh, kw].
Var conv2d_same(const Var& x, const Var& w, const Var& b);

// Depthwise 3x3 followed by a pointwise projection plus bias.
Var separable_conv(const Var& x, const Var& dw, const Var& pw, const Var& b);

// Per-channel batch normalization. Batch statistics in train mode (running
// stats updated with `momentum`), running statistics otherwise.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& run_mean,
               Tensor& run_var, bool train, double momentum = 0.9,
               double eps = 1e-5);

Var relu(const Var& x);
Var sigmoid(const Var& x);

// 2x2 stride-2 pooling; spatial dims must be even.
Var max_pool2(const Var& x);
Var avg_pool2(const Var& x);

Var concat_channels(const Var& a, const Var& b);

// Inverted dropout; identity when !train or rate == 0.
Var dropout(const Var& x, double rate, bool train, std::mt19937_64& rng);

Var softmax_channels(const Var& x);

Var upsample_bilinear(const Var& x, int out_h, int out_w);
Var resize_nearest(const Var& x, int out_h, int out_w);

Var global_avg_pool(const Var& x);  // [N,C,H,W] -> [N,C]
Var global_max_pool(const Var& x);  // [N,C,H,W] -> [N,C]

// x: [N, Ci], w: [Co, Ci], b: [Co] or undefined.
Var dense(const Var& x, const Var& w, const Var& b);

Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double c);

// Broadcast multiplies: s is [N,C] over spatial dims, or [N,1,H,W] over
// channels.
Var scale_channels(const Var& x, const Var& s);
Var scale_spatial(const Var& x, const Var& s);

// Channelwise [avg; max] stack -> [N,2,H,W] (CBAM spatial descriptor).
Var channel_mean_max(const Var& x);

// Equal-weight mean of same-shaped tensors.
Var average(const std::vector<Var>& xs);

// Value copy with gradients blocked.
Var detach(const Var& x);

}  // namespace mtl::nn
