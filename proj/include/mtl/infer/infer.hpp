#pragma once

#include <string>
#include <vector>

#include "mtl/model/model.hpp"

namespace mtl::infer {

// Window start offsets along one axis: 0, stride, ... plus a final window
// flush to the border; deduplicated and sorted.
std::vector<int> window_origins(int extent, int window, int stride);

struct ScenePrediction {
  Tensor hse;        // [H/2, W/2] densities in [0,1]; empty for LCZ-only models
  Tensor lcz_probs;  // [K, H, W] per-pixel simplex; empty for HSE-only models
};

// Tiled whole-scene forward pass. Overlapping windows are averaged with
// uniform weights; the P2F prior (when enabled) comes from the model's own
// HSE prediction. scene_image is [bands, H, W] with H, W >= window.
ScenePrediction sliding_window_predict(MtlModel& model, const Tensor& scene_image,
                                       int window = 128, int overlap = 32);

// 100 m product: mean probability over each block x block tile, then argmax
// with ties broken toward the lowest class index. Partial edge blocks are
// dropped: [K, H, W] -> [H/block, W/block].
LabelGrid aggregate_lcz(const Tensor& prob_map, int block = 10);

// Minimal zlib-backed PNG writers (8-bit grayscale / RGB).
void write_png_gray(const std::string& path, const Tensor& img01);  // [H, W] in [0,1]
void write_png_rgb(const std::string& path, int height, int width,
                   const std::vector<std::uint8_t>& rgb);

// hse.png (grayscale ramp), lcz.png (legend palette), hse.mtlt, lcz.mtlt.
// Empty maps are skipped.
void render_maps(const Tensor& hse, const LabelGrid& lcz, const std::string& out_dir);

namespace detail {
// channels: 1 = grayscale, 3 = RGB; raster is row-major, 8-bit.
void write_png(const std::string& path, int height, int width, int channels,
               const std::vector<std::uint8_t>& raster);
}  // namespace detail

}  // namespace mtl::infer
