#include "mtl/core/batch.hpp"

namespace mtl {

void validate_batch(const SampleBatch& b, const ModelConfig& cfg) {
  if (b.images.ndim() != 4) throw ShapeError("images must be [N, bands, h, w]");
  int n = b.images.dim(0);
  if (b.images.dim(1) != cfg.bands) throw ShapeError("images channel count != cfg.bands");
  if (b.images.dim(2) != cfg.patch_h || b.images.dim(3) != cfg.patch_w)
    throw ShapeError("images spatial dims != cfg patch size");
  if (!b.hse_ref.empty()) {
    if (b.hse_ref.ndim() != 3 || b.hse_ref.dim(0) != n ||
        b.hse_ref.dim(1) != cfg.patch_h / 2 || b.hse_ref.dim(2) != cfg.patch_w / 2)
      throw ShapeError("hse_ref must be [N, h/2, w/2]");
    for (std::size_t i = 0; i < b.hse_ref.numel(); ++i)
      if (b.hse_ref[i] < 0.0 || b.hse_ref[i] > 1.0)
        throw RangeError("hse_ref values must lie in [0, 1]");
  }
  if (!b.lcz_ref.empty()) {
    if (b.lcz_ref.ndim() != 3 || b.lcz_ref.dim(0) != n ||
        b.lcz_ref.dim(1) != cfg.patch_h || b.lcz_ref.dim(2) != cfg.patch_w)
      throw ShapeError("lcz_ref must be [N, h, w]");
    for (std::size_t i = 0; i < b.lcz_ref.numel(); ++i) {
      std::uint8_t v = b.lcz_ref[i];
      if (v != kIgnoreLabel && v >= cfg.num_classes)
        throw IndexError("lcz_ref label out of range");
    }
  }
}

}  // namespace mtl
