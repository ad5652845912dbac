#pragma once

#include <string>

#include "mtl/core/tensor.hpp"

namespace mtl {

// MTLT tensor container, little-endian:
//   magic "MTLT" | version u8 = 1 | dtype u8 (1 = f32, 2 = u8) | ndim u8 |
//   ndim x u32 dims | row-major payload.
void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor(const std::string& path);

void write_labels(const std::string& path, const LabelGrid& g);
LabelGrid read_labels(const std::string& path);

}  // namespace mtl
