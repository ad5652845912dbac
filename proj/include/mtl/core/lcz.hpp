#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "mtl/core/errors.hpp"

namespace mtl {

constexpr int kNumLczClasses = 17;
constexpr std::uint8_t kIgnoreLabel = 255;

enum class LczGroup { URBAN, NATURAL };

struct LczClass {
  int index;         // 0..16
  const char* name;  // display name
  LczGroup group;    // built types 1-10 are URBAN, A-G are NATURAL
  std::array<std::uint8_t, 3> color;  // map rendering palette (RGB)
};

// Indices 0-9 are urban LCZ 1-10, indices 10-16 are natural LCZ A-G.
const std::array<LczClass, kNumLczClasses>& lcz_classes();

LczGroup class_group(int index);  // throws IndexError outside 0..16

}  // namespace mtl
