#include "mtl/core/lcz.hpp"

namespace mtl {

const std::array<LczClass, kNumLczClasses>& lcz_classes() {
  static const std::array<LczClass, kNumLczClasses> table = {{
      {0, "Compact High-rise", LczGroup::URBAN, {140, 0, 0}},
      {1, "Compact Mid-rise", LczGroup::URBAN, {209, 0, 0}},
      {2, "Compact Low-rise", LczGroup::URBAN, {255, 0, 0}},
      {3, "Open High-rise", LczGroup::URBAN, {191, 77, 0}},
      {4, "Open Mid-rise", LczGroup::URBAN, {255, 102, 0}},
      {5, "Open Low-rise", LczGroup::URBAN, {255, 153, 85}},
      {6, "Lightweight Low-rise", LczGroup::URBAN, {250, 238, 5}},
      {7, "Large Low-rise", LczGroup::URBAN, {188, 188, 188}},
      {8, "Sparsely Built", LczGroup::URBAN, {255, 204, 170}},
      {9, "Heavy Industry", LczGroup::URBAN, {85, 85, 85}},
      {10, "Dense Trees", LczGroup::NATURAL, {0, 106, 0}},
      {11, "Scattered Trees", LczGroup::NATURAL, {0, 170, 0}},
      {12, "Bush (Scrub)", LczGroup::NATURAL, {100, 133, 37}},
      {13, "Low Plants", LczGroup::NATURAL, {185, 219, 121}},
      {14, "Bare Rock or Paved", LczGroup::NATURAL, {0, 0, 0}},
      {15, "Bare Soil or Sand", LczGroup::NATURAL, {251, 247, 174}},
      {16, "Water", LczGroup::NATURAL, {106, 106, 255}},
  }};
  return table;
}

LczGroup class_group(int index) {
  if (index < 0 || index >= kNumLczClasses)
    throw IndexError("LCZ class index out of range: " + std::to_string(index));
  return lcz_classes()[static_cast<std::size_t>(index)].group;
}

}  // namespace mtl
