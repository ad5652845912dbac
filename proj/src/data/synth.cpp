#include "mtl/data/synth.hpp"

#include <algorithm>
#include <cmath>

#include "mtl/core/errors.hpp"

namespace mtl::data {

namespace {

constexpr int kSub = 5;  // 2 m subcells per 10 m cell edge

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double hash01(std::uint64_t seed, std::uint64_t tag, std::int64_t x, std::int64_t y) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(tag ^ splitmix64(
                        static_cast<std::uint64_t>(x) * 0x1f123bb5ULL ^
                        (static_cast<std::uint64_t>(y) << 32))));
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

// Multi-octave value noise over the 10 m cell grid, result in [0,1).
double value_noise(std::uint64_t seed, std::uint64_t tag, int x, int y,
                   double base_cell, int octaves) {
  double sum = 0.0, amp = 1.0, total = 0.0;
  double cell = base_cell;
  for (int o = 0; o < octaves; ++o) {
    double fx = x / cell, fy = y / cell;
    std::int64_t ix = static_cast<std::int64_t>(std::floor(fx));
    std::int64_t iy = static_cast<std::int64_t>(std::floor(fy));
    double tx = smooth(fx - ix), ty = smooth(fy - iy);
    std::uint64_t t = tag * 1000 + o;
    double v00 = hash01(seed, t, ix, iy);
    double v10 = hash01(seed, t, ix + 1, iy);
    double v01 = hash01(seed, t, ix, iy + 1);
    double v11 = hash01(seed, t, ix + 1, iy + 1);
    double v = (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty;
    sum += amp * v;
    total += amp;
    amp *= 0.5;
    cell *= 0.5;
  }
  return sum / total;
}

double gauss(std::uint64_t seed, std::uint64_t tag, std::int64_t x, std::int64_t y) {
  double u1 = std::max(hash01(seed, tag, x, y), 1e-12);
  double u2 = hash01(seed, tag + 7919, x, y);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int natural_label(double veg, double wet) {
  if (wet > 0.78) return 16;  // Water
  if (veg > 0.62) return 10;  // Dense Trees
  if (veg > 0.50) return 11;  // Scattered Trees
  if (veg > 0.42) return 12;  // Bush (Scrub)
  if (veg > 0.28) return 13;  // Low Plants
  if (wet < 0.22) return 14;  // Bare Rock or Paved
  return 15;                  // Bare Soil or Sand
}

}  // namespace

double material_spectrum(int class_index, int band) {
  double v = 0.5 + 0.5 * std::sin(1.7 * (class_index + 1) + 0.9 * band +
                                  0.31 * (class_index + 1) * (band + 1));
  return 0.12 + 0.72 * v;
}

double built_spectrum(int band) { return 0.35 + 0.25 * std::sin(0.8 * band + 0.4); }

SceneBundle generate_scene(std::uint64_t seed, const SynthParams& p) {
  const int H = p.height, W = p.width;
  if (H < 20 || W < 20 || H % 2 != 0 || W % 2 != 0)
    throw ConfigError("scene dims must be even and >= 20 (20 m HSE grid)");
  if (p.bands < 1) throw ConfigError("bands must be >= 1");
  if (p.urban_fraction < 0.0 || p.urban_fraction > 1.0)
    throw ConfigError("urban_fraction must lie in [0,1]");

  const double uf = p.urban_fraction;
  std::vector<double> density(static_cast<std::size_t>(H) * W);
  std::vector<double> height(static_cast<std::size_t>(H) * W);
  std::vector<double> veg(static_cast<std::size_t>(H) * W);
  std::vector<double> wet(static_cast<std::size_t>(H) * W);
  std::vector<double> industrial(static_cast<std::size_t>(H) * W);
  std::vector<double> large(static_cast<std::size_t>(H) * W);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      std::size_t idx = static_cast<std::size_t>(i) * W + j;
      density[idx] = value_noise(seed, 1, j, i, 24.0, 3);
      height[idx] = value_noise(seed, 2, j, i, 32.0, 2);
      veg[idx] = value_noise(seed, 3, j, i, 16.0, 3);
      wet[idx] = value_noise(seed, 4, j, i, 40.0, 2);
      industrial[idx] = value_noise(seed, 5, j, i, 48.0, 1);
      large[idx] = value_noise(seed, 6, j, i, 44.0, 1);
    }

  // Built mask on a 2 m subgrid: per-cell rectangles sized by the local
  // coverage target, big slabs in industrial / large-low-rise zones, and a
  // road lattice through settled areas.
  const int SH = H * kSub, SW = W * kSub;
  std::vector<std::uint8_t> built(static_cast<std::size_t>(SH) * SW, 0);
  std::vector<std::uint8_t> ind_zone(static_cast<std::size_t>(H) * W, 0);
  std::vector<std::uint8_t> large_zone(static_cast<std::size_t>(H) * W, 0);

  auto target = [&](std::size_t idx) {
    if (uf <= 0.0) return 0.0;
    return std::clamp((density[idx] - (1.0 - uf)) * 2.2, 0.0, 1.0);
  };

  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      std::size_t idx = static_cast<std::size_t>(i) * W + j;
      double t = target(idx);
      if (t < 0.02) continue;
      bool ind = industrial[idx] > 0.78;
      bool lrg = !ind && large[idx] > 0.78;
      ind_zone[idx] = ind;
      large_zone[idx] = lrg;
      if (ind || lrg) {
        // Whole-cell slabs (large footprints).
        if (hash01(seed, 11, j, i) < std::min(1.0, t * 1.5)) {
          for (int u = 0; u < kSub; ++u)
            for (int v = 0; v < kSub; ++v)
              built[static_cast<std::size_t>(i * kSub + u) * SW + j * kSub + v] = 1;
        }
        continue;
      }
      int side = static_cast<int>(std::lround(std::sqrt(t) * kSub));
      side = std::clamp(side, 1, kSub);
      int ox = static_cast<int>(hash01(seed, 12, j, i) * (kSub - side + 1));
      int oy = static_cast<int>(hash01(seed, 13, j, i) * (kSub - side + 1));
      ox = std::min(ox, kSub - side);
      oy = std::min(oy, kSub - side);
      for (int u = 0; u < side; ++u)
        for (int v = 0; v < side; ++v)
          built[static_cast<std::size_t>(i * kSub + oy + u) * SW + j * kSub + ox + v] = 1;
    }

  // Road lattice (2-subcell wide strips) through settled cells.
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      std::size_t idx = static_cast<std::size_t>(i) * W + j;
      if (target(idx) < 0.05) continue;
      if (i % 12 == 0)
        for (int u = 0; u < 2; ++u)
          for (int v = 0; v < kSub; ++v)
            built[static_cast<std::size_t>(i * kSub + u) * SW + j * kSub + v] = 1;
      if (j % 12 == 0)
        for (int u = 0; u < kSub; ++u)
          for (int v = 0; v < 2; ++v)
            built[static_cast<std::size_t>(i * kSub + u) * SW + j * kSub + v] = 1;
    }

  // Coverage per 10 m cell; HSE reference per 20 m block from the same mask.
  SceneBundle b;
  b.seed = seed;
  b.coverage = Tensor({H, W});
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      int cnt = 0;
      for (int u = 0; u < kSub; ++u)
        for (int v = 0; v < kSub; ++v)
          cnt += built[static_cast<std::size_t>(i * kSub + u) * SW + j * kSub + v];
      b.coverage[static_cast<std::size_t>(i) * W + j] =
          static_cast<double>(cnt) / (kSub * kSub);
    }
  b.hse_ref = Tensor({H / 2, W / 2});
  for (int i = 0; i < H / 2; ++i)
    for (int j = 0; j < W / 2; ++j) {
      double s = b.coverage[static_cast<std::size_t>(2 * i) * W + 2 * j] +
                 b.coverage[static_cast<std::size_t>(2 * i) * W + 2 * j + 1] +
                 b.coverage[static_cast<std::size_t>(2 * i + 1) * W + 2 * j] +
                 b.coverage[static_cast<std::size_t>(2 * i + 1) * W + 2 * j + 1];
      b.hse_ref[static_cast<std::size_t>(i) * (W / 2) + j] = s / 4.0;
    }

  // LCZ labels per 10 m cell from the coverage rules.
  b.lcz_ref = LabelGrid({H, W});
  std::vector<std::uint8_t> bg(static_cast<std::size_t>(H) * W);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      std::size_t idx = static_cast<std::size_t>(i) * W + j;
      double cov = b.coverage[idx];
      double hf = height[idx];
      bg[idx] = static_cast<std::uint8_t>(natural_label(veg[idx], wet[idx]));
      int label;
      if (ind_zone[idx] && cov > 0.3)
        label = 9;  // Heavy Industry
      else if (large_zone[idx] && cov > 0.3)
        label = 7;  // Large Low-rise
      else if (cov > 0.65)
        label = hf > 0.66 ? 0 : (hf > 0.33 ? 1 : 2);  // compact 1-3
      else if (cov >= 0.3)
        label = hf > 0.66 ? 3 : (hf > 0.33 ? 4 : 5);  // open 4-6
      else if (cov >= 0.05)
        label = 8;  // Sparsely Built
      else
        label = bg[idx];
      b.lcz_ref[idx] = static_cast<std::uint8_t>(label);
    }

  // Densely built 100 m blocks never carry natural labels.
  for (int bi = 0; bi < H / 10; ++bi)
    for (int bj = 0; bj < W / 10; ++bj) {
      double mean_cov = 0.0;
      for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
          mean_cov += b.coverage[static_cast<std::size_t>(bi * 10 + i) * W + bj * 10 + j];
      mean_cov /= 100.0;
      if (mean_cov < 0.65) continue;
      for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) {
          std::size_t idx = static_cast<std::size_t>(bi * 10 + i) * W + bj * 10 + j;
          if (b.lcz_ref[idx] >= 10 && b.lcz_ref[idx] != kIgnoreLabel)
            b.lcz_ref[idx] = 8;  // Sparsely Built
        }
    }

  // Image bands: class material spectra mixed by sub-pixel coverage.
  b.image = Tensor({p.bands, H, W});
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      std::size_t idx = static_cast<std::size_t>(i) * W + j;
      double cov = b.coverage[idx];
      int lab = b.lcz_ref[idx];
      double hs = 0.55 + 0.45 * height[idx];
      for (int band = 0; band < p.bands; ++band) {
        double built_part =
            (cov > 0.0 && lab < 10) ? material_spectrum(lab, band) * hs : built_spectrum(band) * hs;
        double v = cov * built_part + (1.0 - cov) * material_spectrum(bg[idx], band);
        v += p.noise_sigma * gauss(seed, 100 + static_cast<std::uint64_t>(band), j, i);
        b.image[(static_cast<std::size_t>(band) * H + i) * W + j] = std::clamp(v, 0.0, 1.0);
      }
    }

  // Withhold a small fraction of labels, mirroring sparse references.
  if (p.ignore_fraction > 0.0)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j)
        if (hash01(seed, 21, j, i) < p.ignore_fraction)
          b.lcz_ref[static_cast<std::size_t>(i) * W + j] = kIgnoreLabel;

  return b;
}

}  // namespace mtl::data
