#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>
#include <set>

#include "mtl/core/io.hpp"
#include "mtl/data/dataset.hpp"
#include "mtl/data/synth.hpp"

namespace fs = std::filesystem;
using namespace mtl;
using namespace mtl::data;

TEST_CASE("generator is deterministic in (seed, params)") {
  SynthParams p;
  p.height = 80;
  p.width = 80;
  SceneBundle a = generate_scene(42, p);
  SceneBundle b = generate_scene(42, p);
  for (std::size_t i = 0; i < a.image.numel(); ++i) CHECK(a.image[i] == b.image[i]);
  for (std::size_t i = 0; i < a.hse_ref.numel(); ++i) CHECK(a.hse_ref[i] == b.hse_ref[i]);
  for (std::size_t i = 0; i < a.lcz_ref.numel(); ++i) CHECK(a.lcz_ref[i] == b.lcz_ref[i]);
  SceneBundle c = generate_scene(43, p);
  bool differs = false;
  for (std::size_t i = 0; i < a.image.numel() && !differs; ++i)
    differs = a.image[i] != c.image[i];
  CHECK(differs);
}

TEST_CASE("generator dims must align with the 20 m HSE grid") {
  SynthParams p;
  p.height = 71;  // odd: no integral 20 m grid
  p.width = 80;
  CHECK_THROWS_AS(generate_scene(1, p), ConfigError);
  p.height = 18;  // too small
  p.width = 18;
  CHECK_THROWS_AS(generate_scene(1, p), ConfigError);
}

TEST_CASE("urban_fraction 0 produces no settlement and only natural labels") {
  SynthParams p;
  p.height = 100;
  p.width = 100;
  p.urban_fraction = 0.0;
  p.ignore_fraction = 0.0;
  SceneBundle s = generate_scene(7, p);
  for (std::size_t i = 0; i < s.hse_ref.numel(); ++i) CHECK(s.hse_ref[i] == 0.0);
  for (std::size_t i = 0; i < s.lcz_ref.numel(); ++i) {
    REQUIRE(s.lcz_ref[i] < kNumLczClasses);
    CHECK(class_group(s.lcz_ref[i]) == LczGroup::NATURAL);
  }
}

TEST_CASE("urban_fraction 1: saturated blocks carry compact labels") {
  SynthParams p;
  p.height = 120;
  p.width = 120;
  p.urban_fraction = 1.0;
  p.ignore_fraction = 0.0;
  SceneBundle s = generate_scene(11, p);
  double mean = 0;
  for (std::size_t i = 0; i < s.hse_ref.numel(); ++i) mean += s.hse_ref[i];
  mean /= static_cast<double>(s.hse_ref.numel());
  CHECK(mean > 0.3);  // dense scene overall
  // Wherever a 10 m cell's built coverage exceeds the compact threshold, the
  // label must be an urban class.
  int compact_cells = 0;
  for (int i = 0; i < 120; ++i)
    for (int j = 0; j < 120; ++j) {
      double cov = s.coverage[static_cast<std::size_t>(i) * 120 + j];
      std::uint8_t lab = s.lcz_ref[static_cast<std::size_t>(i) * 120 + j];
      if (cov > 0.65) {
        ++compact_cells;
        CHECK(class_group(lab) == LczGroup::URBAN);
      }
    }
  CHECK(compact_cells > 0);
}

TEST_CASE("hse_ref equals the block-averaged 10 m coverage exactly") {
  SynthParams p;
  p.height = 100;
  p.width = 100;
  SceneBundle s = generate_scene(19, p);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) {
      double block = (s.coverage[static_cast<std::size_t>(2 * i) * 100 + 2 * j] +
                      s.coverage[static_cast<std::size_t>(2 * i) * 100 + 2 * j + 1] +
                      s.coverage[static_cast<std::size_t>(2 * i + 1) * 100 + 2 * j] +
                      s.coverage[static_cast<std::size_t>(2 * i + 1) * 100 + 2 * j + 1]) /
                     4.0;
      CHECK(s.hse_ref[static_cast<std::size_t>(i) * 50 + j] == block);
    }
}

TEST_CASE("no dense 100 m block carries NATURAL labels") {
  SynthParams p;
  p.height = 160;
  p.width = 160;
  p.urban_fraction = 0.9;
  p.ignore_fraction = 0.0;
  SceneBundle s = generate_scene(23, p);
  for (int by = 0; by < 16; ++by)
    for (int bx = 0; bx < 16; ++bx) {
      double mean = 0;
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
          mean += s.hse_ref[static_cast<std::size_t>(by * 5 + i) * 80 + bx * 5 + j];
      mean /= 25.0;
      if (mean >= 0.65) {
        for (int i = 0; i < 10; ++i)
          for (int j = 0; j < 10; ++j) {
            std::uint8_t lab =
                s.lcz_ref[static_cast<std::size_t>(by * 10 + i) * 160 + bx * 10 + j];
            if (lab != kIgnoreLabel) CHECK(class_group(lab) == LczGroup::URBAN);
          }
      }
    }
}

TEST_CASE("image bands stay in [0,1] and labels are valid") {
  SynthParams p;
  p.height = 80;
  p.width = 80;
  SceneBundle s = generate_scene(29, p);
  REQUIRE(s.image.dims() == std::vector<int>{10, 80, 80});
  for (std::size_t i = 0; i < s.image.numel(); ++i) {
    CHECK(s.image[i] >= 0.0);
    CHECK(s.image[i] <= 1.0);
  }
  int ignored = 0;
  for (std::size_t i = 0; i < s.lcz_ref.numel(); ++i) {
    std::uint8_t v = s.lcz_ref[i];
    CHECK((v < kNumLczClasses || v == kIgnoreLabel));
    if (v == kIgnoreLabel) ++ignored;
  }
  CHECK(ignored > 0);  // roughly 1% withheld
  CHECK(ignored < static_cast<int>(s.lcz_ref.numel()) / 20);
}

TEST_CASE("tiling counts: 512/128 -> 16, 200/128 -> 1, 256 stride 64 -> 9") {
  CHECK(tile_count(512, 128, 128) * tile_count(512, 128, 128) == 16);
  CHECK(tile_count(200, 128, 128) == 1);
  CHECK(tile_count(256, 128, 64) * tile_count(256, 128, 64) == 9);
  SynthParams p;
  p.height = 200;
  p.width = 200;
  SceneBundle s = generate_scene(31, p);
  CHECK(tile_scene(s, 128, 128).size() == 1);
  CHECK(tile_scene(s, 100, 100).size() == 4);
  CHECK(tile_scene(s, 100, 50).size() == 9);
}

TEST_CASE("tiles crop image, hse and lcz coherently") {
  SynthParams p;
  p.height = 80;
  p.width = 80;
  SceneBundle s = generate_scene(37, p);
  auto tiles = tile_scene(s, 40, 40);
  REQUIRE(tiles.size() == 4);
  const PatchSample& t = tiles[3];  // origin (40, 40)
  CHECK(t.image.dims() == std::vector<int>{10, 40, 40});
  CHECK(t.hse_ref.dims() == std::vector<int>{20, 20});
  CHECK(t.lcz_ref.dims() == std::vector<int>{40, 40});
  CHECK(t.image[0] == s.image[static_cast<std::size_t>(40) * 80 + 40]);
  CHECK(t.hse_ref[0] == s.hse_ref[static_cast<std::size_t>(20) * 40 + 20]);
  CHECK(t.lcz_ref[0] == s.lcz_ref[static_cast<std::size_t>(40) * 80 + 40]);
  CHECK_THROWS_AS(tile_scene(s, 96, 0), ConfigError);  // patch larger than scene
  CHECK_THROWS_AS(tile_scene(s, 30, 30), ConfigError);  // not a multiple of 4
}

TEST_CASE("normalize applies the reflectance convention") {
  Tensor raw({4}, {10000.0, 0.0, 20000.0, 0.25});
  Tensor n = normalize(raw);
  CHECK(n[0] == 1.0);
  CHECK(n[1] == 0.0);
  CHECK(n[2] == 1.0);   // clipped
  CHECK(n[3] == 0.25);  // already in [0,1]: pass-through
  CHECK_THROWS_AS(normalize(Tensor({1}, {-3.0})), RangeError);
}

TEST_CASE("manifest round-trip and split disjointness") {
  DatasetManifest m;
  m.entries.push_back({"a_img.mtlt", "a_hse.mtlt", "a_lcz.mtlt", Split::Train});
  m.entries.push_back({"b_img.mtlt", "b_hse.mtlt", "b_lcz.mtlt", Split::Val});
  const std::string path = (fs::temp_directory_path() / "mtl_manifest.json").string();
  save_manifest(path, m);
  DatasetManifest back = load_manifest(path);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[0].image_path == "a_img.mtlt");
  CHECK(back.entries[0].split == Split::Train);
  CHECK(back.entries[1].split == Split::Val);
  fs::remove(path);

  DatasetManifest dup = m;
  dup.entries.push_back({"a_img.mtlt", "a_hse.mtlt", "a_lcz.mtlt", Split::Test});
  CHECK_THROWS_AS(dup.validate(), ValidationError);
}

TEST_CASE("batch assembly copies samples in index order") {
  SynthParams p;
  p.height = 80;
  p.width = 80;
  SceneBundle s = generate_scene(41, p);
  auto tiles = tile_scene(s, 40, 40);
  std::vector<int> order{3, 0, 2, 1};
  SampleBatch b = make_batch(tiles, order, 1, 3);  // tiles 0 and 2
  REQUIRE(b.images.dims() == std::vector<int>{2, 10, 40, 40});
  CHECK(b.images[0] == tiles[0].image[0]);
  CHECK(b.lcz_ref[0] == tiles[0].lcz_ref[0]);
  CHECK(b.hse_ref[b.hse_ref.numel() - 1] == tiles[2].hse_ref[tiles[2].hse_ref.numel() - 1]);
}

TEST_CASE("scene IO round-trips through MTLT (f32 quantization only)") {
  SynthParams p;
  p.height = 60;
  p.width = 60;
  SceneBundle s = generate_scene(47, p);
  const std::string dir = (fs::temp_directory_path() / "mtl_scene_io").string();
  fs::create_directories(dir);
  write_tensor(dir + "/image.mtlt", s.image);
  write_tensor(dir + "/hse.mtlt", s.hse_ref);
  write_labels(dir + "/lcz.mtlt", s.lcz_ref);
  Tensor img = read_tensor(dir + "/image.mtlt");
  Tensor hse = read_tensor(dir + "/hse.mtlt");
  LabelGrid lcz = read_labels(dir + "/lcz.mtlt");
  for (std::size_t i = 0; i < img.numel(); ++i)
    CHECK(img[i] == doctest::Approx(s.image[i]).epsilon(1e-7));
  for (std::size_t i = 0; i < hse.numel(); ++i)
    CHECK(hse[i] == doctest::Approx(s.hse_ref[i]).epsilon(1e-7));
  for (std::size_t i = 0; i < lcz.numel(); ++i) CHECK(lcz[i] == s.lcz_ref[i]);
  fs::remove_all(dir);
}

TEST_CASE("material spectra are deterministic and in range") {
  for (int c = 0; c < kNumLczClasses; ++c)
    for (int b = 0; b < 10; ++b) {
      double v = material_spectrum(c, b);
      CHECK(v == material_spectrum(c, b));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  for (int b = 0; b < 10; ++b) {
    CHECK(built_spectrum(b) >= 0.0);
    CHECK(built_spectrum(b) <= 1.0);
  }
}
