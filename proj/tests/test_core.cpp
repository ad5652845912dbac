#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "mtl/core/batch.hpp"
#include "mtl/core/config.hpp"
#include "mtl/core/errors.hpp"
#include "mtl/core/io.hpp"
#include "mtl/core/lcz.hpp"
#include "mtl/core/tensor.hpp"

namespace fs = std::filesystem;
using namespace mtl;

namespace {
std::string tmp_file(const char* stub) {
  return (fs::temp_directory_path() / stub).string();
}
}  // namespace

TEST_CASE("config defaults match the fixed architecture values") {
  ModelConfig cfg;
  CHECK(cfg.num_classes == 17);
  CHECK(cfg.dropout_rate == doctest::Approx(0.1));
  CHECK(cfg.patch_h == 128);
  CHECK(cfg.patch_w == 128);
  CHECK(cfg.input_gsd_m == doctest::Approx(10.0));
  CHECK(cfg.hse_gsd_m == doctest::Approx(20.0));
  CHECK(cfg.lcz_gsd_m == doctest::Approx(100.0));
  CHECK(cfg.bands == 10);
  CHECK(cfg.base_features == 16);
  CHECK_NOTHROW(validate_config(cfg));
}

TEST_CASE("config validation rejects bad fields with the violated invariant named") {
  ModelConfig cfg;
  cfg.patch_h = 130;
  CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("patch_h divisible by 4"),
                       ConfigError);
  cfg = ModelConfig{};
  cfg.dropout_rate = 1.0;
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);
  cfg = ModelConfig{};
  cfg.num_classes = 1;
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);
  cfg = ModelConfig{};
  cfg.hse_gsd_m = 15.0;  // 15/10 is not an integer ratio
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);
}

TEST_CASE("task mode names round-trip") {
  for (TaskMode t : {TaskMode::Both, TaskMode::HseOnly, TaskMode::LczOnly})
    CHECK(task_mode_from_name(task_mode_name(t)) == t);
  CHECK_THROWS_AS(task_mode_from_name("bogus"), ConfigError);
}

TEST_CASE("LCZ class table: 17 entries, 10 urban + 7 natural, legend names") {
  const auto& classes = lcz_classes();
  REQUIRE(classes.size() == 17);
  int urban = 0, natural = 0;
  for (const auto& c : classes)
    (c.group == LczGroup::URBAN ? urban : natural)++;
  CHECK(urban == 10);
  CHECK(natural == 7);
  CHECK(std::string(classes[0].name) == "Compact High-rise");
  CHECK(std::string(classes[16].name) == "Water");
  CHECK(std::string(classes[10].name) == "Dense Trees");
}

TEST_CASE("class_group boundaries") {
  CHECK(class_group(0) == LczGroup::URBAN);
  CHECK(class_group(9) == LczGroup::URBAN);
  CHECK(class_group(10) == LczGroup::NATURAL);
  CHECK(class_group(16) == LczGroup::NATURAL);
  CHECK_THROWS_AS(class_group(17), IndexError);
  CHECK_THROWS_AS(class_group(-1), IndexError);
}

TEST_CASE("tensor reshape round-trip preserves data exactly") {
  std::mt19937_64 rng(11);
  Tensor t({3, 4, 5});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<double>(rng()) / 1e19;
  Tensor r = t.reshape({5, 12}).reshape({60}).reshape({3, 4, 5});
  CHECK(r.dims() == t.dims());
  for (std::size_t i = 0; i < t.numel(); ++i) CHECK(r[i] == t[i]);
  CHECK_THROWS_AS(t.reshape({7}), ShapeError);
}

TEST_CASE("tensor constructors validate dims") {
  CHECK_THROWS_AS(Tensor({0, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("MTLT f32 tensor round-trip") {
  std::mt19937_64 rng(7);
  Tensor t({2, 3, 4, 5});
  std::uniform_real_distribution<float> dist(-10.f, 10.f);
  // Values representable in f32 so the on-disk narrowing is lossless.
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<double>(dist(rng));
  const std::string path = tmp_file("mtl_test_tensor.mtlt");
  write_tensor(path, t);
  Tensor back = read_tensor(path);
  REQUIRE(back.dims() == t.dims());
  for (std::size_t i = 0; i < t.numel(); ++i) CHECK(back[i] == t[i]);
  fs::remove(path);
}

TEST_CASE("MTLT u8 label round-trip") {
  LabelGrid g({7, 9});
  for (std::size_t i = 0; i < g.numel(); ++i)
    g[i] = static_cast<std::uint8_t>(i % 18 == 17 ? kIgnoreLabel : i % 17);
  const std::string path = tmp_file("mtl_test_labels.mtlt");
  write_labels(path, g);
  LabelGrid back = read_labels(path);
  REQUIRE(back.dims() == g.dims());
  for (std::size_t i = 0; i < g.numel(); ++i) CHECK(back[i] == g[i]);
  fs::remove(path);
}

TEST_CASE("corrupt magic bytes reported as FormatError at offset 0") {
  const std::string path = tmp_file("mtl_test_corrupt.mtlt");
  {
    std::ofstream f(path, std::ios::binary);
    f << "XXXX\x01\x01\x01";
  }
  try {
    read_tensor(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }
  fs::remove(path);
}

TEST_CASE("reading a missing file raises IoError") {
  CHECK_THROWS_AS(read_tensor(tmp_file("mtl_test_does_not_exist.mtlt")), IoError);
}

TEST_CASE("task weights initialize to zero (sigma = 1)") {
  TaskWeights w;
  CHECK(w.s_hse == 0.0);
  CHECK(w.s_lcz == 0.0);
}

TEST_CASE("batch validation enforces shape and value invariants") {
  ModelConfig cfg;
  cfg.bands = 3;
  cfg.patch_h = 8;
  cfg.patch_w = 8;
  SampleBatch b;
  b.images = Tensor({2, 3, 8, 8});
  b.hse_ref = Tensor({2, 4, 4});
  b.lcz_ref = LabelGrid({2, 8, 8});
  CHECK_NOTHROW(validate_batch(b, cfg));
  b.hse_ref[0] = 1.5;
  CHECK_THROWS_AS(validate_batch(b, cfg), RangeError);
  b.hse_ref[0] = 0.5;
  b.lcz_ref[0] = 42;  // neither a class index nor IGNORE
  CHECK_THROWS_AS(validate_batch(b, cfg), IndexError);
  b.lcz_ref[0] = kIgnoreLabel;
  CHECK_NOTHROW(validate_batch(b, cfg));
  b.hse_ref = Tensor({2, 8, 8});  // not half the image resolution
  CHECK_THROWS_AS(validate_batch(b, cfg), ShapeError);
}
