#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "mtl/model/model.hpp"
#include "mtl/nn/ops.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using namespace mtl;
using nn::Var;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.bands = 2;
  cfg.patch_h = 8;
  cfg.patch_w = 8;
  cfg.base_features = 2;  // 4f = 8 channels, minimum for the CBAM ratio
  cfg.num_classes = 3;
  return cfg;
}

void zero_param(MtlModel& m, const std::string& name) {
  Tensor& v = m.params().get(name).mutable_value();
  std::fill(v.vec().begin(), v.vec().end(), 0.0);
}

}  // namespace

TEST_CASE("full-size forward pass shape contract") {
  ModelConfig cfg;  // defaults: bands 10, 128x128, f=16, 17 classes
  cfg.p2f_enabled = true;
  MtlModel model(cfg, 1);
  std::mt19937_64 rng(2);
  Tensor images = testutil::random_tensor({1, 10, 128, 128}, rng, 0.0, 1.0);
  Tensor hse_ref = testutil::random_tensor({1, 64, 64}, rng, 0.0, 1.0);
  ModelOutput out = model.forward(images, &hse_ref, false, PriorSource::Reference);
  CHECK(out.hse.value().dims() == std::vector<int>{1, 1, 64, 64});
  CHECK(out.lcz_avg.value().dims() == std::vector<int>{1, 17, 128, 128});
  REQUIRE(out.lcz_heads.size() == 5);  // final + 3 aux + p2f
  CHECK(out.lcz_heads[0].value().dims() == std::vector<int>{1, 17, 32, 32});   // h/4
  CHECK(out.lcz_heads[1].value().dims() == std::vector<int>{1, 17, 64, 64});   // backbone
  CHECK(out.lcz_heads[2].value().dims() == std::vector<int>{1, 17, 64, 64});   // cbam
  CHECK(out.lcz_heads[3].value().dims() == std::vector<int>{1, 17, 32, 32});   // post-pool
  CHECK(out.p2f_head.defined());
}

TEST_CASE("backbone shape chain [N,bands,h,w] -> [N,4f,h/2,w/2]") {
  MtlModel model(tiny_config(), 3);
  std::mt19937_64 rng(4);
  Var x(testutil::random_tensor({2, 2, 8, 8}, rng, 0.0, 1.0));
  Var feat = model.backbone_forward(x, false);
  CHECK(feat.value().dims() == std::vector<int>{2, 8, 4, 4});
  Var odd(Tensor({1, 2, 7, 8}));
  CHECK_THROWS_AS(model.backbone_forward(odd, false), ShapeError);
}

TEST_CASE("CBAM with zeroed weights gates to exactly 0.25 x") {
  MtlModel model(tiny_config(), 5);
  for (const char* suffix : {"mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2", "sp_w", "sp_b"})
    zero_param(model, std::string("lcz.cbam.") + suffix);
  std::mt19937_64 rng(6);
  Tensor x = testutil::random_tensor({1, 8, 4, 4}, rng);
  Tensor y = model.cbam_forward(Var(x), "lcz.cbam").value();
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(y[i] == doctest::Approx(0.25 * x[i]).epsilon(1e-12));
}

TEST_CASE("CBAM attention strictly attenuates") {
  MtlModel model(tiny_config(), 7);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = testutil::random_tensor({1, 8, 4, 4}, rng, -2.0, 2.0);
    Tensor y = model.cbam_forward(Var(x), "hse.cbam").value();
    CHECK(y.dims() == x.dims());
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(std::abs(y[i]) <= std::abs(x[i]));
  }
}

TEST_CASE("cbam_enabled=false turns attention into the identity") {
  ModelConfig cfg = tiny_config();
  cfg.cbam_enabled = false;
  MtlModel model(cfg, 9);
  CHECK_FALSE(model.params().has("lcz.cbam.mlp_w1"));
  std::mt19937_64 rng(10);
  Tensor x = testutil::random_tensor({1, 8, 4, 4}, rng);
  Tensor y = model.cbam_forward(Var(x), "lcz.cbam").value();
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("CBAM channel constraints are validated") {
  ModelConfig cfg = tiny_config();
  cfg.base_features = 1;  // 4f = 4 < reduction ratio 8
  CHECK_THROWS_AS(MtlModel(cfg, 0), ConfigError);
  cfg.base_features = 3;  // 4f = 12, not divisible by 8
  CHECK_THROWS_AS(MtlModel(cfg, 0), ConfigError);
  cfg.cbam_enabled = false;  // no constraint without attention
  CHECK_NOTHROW(MtlModel(cfg, 0));
}

TEST_CASE("HSE branch output strictly inside (0,1); zero head gives 0.5") {
  MtlModel model(tiny_config(), 11);
  std::mt19937_64 rng(12);
  Var feat(testutil::random_tensor({2, 8, 4, 4}, rng));
  std::mt19937_64 drng(1);
  Tensor y = model.hse_branch_forward(feat, false, drng).value();
  CHECK(y.dims() == std::vector<int>{2, 1, 4, 4});
  for (std::size_t i = 0; i < y.numel(); ++i) {
    CHECK(y[i] > 0.0);
    CHECK(y[i] < 1.0);
  }
  zero_param(model, "hse.head.pw");
  zero_param(model, "hse.head.b");
  Tensor y2 = model.hse_branch_forward(feat, false, drng).value();
  for (std::size_t i = 0; i < y2.numel(); ++i) CHECK(y2[i] == 0.5);
}

TEST_CASE("zeroed head weights yield uniform class probabilities") {
  MtlModel model(tiny_config(), 13);
  for (const char* head : {"head_final", "head_backbone", "head_cbam", "head_pool"}) {
    zero_param(model, std::string("lcz.") + head + ".pw");
    zero_param(model, std::string("lcz.") + head + ".b");
  }
  std::mt19937_64 rng(14);
  Tensor images = testutil::random_tensor({1, 2, 8, 8}, rng, 0.0, 1.0);
  ModelOutput out = model.forward(images, nullptr, false, PriorSource::Prediction);
  for (std::size_t i = 0; i < out.lcz_avg.value().numel(); ++i)
    CHECK(out.lcz_avg.value()[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("one near-one-hot head averages as 0.25*onehot + 0.75*uniform") {
  MtlModel model(tiny_config(), 15);
  for (const char* head : {"head_final", "head_backbone", "head_cbam", "head_pool"}) {
    zero_param(model, std::string("lcz.") + head + ".pw");
    zero_param(model, std::string("lcz.") + head + ".b");
  }
  // Force the final head to a (numerically exact) one-hot on class 2.
  Tensor& bias = model.params().get("lcz.head_final.b").mutable_value();
  bias[2] = 200.0;
  std::mt19937_64 rng(16);
  Tensor images = testutil::random_tensor({1, 2, 8, 8}, rng, 0.0, 1.0);
  ModelOutput out = model.forward(images, nullptr, false, PriorSource::Prediction);
  const double k = 3.0;
  for (int c = 0; c < 3; ++c) {
    double expect = 0.75 / k + (c == 2 ? 0.25 : 0.0);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        CHECK(out.lcz_avg.value().at4(0, c, i, j) == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("P2F identity: all-ones prior reproduces the unconditioned head bit-exactly") {
  ModelConfig cfg = tiny_config();
  cfg.p2f_enabled = true;
  MtlModel model(cfg, 17);
  std::mt19937_64 rng(18);
  Var feat(testutil::random_tensor({1, 8, 4, 4}, rng));
  Var prior(Tensor::full({1, 1, 4, 4}, 1.0));
  Tensor conditioned = model.p2f_forward(prior, feat).value();
  // Unconditioned head: the same 1x1 conv + softmax applied directly.
  Var logits = nn::pointwise_conv(feat, model.params().get("lcz.head_p2f.pw"),
                                  model.params().get("lcz.head_p2f.b"));
  Tensor direct = nn::softmax_channels(logits).value();
  REQUIRE(conditioned.dims() == direct.dims());
  for (std::size_t i = 0; i < direct.numel(); ++i) CHECK(conditioned[i] == direct[i]);
}

TEST_CASE("P2F zero prior yields a spatially uniform map; range is validated") {
  ModelConfig cfg = tiny_config();
  cfg.p2f_enabled = true;
  MtlModel model(cfg, 19);
  std::mt19937_64 rng(20);
  Var feat(testutil::random_tensor({1, 8, 4, 4}, rng));
  Tensor y = model.p2f_forward(Var(Tensor({1, 1, 4, 4})), feat).value();
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        CHECK(y.at4(0, c, i, j) == doctest::Approx(y.at4(0, c, 0, 0)).epsilon(1e-12));
  CHECK_THROWS_AS(model.p2f_forward(Var(Tensor::full({1, 1, 4, 4}, 1.5)), feat),
                  RangeError);
}

TEST_CASE("P2F head count and prior sourcing") {
  ModelConfig cfg = tiny_config();
  cfg.p2f_enabled = true;
  MtlModel model(cfg, 21);
  std::mt19937_64 rng(22);
  Tensor images = testutil::random_tensor({2, 2, 8, 8}, rng, 0.0, 1.0);
  Tensor hse_ref = testutil::random_tensor({2, 4, 4}, rng, 0.0, 1.0);
  ModelOutput tr = model.forward(images, &hse_ref, false, PriorSource::Reference);
  CHECK(tr.lcz_heads.size() == 5);
  CHECK(tr.p2f_head.defined());
  ModelOutput ev = model.forward(images, nullptr, false, PriorSource::Prediction);
  CHECK(ev.lcz_heads.size() == 5);
  CHECK_THROWS_AS(model.forward(images, nullptr, false, PriorSource::Reference),
                  MissingReferenceError);

  ModelConfig off = tiny_config();
  MtlModel plain(off, 23);
  ModelOutput o = plain.forward(images, &hse_ref, false, PriorSource::Reference);
  CHECK(o.lcz_heads.size() == 4);
  CHECK_FALSE(o.p2f_head.defined());
}

TEST_CASE("probability and range invariants over random forward passes") {
  ModelConfig cfg = tiny_config();
  cfg.p2f_enabled = true;
  MtlModel model(cfg, 25);
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor images = testutil::random_tensor({1, 2, 8, 8}, rng, 0.0, 1.0);
    ModelOutput out = model.forward(images, nullptr, false, PriorSource::Prediction);
    for (std::size_t i = 0; i < out.hse.value().numel(); ++i) {
      CHECK(out.hse.value()[i] > 0.0);
      CHECK(out.hse.value()[i] < 1.0);
    }
    const Tensor& p = out.lcz_avg.value();
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        double s = 0;
        for (int c = 0; c < 3; ++c) s += p.at4(0, c, i, j);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
      }
    for (const Var& head : out.lcz_heads) {
      const Tensor& hp = head.value();
      for (int i = 0; i < hp.dim(2); ++i)
        for (int j = 0; j < hp.dim(3); ++j) {
          double s = 0;
          for (int c = 0; c < 3; ++c) s += hp.at4(0, c, i, j);
          CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
        }
    }
  }
}

TEST_CASE("eval-mode forward is deterministic") {
  MtlModel model(tiny_config(), 27);
  std::mt19937_64 rng(28);
  Tensor images = testutil::random_tensor({1, 2, 8, 8}, rng, 0.0, 1.0);
  ModelOutput a = model.forward(images, nullptr, false, PriorSource::Prediction);
  ModelOutput b = model.forward(images, nullptr, false, PriorSource::Prediction);
  for (std::size_t i = 0; i < a.hse.value().numel(); ++i)
    CHECK(a.hse.value()[i] == b.hse.value()[i]);
  for (std::size_t i = 0; i < a.lcz_avg.value().numel(); ++i)
    CHECK(a.lcz_avg.value()[i] == b.lcz_avg.value()[i]);
}

TEST_CASE("single-task modes register and run only their branch") {
  ModelConfig hse_cfg = tiny_config();
  hse_cfg.task = TaskMode::HseOnly;
  MtlModel hse_model(hse_cfg, 29);
  CHECK_FALSE(hse_model.params().has("lcz.cbam.mlp_w1"));
  CHECK(hse_model.params().has("task.s_hse"));
  std::mt19937_64 rng(30);
  Tensor images = testutil::random_tensor({1, 2, 8, 8}, rng, 0.0, 1.0);
  ModelOutput ho = hse_model.forward(images, nullptr, false, PriorSource::Prediction);
  CHECK(ho.hse.defined());
  CHECK_FALSE(ho.lcz_avg.defined());

  ModelConfig lcz_cfg = tiny_config();
  lcz_cfg.task = TaskMode::LczOnly;
  MtlModel lcz_model(lcz_cfg, 31);
  CHECK_FALSE(lcz_model.params().has("hse.head.pw"));
  ModelOutput lo = lcz_model.forward(images, nullptr, false, PriorSource::Prediction);
  CHECK_FALSE(lo.hse.defined());
  CHECK(lo.lcz_avg.defined());
}

TEST_CASE("parameter groups partition the store") {
  ModelConfig cfg = tiny_config();
  cfg.p2f_enabled = true;
  MtlModel model(cfg, 33);
  int shared = 0, hse = 0, lcz = 0, task = 0;
  for (const auto& [name, e] : model.params().entries()) {
    switch (e.group) {
      case nn::ParamGroup::Shared: ++shared; break;
      case nn::ParamGroup::HseBranch: ++hse; break;
      case nn::ParamGroup::LczBranch: ++lcz; break;
      case nn::ParamGroup::TaskWeights: ++task; break;
    }
  }
  CHECK(shared > 0);
  CHECK(hse > 0);
  CHECK(lcz > 0);
  CHECK(task == 2);  // exactly s_hse and s_lcz
}

TEST_CASE("checkpoint round-trip reproduces the forward pass bit-exactly") {
  ModelConfig cfg = tiny_config();
  cfg.p2f_enabled = true;
  MtlModel model(cfg, 35);
  std::mt19937_64 rng(36);
  Tensor images = testutil::random_tensor({1, 2, 8, 8}, rng, 0.0, 1.0);
  // Run one eval forward first so running BN stats are whatever they are,
  // then checkpoint and compare.
  ModelOutput before = model.forward(images, nullptr, false, PriorSource::Prediction);
  const std::string dir = (fs::temp_directory_path() / "mtl_model_ckpt").string();
  model.params().save(dir, cfg, 7);

  int epoch = 0;
  ModelConfig loaded_cfg = nn::ParameterStore::read_checkpoint_config(dir, &epoch);
  CHECK(epoch == 7);
  CHECK(loaded_cfg.bands == cfg.bands);
  CHECK(loaded_cfg.p2f_enabled == cfg.p2f_enabled);
  MtlModel loaded(loaded_cfg, 999);  // different seed; values come from disk
  loaded.params().load_values(dir);
  ModelOutput after = loaded.forward(images, nullptr, false, PriorSource::Prediction);
  for (std::size_t i = 0; i < before.hse.value().numel(); ++i)
    CHECK(before.hse.value()[i] == doctest::Approx(after.hse.value()[i]).epsilon(1e-6));
  for (std::size_t i = 0; i < before.lcz_avg.value().numel(); ++i)
    CHECK(before.lcz_avg.value()[i] ==
          doctest::Approx(after.lcz_avg.value()[i]).epsilon(1e-6));
  fs::remove_all(dir);
}
