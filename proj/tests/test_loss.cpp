#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mtl/loss/loss.hpp"
#include "testutil.hpp"

using namespace mtl;

TEST_CASE("weighted MAE hand values") {
  CHECK(weighted_mae(Tensor({3}, {0.1, 0.5, 0.9}), Tensor({3}, {0.1, 0.5, 0.9})) == 0.0);
  // ref=[0,1], pred=[0,0.5]: (1*0 + e*0.5) / (1+e)
  double e = std::exp(1.0);
  CHECK(weighted_mae(Tensor({2}, {0.0, 0.5}), Tensor({2}, {0.0, 1.0})) ==
        doctest::Approx(0.5 * e / (1.0 + e)).epsilon(1e-9));
  CHECK(weighted_mae(Tensor({2}, {0.0, 0.5}), Tensor({2}, {0.0, 1.0})) ==
        doctest::Approx(0.36552).epsilon(1e-4));
  // equal absolute errors make the weights cancel
  CHECK(weighted_mae(Tensor({2}, {0.5, 0.5}), Tensor({2}, {0.0, 1.0})) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(weighted_mae(Tensor({2}), Tensor({3})), ShapeError);
}

TEST_CASE("weighted MAE is monotone in each absolute error") {
  std::mt19937_64 rng(3);
  Tensor ref = testutil::random_tensor({16}, rng, 0.0, 1.0);
  Tensor pred = testutil::random_tensor({16}, rng, 0.0, 1.0);
  double base = weighted_mae(pred, ref);
  for (int i = 0; i < 16; ++i) {
    Tensor worse = pred;
    worse[i] += (worse[i] >= ref[i] ? 0.1 : -0.1);  // grow this element's error
    CHECK(weighted_mae(worse, ref) >= base);
  }
}

TEST_CASE("cross entropy hand values") {
  // uniform probabilities -> log 17
  Tensor probs = Tensor::full({1, 17, 2, 2}, 1.0 / 17.0);
  LabelGrid labels({1, 2, 2}, {0, 5, 16, 9});
  CHECK(lcz_cross_entropy(probs, labels) == doctest::Approx(std::log(17.0)).epsilon(1e-9));
  CHECK(lcz_cross_entropy(probs, labels) == doctest::Approx(2.8332).epsilon(1e-4));

  // one-hot correct
  Tensor onehot({1, 3, 1, 1});
  onehot.at4(0, 2, 0, 0) = 1.0;
  CHECK(lcz_cross_entropy(onehot, LabelGrid({1, 1, 1}, {2})) <= 1e-11);

  // two pixels at 0.5 / 0.25 on the true classes
  Tensor p({1, 2, 1, 2});
  p.at4(0, 0, 0, 0) = 0.5;
  p.at4(0, 1, 0, 0) = 0.5;
  p.at4(0, 0, 0, 1) = 0.75;
  p.at4(0, 1, 0, 1) = 0.25;
  CHECK(lcz_cross_entropy(p, LabelGrid({1, 1, 2}, {0, 1})) ==
        doctest::Approx(-(std::log(0.5) + std::log(0.25)) / 2.0).epsilon(1e-9));
  CHECK(lcz_cross_entropy(p, LabelGrid({1, 1, 2}, {0, 1})) ==
        doctest::Approx(1.0397).epsilon(1e-4));
}

TEST_CASE("cross entropy skips IGNORE pixels and rejects empty batches") {
  Tensor p({1, 2, 1, 3});
  p.at4(0, 0, 0, 0) = 0.5;
  p.at4(0, 1, 0, 0) = 0.5;
  p.at4(0, 0, 0, 1) = 0.9;
  p.at4(0, 1, 0, 1) = 0.1;
  p.at4(0, 0, 0, 2) = 0.3;
  p.at4(0, 1, 0, 2) = 0.7;
  double with_ignore = lcz_cross_entropy(p, LabelGrid({1, 1, 3}, {0, kIgnoreLabel, 1}));
  Tensor p2({1, 2, 1, 2});
  p2.at4(0, 0, 0, 0) = 0.5;
  p2.at4(0, 1, 0, 0) = 0.5;
  p2.at4(0, 0, 0, 1) = 0.3;
  p2.at4(0, 1, 0, 1) = 0.7;
  CHECK(with_ignore ==
        doctest::Approx(lcz_cross_entropy(p2, LabelGrid({1, 1, 2}, {0, 1}))).epsilon(1e-12));

  CHECK_THROWS_AS(
      lcz_cross_entropy(p, LabelGrid({1, 1, 3}, {kIgnoreLabel, kIgnoreLabel, kIgnoreLabel})),
      EmptyBatchError);
  CHECK_THROWS_AS(lcz_cross_entropy(p, LabelGrid({1, 1, 3}, {0, 1, 5})), IndexError);
}

TEST_CASE("multi-task loss substitution values") {
  CHECK(multitask_loss(2.0, 3.0, TaskWeights{0.0, 0.0}) == 4.0);
  CHECK(multitask_loss(2.0, 0.0, TaskWeights{std::log(2.0), 0.0}) ==
        doctest::Approx(0.5 + 0.5 * std::log(2.0)).epsilon(1e-12));
  CHECK(multitask_loss(2.0, 0.0, TaskWeights{std::log(2.0), 0.0}) ==
        doctest::Approx(0.84657).epsilon(1e-4));
  // s = (0,0) reduces to the fixed 1:1 baseline 0.5*l_hse + l_lcz
  CHECK(multitask_loss(1.7, 0.9, TaskWeights{0.0, 0.0}) ==
        doctest::Approx(0.5 * 1.7 + 0.9).epsilon(1e-12));
}

TEST_CASE("multi-task loss gradient at the hand point") {
  nn::Var lh(Tensor::scalar(2.0)), ll(Tensor::scalar(3.0));
  nn::Var sh(Tensor::scalar(0.0), true), sl(Tensor::scalar(0.0), true);
  nn::Var l = multitask_loss_var(lh, ll, sh, sl);
  nn::backward(l);
  CHECK(sh.grad()[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(sl.grad()[0] == doctest::Approx(-2.5).epsilon(1e-12));
}

TEST_CASE("multi-task loss gradients match finite differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(0.2, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    double lh0 = dist(rng), ll0 = dist(rng);
    double sh0 = dist(rng) - 1.5, sl0 = dist(rng) - 1.5;
    Tensor point({4}, {lh0, ll0, sh0, sl0});
    auto f = [](const Tensor& p) {
      return multitask_loss(p[0], p[1], TaskWeights{p[2], p[3]});
    };
    auto g = [](const Tensor& p) {
      nn::Var lh(Tensor::scalar(p[0]), true), ll(Tensor::scalar(p[1]), true);
      nn::Var sh(Tensor::scalar(p[2]), true), sl(Tensor::scalar(p[3]), true);
      nn::Var l = multitask_loss_var(lh, ll, sh, sl);
      nn::backward(l);
      return Tensor({4}, {lh.grad()[0], ll.grad()[0], sh.grad()[0], sl.grad()[0]});
    };
    auto r = testutil::grad_check(point, f, g, 1e-6);
    CHECK(r.max_rel_err < 1e-6);
  }
}

TEST_CASE("weighted MAE Var gradient matches finite differences") {
  std::mt19937_64 rng(9);
  Tensor ref = testutil::random_tensor({12}, rng, 0.0, 1.0);
  Tensor pred0 = testutil::random_tensor({12}, rng, 0.05, 0.95);
  auto f = [&](const Tensor& p) { return weighted_mae(p, ref); };
  auto g = [&](const Tensor& p) {
    nn::Var pv(p, true);
    nn::Var l = weighted_mae_loss(pv, ref);
    nn::backward(l);
    return pv.grad();
  };
  auto r = testutil::grad_check(pred0, f, g, 1e-7);
  CHECK(r.max_rel_err < 1e-3);
}

TEST_CASE("cross entropy Var gradient matches finite differences") {
  std::mt19937_64 rng(13);
  Tensor probs0 = testutil::random_tensor({1, 4, 3, 3}, rng, 0.05, 1.0);
  LabelGrid labels({1, 3, 3});
  for (std::size_t i = 0; i < labels.numel(); ++i)
    labels[i] = static_cast<std::uint8_t>(i == 4 ? kIgnoreLabel : i % 4);
  auto f = [&](const Tensor& p) { return lcz_cross_entropy(p, labels); };
  auto g = [&](const Tensor& p) {
    nn::Var pv(p, true);
    nn::Var l = lcz_cross_entropy_loss(pv, labels);
    nn::backward(l);
    return pv.grad();
  };
  auto r = testutil::grad_check(probs0, f, g, 1e-6, 36);
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("optimal task weights closed form") {
  TaskWeights w = optimal_task_weights(1.0, 0.5);
  CHECK(w.s_hse == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(w.s_lcz == doctest::Approx(0.0).epsilon(1e-12));
  w = optimal_task_weights(4.0, 3.0);
  CHECK(w.s_hse == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(w.s_lcz == doctest::Approx(std::log(6.0)).epsilon(1e-12));
  CHECK(w.s_hse == doctest::Approx(1.3863).epsilon(1e-4));
  CHECK(w.s_lcz == doctest::Approx(1.7918).epsilon(1e-4));
  CHECK_THROWS_AS(optimal_task_weights(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(optimal_task_weights(1.0, -2.0), DomainError);
}

TEST_CASE("optimal task weights minimize the loss (independent oracle)") {
  // Coarse grid search around the closed form confirms it is the minimizer.
  double lh = 4.0, ll = 3.0;
  TaskWeights star = optimal_task_weights(lh, ll);
  double best = multitask_loss(lh, ll, star);
  for (double dh = -0.5; dh <= 0.5; dh += 0.05)
    for (double dl = -0.5; dl <= 0.5; dl += 0.05)
      CHECK(multitask_loss(lh, ll, TaskWeights{star.s_hse + dh, star.s_lcz + dl}) >=
            best - 1e-12);
}

TEST_CASE("loss report CSV format") {
  CHECK(loss_report_csv_header() == "step,l_hse,l_lcz,l_mt,s_hse,s_lcz");
  LossReport r;
  r.l_hse = 1.5;
  r.l_lcz = 2.0;
  r.l_mt = multitask_loss(1.5, 2.0, TaskWeights{0.0, 0.0});
  std::string row = loss_report_csv_row(3, r);
  CHECK(row.substr(0, 2) == "3,");
  CHECK(row.find("1.5") != std::string::npos);
  CHECK(row.find("2.75") != std::string::npos);
}
