#include "eegtext/classifier.hpp"

#include <cmath>
#include <vector>

#include "checkers.hpp"
#include "doctest.h"
#include "eegtext/errors.hpp"
#include "eegtext/layers.hpp"
#include "eegtext/rng.hpp"
#include "eegtext/tensor.hpp"

using namespace eegtext;
using eegtext::testing::grad_check;
using eegtext::testing::GradCheck;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(-scale, scale);
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("softmax matches the closed form on a two-logit row") {
  Tensor p = softmax(Tensor({1, 2}, {10.0, 0.0}));
  // 1/(1+e^-10) and its complement.
  CHECK(p.values()[0] == doctest::Approx(0.9999546021312976).epsilon(1e-7));
  CHECK(p.values()[1] == doctest::Approx(4.5397868702434395e-05).epsilon(1e-7));
}

TEST_CASE("softmax rows sum to one and ties split evenly") {
  Rng rng(1);
  Tensor z = random_tensor({7, 11}, rng, 30.0);
  Tensor p = softmax(z);
  for (size_t r = 0; r < 7; ++r) {
    double s = 0.0;
    for (size_t j = 0; j < 11; ++j) s += p.values()[r * 11 + j];
    CHECK(std::fabs(s - 1.0) <= 1e-6);
  }
  Tensor even = softmax(Tensor({1, 4}, {3.0, 3.0, 3.0, 3.0}));
  for (double v : even.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax is shift invariant") {
  Rng rng(2);
  Tensor z = random_tensor({4, 6}, rng, 5.0);
  std::vector<double> shifted(z.values());
  for (size_t r = 0; r < 4; ++r)
    for (size_t j = 0; j < 6; ++j) shifted[r * 6 + j] += 123.25;
  Tensor a = softmax(z);
  Tensor b = softmax(Tensor({4, 6}, std::move(shifted)));
  for (size_t i = 0; i < a.size(); ++i)
    CHECK(std::fabs(a.values()[i] - b.values()[i]) <= 1e-12);
}

TEST_CASE("softmax survives extreme logits") {
  Tensor p = softmax(Tensor({1, 3}, {1000.0, -1000.0, 999.0}));
  for (double v : p.values()) {
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
  }
  CHECK(p.values()[0] + p.values()[1] + p.values()[2] ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cross entropy of the uniform predictor is log n") {
  for (size_t k : {2u, 3u, 5u, 10u, 20u}) {
    Tensor probs = Tensor::full({3, k}, 1.0 / static_cast<double>(k));
    Tensor ce = cross_entropy(probs, {0, static_cast<int>(k) - 1, 0});
    CHECK(std::fabs(ce.item() - std::log(static_cast<double>(k))) <= 1e-9);
  }
}

TEST_CASE("cross entropy averages per-trial negative log prob") {
  Tensor probs({2, 2}, {0.5, 0.5, 0.25, 0.75});
  Tensor ce = cross_entropy(probs, {0, 0});
  CHECK(ce.item() ==
        doctest::Approx((std::log(2.0) + std::log(4.0)) / 2.0).epsilon(1e-12));
}

TEST_CASE("cross entropy rejects bad labels and shapes") {
  Tensor probs({2, 3}, {0.2, 0.3, 0.5, 0.1, 0.1, 0.8});
  CHECK_THROWS_AS((void)cross_entropy(probs, {0, 3}), ConfigError);
  CHECK_THROWS_AS((void)cross_entropy(probs, {0, -1}), ConfigError);
  CHECK_THROWS_AS((void)cross_entropy(probs, {0}), ConfigError);
  CHECK_THROWS_AS((void)cross_entropy(Tensor({3}, {1.0, 0.0, 0.0}), {0}),
                  NumericError);
}

TEST_CASE("cross entropy clamps vanishing probabilities") {
  Tensor probs({1, 2}, {0.0, 1.0});
  Tensor ce = cross_entropy(probs, {0});
  CHECK(ce.item() == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
}

TEST_CASE("softmax plus cross entropy gradient is p minus one-hot over n") {
  Rng rng(3);
  Tensor z = random_tensor({3, 5}, rng, 2.0);
  std::vector<int> labels = {4, 0, 2};
  Tensor zg(z.shape(), z.values(), DType::F64, true);
  Tape tape;
  Tensor probs = softmax(zg);
  Tensor loss = cross_entropy(probs, labels);
  backward(loss);
  Tensor g = tape.grad(zg);
  const auto& p = probs.values();
  for (size_t r = 0; r < 3; ++r) {
    for (size_t j = 0; j < 5; ++j) {
      double want = p[r * 5 + j] / 3.0;
      if (static_cast<int>(j) == labels[r]) want -= 1.0 / 3.0;
      CHECK(g.values()[r * 5 + j] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("softmax and cross entropy pass finite differences") {
  Rng rng(4);
  Tensor z = random_tensor({2, 4}, rng, 2.0);
  std::vector<int> labels = {1, 3};
  GradCheck gc = grad_check(
      [&](const Tensor& t) { return cross_entropy(softmax(t), labels); }, z);
  CHECK(gc.max_rel_err <= 1e-4);
}

TEST_CASE("elu saturates to minus alpha") {
  Tensor y = elu(Tensor({3}, {-30.0, 0.0, 2.5}));
  CHECK(std::fabs(y.values()[0] - (-1.0)) <= 1e-9);
  CHECK(y.values()[1] == 0.0);
  CHECK(y.values()[2] == 2.5);
}

TEST_CASE("l2 penalty covers kernels and skips everything else") {
  ParamStore p;
  p.add("enc.block1.w", Tensor({2, 1, 2}, {1.0, 2.0, 3.0, 4.0}));
  p.add("enc.block1.b", Tensor({2}, {100.0, 100.0}));
  p.add("enc.block1.gamma", Tensor({2}, {7.0, 7.0}));
  p.add("enc.lstm1.wf", Tensor({2, 2}, {5.0, 5.0, 5.0, 5.0}));
  p.add("cls.dense1.w", Tensor({1, 2}, {0.5, 0.5}));
  Tensor pen = l2_penalty(p, 0.001);
  // 1+4+9+16 from the conv kernel, 0.25+0.25 from the dense kernel.
  CHECK(pen.item() == doctest::Approx(0.001 * 30.5).epsilon(1e-12));
  CHECK(l2_penalty(p, 0.0).item() == 0.0);
}

TEST_CASE("l2 penalty is differentiable with gradient two lambda w") {
  Tensor w({2, 2}, {1.0, -2.0, 3.0, -4.0}, DType::F64, true);
  ParamStore p;
  p.add("cls.out.w", w);
  Tape tape;
  Tensor pen = l2_penalty(p, 0.01);
  backward(pen);
  Tensor g = tape.grad(w);
  for (size_t i = 0; i < 4; ++i)
    CHECK(g.values()[i] ==
          doctest::Approx(2.0 * 0.01 * w.values()[i]).epsilon(1e-12));
}

TEST_CASE("total loss decomposes into cross entropy plus penalty") {
  Rng rng(5);
  ParamStore p;
  p.add("cls.dense1.w", random_tensor({3, 4}, rng));
  Tensor probs = softmax(random_tensor({2, 3}, rng));
  Tensor ce = cross_entropy(probs, {0, 2});
  Tensor l2 = l2_penalty(p, 0.001);
  Tensor total = add(ce, l2);
  CHECK(total.item() == ce.item() + l2.item());
  CHECK(l2.item() > 0.0);
}

TEST_CASE("maxnorm projection bounds columns and is idempotent") {
  Tensor w({2, 3}, {3.0, 0.3, 5.0, 4.0, 0.4, 0.0});
  // Column norms: 5, 0.5, 5.
  Tensor once = maxnorm_project(w, 3.0);
  const auto& v = once.values();
  // Untouched column keeps its exact bits.
  CHECK(v[1] == 0.3);
  CHECK(v[4] == 0.4);
  for (size_t j = 0; j < 3; ++j) {
    double norm = std::hypot(v[j], v[3 + j]);
    CHECK(norm <= 3.0 + 1e-9);
  }
  // Scaled column lands exactly on the bound.
  CHECK(std::fabs(std::hypot(v[0], v[3]) - 3.0) <= 1e-9);

  Tensor twice = maxnorm_project(once, 3.0);
  CHECK(twice.values() == once.values());
}

TEST_CASE("maxnorm leaves compliant kernels bitwise alone") {
  Rng rng(6);
  Tensor w = random_tensor({4, 3}, rng, 0.1);
  Tensor out = maxnorm_project(w, 3.0);
  CHECK(out.values() == w.values());
}

TEST_CASE("apply maxnorm touches only dense kernels") {
  ParamStore p;
  p.add("enc.depth.w", Tensor({1, 1, 1}, {50.0}));
  p.add("cls.dense1.w", Tensor({1, 2}, {50.0, 1.0}));
  p.add("cls.dense1.b", Tensor({2}, {50.0, 50.0}));
  apply_maxnorm(p, 3.0);
  CHECK(p.at("enc.depth.w").values()[0] == 50.0);  // conv kernels exempt
  CHECK(p.at("cls.dense1.b").values()[0] == 50.0);
  CHECK(p.at("cls.dense1.w").values()[0] == 3.0);
  CHECK(p.at("cls.dense1.w").values()[1] == 1.0);
}

TEST_CASE("classifier head: shapes, probabilities, and dropout wiring") {
  ClassifierConfig cfg;
  cfg.n_classes = 4;
  ParamStore p;
  Rng rng(7);
  init_classifier_params(p, cfg, 10, rng);
  CHECK(p.at("cls.dense1.w").shape() == Shape{10, 128});
  CHECK(p.at("cls.dense2.w").shape() == Shape{128, 64});
  CHECK(p.at("cls.out.w").shape() == Shape{64, 4});

  Tensor emb = random_tensor({3, 10}, rng);
  Rng drop(8);
  Tensor probs = classify(emb, p, cfg, Mode::Infer, drop);
  REQUIRE(probs.shape() == Shape{3, 4});
  for (size_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (size_t j = 0; j < 4; ++j) {
      double v = probs.values()[r * 4 + j];
      CHECK(v > 0.0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }

  // Infer mode ignores dropout entirely.
  Rng d1(1), d2(2);
  Tensor a = classify(emb, p, cfg, Mode::Infer, d1);
  Tensor b = classify(emb, p, cfg, Mode::Infer, d2);
  CHECK(a.values() == b.values());
}

TEST_CASE("classifier head gradients match finite differences") {
  ClassifierConfig cfg;
  cfg.hidden = {6, 5};
  cfg.n_classes = 3;
  cfg.dropout_p = 0.0;
  ParamStore p;
  Rng rng(9);
  init_classifier_params(p, cfg, 4, rng);
  Tensor emb = random_tensor({2, 4}, rng);
  std::vector<int> labels = {2, 0};

  auto loss_with = [&](const std::string& name, const Tensor& w) {
    ParamStore local = p;
    local.set(name, w);
    Rng drop(0);
    Tensor probs = classify(emb, local, cfg, Mode::Train, drop);
    return add(cross_entropy(probs, labels),
               l2_penalty(local, cfg.l2_lambda));
  };
  for (const ParamStore::Item& it : p.items) {
    auto fn = [&](const Tensor& w) { return loss_with(it.name, w); };
    GradCheck gc = grad_check(fn, it.value);
    INFO("parameter " << it.name);
    CHECK(gc.max_rel_err <= 1e-4);
  }

  // And with respect to the embedding itself.
  GradCheck gc = grad_check(
      [&](const Tensor& e) {
        Rng d(0);
        return cross_entropy(classify(e, p, cfg, Mode::Train, d), labels);
      },
      emb);
  CHECK(gc.max_rel_err <= 1e-4);
}

TEST_CASE("predictions pick the argmax with ties to the lowest index") {
  Tensor probs({3, 3},
               {0.2, 0.5, 0.3, 0.4, 0.4, 0.2, 1.0 / 3, 1.0 / 3, 1.0 / 3});
  auto preds = predictions(probs);
  REQUIRE(preds.size() == 3);
  CHECK(preds[0].label == 1);
  CHECK(preds[0].prob == 0.5);
  CHECK(preds[1].label == 0);
  CHECK(preds[2].label == 0);
  CHECK(preds[0].probs == std::vector<double>{0.2, 0.5, 0.3});
}

TEST_CASE("classifier config validation") {
  ParamStore p;
  Rng rng(10);
  ClassifierConfig bad;
  bad.n_classes = 1;
  CHECK_THROWS_AS(init_classifier_params(p, bad, 4, rng), ConfigError);
  bad = ClassifierConfig{};
  bad.dropout_p = -0.1;
  CHECK_THROWS_AS(init_classifier_params(p, bad, 4, rng), ConfigError);
  bad = ClassifierConfig{};
  bad.maxnorm_c = 0.0;
  CHECK_THROWS_AS(init_classifier_params(p, bad, 4, rng), ConfigError);
  CHECK_THROWS_AS(maxnorm_project(Tensor({2}, {1.0, 2.0}), 3.0), NumericError);
}
