#include <cmath>
#include <vector>

#include "checkers.hpp"
#include "doctest.h"
#include "eegtext/classifier.hpp"
#include "eegtext/encoder.hpp"
#include "eegtext/errors.hpp"
#include "eegtext/layers.hpp"
#include "eegtext/params.hpp"
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

// Small-everything config so brute-force finite differences stay cheap.
EncoderConfig tiny_encoder() {
  EncoderConfig cfg;
  cfg.block_filters = {2, 3, 4};
  cfg.kernel_time = 5;
  cfg.depth_multiplier = 2;
  cfg.lstm_units = 6;
  cfg.lstm_layers = 2;
  cfg.pool_stride = 2;
  cfg.sep_kernel_time = 3;
  cfg.sep_filters = 7;
  cfg.dropout_p = 0.0;  // finite differences need a deterministic forward
  return cfg;
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.values()) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace

TEST_CASE("conv block: zero parameters give zero output") {
  EncoderConfig cfg;
  ParamStore p;
  Rng rng(3);
  init_encoder_params(p, cfg, rng);
  p.set("enc.block1.w", Tensor::zeros({64, 1, 8}));
  p.set("enc.block1.b", Tensor::zeros({8}));
  Tensor x = random_tensor({2, 5, 40, 1}, rng);
  Tensor y = conv_block(x, p, "enc.block1", cfg, Mode::Train);
  CHECK(y.shape() == Shape{2, 5, 40, 8});
  CHECK(max_abs(y) == 0.0);  // BN of zeros is zero (beta=0), ELU(0)=0
}

TEST_CASE("conv block: output channel counts follow config") {
  EncoderConfig cfg;
  ParamStore p;
  Rng rng(4);
  init_encoder_params(p, cfg, rng);
  Tensor x = random_tensor({2, 5, 16, 1}, rng);
  size_t want[] = {8, 16, 32};
  for (size_t i = 0; i < 3; ++i) {
    Tensor y = conv_block(x, p, "enc.block" + std::to_string(i + 1), cfg,
                          Mode::Infer);
    CHECK(y.shape() == Shape{2, 5, 16, want[i]});
  }
}

TEST_CASE("conv block: train mode renormalizes, infer mode uses running") {
  EncoderConfig cfg;
  cfg.bn_momentum = 0.5;
  ParamStore p;
  Rng rng(5);
  init_encoder_params(p, cfg, rng);
  // Scale keeps conv-output variance well above bn_epsilon, so the eps
  // term costs far less than the 1e-3 tolerance below.
  Tensor x = random_tensor({4, 5, 24, 1}, rng, 8.0);

  // The normalization itself, at conv-output scale: batch moments (0, 1).
  Tensor z = conv1d_time(x, p.at("enc.block1.w"), p.at("enc.block1.b"));
  auto zm = batch_norm_moments(z);
  Tensor bn = batch_norm(z, zm.first, zm.second, p.at("enc.block1.gamma"),
                         p.at("enc.block1.beta"), cfg.bn_epsilon);
  auto m = batch_norm_moments(bn);
  for (double v : m.first.values()) CHECK(std::fabs(v) < 1e-6);
  for (double v : m.second.values())
    CHECK(std::fabs(v - 1.0) < 1e-3);

  Tensor y = conv_block(x, p, "enc.block1", cfg, Mode::Train);
  CHECK(y.shape() == Shape{4, 5, 24, 8});

  // One train step moved the running stats off their 0/1 start.
  const auto& rm = p.at("enc.block1.running_mean").values();
  const auto& rv = p.at("enc.block1.running_var").values();
  bool moved = false;
  for (double v : rm)
    if (v != 0.0) moved = true;
  for (double v : rv)
    if (v != 1.0) moved = true;
  CHECK(moved);

  // Infer mode is pure: stats stay bitwise put.
  std::vector<double> rm_before(rm), rv_before(rv);
  (void)conv_block(x, p, "enc.block1", cfg, Mode::Infer);
  CHECK(p.at("enc.block1.running_mean").values() == rm_before);
  CHECK(p.at("enc.block1.running_var").values() == rv_before);
}

TEST_CASE("concat of block outputs keeps order and isolates gradients") {
  Rng rng(6);
  Tensor f1 = random_tensor({2, 5, 4, 8}, rng);
  Tensor f2 = random_tensor({2, 5, 4, 16}, rng);
  Tensor f3 = random_tensor({2, 5, 4, 32}, rng);

  Tensor f1g(f1.shape(), f1.values(), DType::F64, true);
  Tensor f3g(f3.shape(), f3.values(), DType::F64, true);
  Tape tape;
  Tensor cat = concat_last({f1g, f2, f3g});
  REQUIRE(cat.shape() == Shape{2, 5, 4, 56});

  // Slice [0:8] reproduces block 1 exactly.
  Tensor head = slice_last(cat, 0, 8);
  CHECK(head.values() == f1.values());

  // A loss living on the block-2 slice sends no gradient to blocks 1 or 3.
  Tensor mid = slice_last(cat, 8, 24);
  backward(sum(mul(mid, mid)));
  CHECK(max_abs(tape.grad(f1g)) == 0.0);
  CHECK(max_abs(tape.grad(f3g)) == 0.0);
}

TEST_CASE("depthwise stage: channel k feeds exactly outputs 2k and 2k+1") {
  EncoderConfig cfg;
  ParamStore p;
  Rng rng(7);
  init_encoder_params(p, cfg, rng);
  Tensor x = random_tensor({1, 5, 12, 56}, rng);
  Tensor base = depthwise_conv1d_time(x, p.at("enc.depth.w"));
  REQUIRE(base.shape() == Shape{1, 5, 12, 112});

  size_t k = 23;
  std::vector<double> v(x.values());
  for (size_t i = k; i < v.size(); i += 56) v[i] += 0.5;
  Tensor moved = depthwise_conv1d_time(Tensor(x.shape(), v),
                                       p.at("enc.depth.w"));
  const auto& a = base.values();
  const auto& b = moved.values();
  for (size_t i = 0; i < a.size(); ++i) {
    size_t ch = i % 112;
    if (ch == 2 * k || ch == 2 * k + 1)
      continue;  // the two descendants may move
    CHECK(a[i] == b[i]);
  }
  bool changed = false;
  for (size_t i = 2 * k; i < a.size(); i += 112)
    if (a[i] != b[i]) changed = true;
  CHECK(changed);
}

TEST_CASE("lstm step: zero parameters pin gates at one half") {
  size_t n = 3, d = 4, h = 5;
  LstmGates g{Tensor::zeros({d + h, h}), Tensor::zeros({d + h, h}),
              Tensor::zeros({d + h, h}), Tensor::zeros({d + h, h}),
              Tensor::zeros({h}),        Tensor::zeros({h}),
              Tensor::zeros({h}),        Tensor::zeros({h})};
  Rng rng(8);
  Tensor xt = random_tensor({n, d}, rng, 3.0);
  LstmState st{Tensor::zeros({n, h}), Tensor::zeros({n, h})};
  LstmState out = lstm_step(xt, st, g);
  // f=i=o=sigmoid(0)=0.5, c_hat=tanh(0)=0, so c and h stay zero.
  CHECK(max_abs(out.c) == 0.0);
  CHECK(max_abs(out.h) == 0.0);
}

TEST_CASE("lstm step: hidden state bounded by one for wild inputs") {
  size_t n = 2, d = 3, h = 4;
  Rng rng(9);
  LstmGates g{random_tensor({d + h, h}, rng, 5.0),
              random_tensor({d + h, h}, rng, 5.0),
              random_tensor({d + h, h}, rng, 5.0),
              random_tensor({d + h, h}, rng, 5.0),
              random_tensor({h}, rng, 5.0),
              random_tensor({h}, rng, 5.0),
              random_tensor({h}, rng, 5.0),
              random_tensor({h}, rng, 5.0)};
  LstmState st{random_tensor({n, h}, rng), random_tensor({n, h}, rng, 4.0)};
  Tensor xt = random_tensor({n, d}, rng, 10.0);
  LstmState out = lstm_step(xt, st, g);
  CHECK(max_abs(out.h) < 1.0);
}

TEST_CASE("lstm 5-step gradients match finite differences") {
  size_t n = 2, d = 3, h = 4, steps = 5;
  Rng rng(10);
  Tensor xs = random_tensor({n, steps, d}, rng);

  // Loss as a function of one gate weight matrix, all else fixed.
  auto run = [&](const LstmGates& g) {
    LstmState st{Tensor::zeros({n, h}), Tensor::zeros({n, h})};
    for (size_t t = 0; t < steps; ++t) st = lstm_step(slice_time(xs, t), st, g);
    return sum(st.h);
  };

  LstmGates base{random_tensor({d + h, h}, rng), random_tensor({d + h, h}, rng),
                 random_tensor({d + h, h}, rng), random_tensor({d + h, h}, rng),
                 random_tensor({h}, rng),        random_tensor({h}, rng),
                 random_tensor({h}, rng),        random_tensor({h}, rng)};
  Tensor LstmGates::*mats[] = {&LstmGates::wf, &LstmGates::wi, &LstmGates::wc,
                               &LstmGates::wo, &LstmGates::bf, &LstmGates::bi,
                               &LstmGates::bc, &LstmGates::bo};
  for (auto mem : mats) {
    auto fn = [&](const Tensor& w) {
      LstmGates g = base;
      g.*mem = w;
      return run(g);
    };
    GradCheck gc = grad_check(fn, base.*mem);
    CHECK(gc.max_rel_err <= 1e-4);
  }
}

TEST_CASE("lstm sequence: T=1 equals a single step") {
  size_t n = 2, d = 3, h = 4;
  Rng rng(11);
  LstmGates g{random_tensor({d + h, h}, rng), random_tensor({d + h, h}, rng),
              random_tensor({d + h, h}, rng), random_tensor({d + h, h}, rng),
              random_tensor({h}, rng),        random_tensor({h}, rng),
              random_tensor({h}, rng),        random_tensor({h}, rng)};
  Tensor xs = random_tensor({n, 1, d}, rng);
  Tensor seq = lstm_sequence(xs, {g});
  LstmState st{Tensor::zeros({n, h}), Tensor::zeros({n, h})};
  LstmState stepped = lstm_step(slice_time(xs, 0), st, g);
  CHECK(seq.values() == stepped.h.reshaped({n, 1, h}).values());
}

TEST_CASE("lstm sequence: zero everything stays zero") {
  size_t d = 3, h = 4;
  LstmGates g{Tensor::zeros({d + h, h}), Tensor::zeros({d + h, h}),
              Tensor::zeros({d + h, h}), Tensor::zeros({d + h, h}),
              Tensor::zeros({h}),        Tensor::zeros({h}),
              Tensor::zeros({h}),        Tensor::zeros({h})};
  Tensor xs = Tensor::zeros({2, 6, d});
  CHECK(max_abs(lstm_sequence(xs, {g})) == 0.0);
}

TEST_CASE("lstm stacking equals chaining single layers") {
  size_t n = 2, d = 3, h = 4, t_len = 6;
  Rng rng(12);
  auto mk = [&](size_t din) {
    return LstmGates{random_tensor({din + h, h}, rng),
                     random_tensor({din + h, h}, rng),
                     random_tensor({din + h, h}, rng),
                     random_tensor({din + h, h}, rng),
                     random_tensor({h}, rng),
                     random_tensor({h}, rng),
                     random_tensor({h}, rng),
                     random_tensor({h}, rng)};
  };
  LstmGates g1 = mk(d), g2 = mk(h);
  Tensor xs = random_tensor({n, t_len, d}, rng);
  Tensor two = lstm_sequence(xs, {g1, g2});
  Tensor chained = lstm_sequence(lstm_sequence(xs, {g1}), {g2});
  CHECK(two.values() == chained.values());
}

TEST_CASE("lstm sequence rejects empty input") {
  LstmGates g{Tensor::zeros({5, 4}), Tensor::zeros({5, 4}),
              Tensor::zeros({5, 4}), Tensor::zeros({5, 4}),
              Tensor::zeros({4}),    Tensor::zeros({4}),
              Tensor::zeros({4}),    Tensor::zeros({4})};
  CHECK_THROWS_AS((void)lstm_sequence(Tensor::zeros({2, 1}), {g}),
                  NumericError);
  CHECK_THROWS_AS((void)lstm_sequence(Tensor::zeros({2, 3, 1}), {}),
                  ConfigError);
}

TEST_CASE("separable stage: delta depthwise + identity pointwise is identity") {
  size_t f = 6, t_len = 9;
  Rng rng(13);
  Tensor x = random_tensor({2, t_len, f}, rng);

  std::vector<double> dw(3 * f * 1, 0.0);
  for (size_t c = 0; c < f; ++c) dw[1 * f + c] = 1.0;  // center tap
  Tensor depth_w({3, f, 1}, std::move(dw));

  std::vector<double> pw(f * f, 0.0);
  for (size_t c = 0; c < f; ++c) pw[c * f + c] = 1.0;
  Tensor point_w({1, f, f}, std::move(pw));

  Tensor y = conv1d_time(depthwise_conv1d_time(x, depth_w), point_w);
  REQUIRE(y.shape() == x.shape());
  for (size_t i = 0; i < y.size(); ++i)
    CHECK(y.values()[i] == doctest::Approx(x.values()[i]).epsilon(1e-12));
}

TEST_CASE("separable stage equals full conv with the factored kernel") {
  size_t f_in = 5, f_out = 8, k = 4, t_len = 11;
  Rng rng(14);
  Tensor x = random_tensor({2, t_len, f_in}, rng);
  Tensor depth_w = random_tensor({k, f_in, 1}, rng);
  Tensor point_w = random_tensor({1, f_in, f_out}, rng);

  Tensor sep = conv1d_time(depthwise_conv1d_time(x, depth_w), point_w);

  // full[kk][i][o] = depth[kk][i][0] * point[0][i][o]
  std::vector<double> full(k * f_in * f_out);
  for (size_t kk = 0; kk < k; ++kk)
    for (size_t i = 0; i < f_in; ++i)
      for (size_t o = 0; o < f_out; ++o)
        full[(kk * f_in + i) * f_out + o] =
            depth_w.values()[kk * f_in + i] * point_w.values()[i * f_out + o];
  Tensor dense_conv = conv1d_time(x, Tensor({k, f_in, f_out}, std::move(full)));

  REQUIRE(sep.shape() == dense_conv.shape());
  for (size_t i = 0; i < sep.size(); ++i)
    CHECK(std::fabs(sep.values()[i] - dense_conv.values()[i]) <= 1e-10);

  // Factorization uses strictly fewer parameters than the full kernel.
  CHECK(depth_w.size() + point_w.size() < k * f_in * f_out);
}

TEST_CASE("encoder forward: shapes, determinism, and mode rules") {
  EncoderConfig cfg = tiny_encoder();
  ParamStore p;
  Rng rng(15);
  init_encoder_params(p, cfg, rng);

  size_t t_len = 12;
  Rng data_rng(16);
  Rng fwd_rng(17);
  for (size_t n : {1u, 2u, 32u}) {
    Tensor x = random_tensor({n, 5, t_len, 1}, data_rng);
    Tensor e = encoder_forward(x, p, cfg, Mode::Infer, fwd_rng);
    CHECK(e.shape() == Shape{n, cfg.embedding_dim()});
  }

  Tensor x = random_tensor({3, 5, t_len, 1}, data_rng);
  Tensor a = encoder_forward(x, p, cfg, Mode::Infer, fwd_rng);
  Tensor b = encoder_forward(x, p, cfg, Mode::Infer, fwd_rng);
  CHECK(a.values() == b.values());

  // Train mode needs two or more rows for batch statistics.
  Tensor one = random_tensor({1, 5, t_len, 1}, data_rng);
  CHECK_THROWS_AS((void)encoder_forward(one, p, cfg, Mode::Train, fwd_rng),
                  NumericError);
}

TEST_CASE("encoder forward: lstm-only ablation skips conv parameters") {
  EncoderConfig cfg = tiny_encoder();
  cfg.lstm_only = true;
  ParamStore p;
  Rng rng(18);
  init_encoder_params(p, cfg, rng);
  CHECK(!p.has("enc.block1.w"));
  CHECK(!p.has("enc.depth.w"));
  CHECK(!p.has("enc.sep.depth.w"));
  CHECK(p.has("enc.lstm1.wf"));

  Rng fwd_rng(19);
  Tensor x = random_tensor({2, 5, 8, 1}, rng);
  Tensor e = encoder_forward(x, p, cfg, Mode::Infer, fwd_rng);
  CHECK(e.shape() == Shape{2, cfg.lstm_units});
}

TEST_CASE("default model parameter count is frozen") {
  ModelConfig cfg;  // 5 channels, n_c = 2, all defaults
  ParamStore p;
  Rng rng(20);
  init_model_params(p, cfg, rng);
  CHECK(count_parameters(p) == 120410);
  CHECK(count_trainable_parameters(p) == 120298);

  // Calibration band: within ±30% of the published 145K reference count.
  double total = static_cast<double>(count_parameters(p));
  CHECK(total >= 0.7 * 145000.0);
  CHECK(total <= 1.3 * 145000.0);
}

TEST_CASE("full model gradients match finite differences everywhere") {
  ModelConfig cfg;
  cfg.encoder = tiny_encoder();
  cfg.classifier.hidden = {5, 4};
  cfg.classifier.n_classes = 3;
  cfg.classifier.dropout_p = 0.0;
  ParamStore p;
  Rng rng(21);
  init_model_params(p, cfg, rng);

  size_t n = 2, t_len = 8;
  Tensor x = random_tensor({n, 5, t_len, 1}, rng);
  std::vector<int> labels = {0, 2};

  auto loss_with = [&](const std::string& name, const Tensor& w) {
    ParamStore local = p;
    local.set(name, w);
    Rng fwd(0);
    Tensor probs = model_forward(x, local, cfg, Mode::Train, fwd);
    return add(cross_entropy(probs, labels),
               l2_penalty(local, cfg.classifier.l2_lambda));
  };

  for (const ParamStore::Item& it : p.items) {
    if (!it.trainable) continue;
    auto fn = [&](const Tensor& w) { return loss_with(it.name, w); };
    GradCheck gc = grad_check(fn, it.value);
    INFO("parameter " << it.name << " worst index " << gc.worst_index);
    CHECK(gc.max_rel_err <= 1e-4);
  }
}

TEST_CASE("model forward: infer twice is bitwise identical") {
  ModelConfig cfg;
  cfg.encoder = tiny_encoder();
  cfg.encoder.dropout_p = 0.5;  // must not fire in infer mode
  cfg.classifier.hidden = {5, 4};
  cfg.classifier.n_classes = 4;
  ParamStore p;
  Rng rng(22);
  init_model_params(p, cfg, rng);
  Tensor x = random_tensor({3, 5, 10, 1}, rng);
  Rng r1(100), r2(200);  // different streams: infer must ignore them
  Tensor a = model_forward(x, p, cfg, Mode::Infer, r1);
  Tensor b = model_forward(x, p, cfg, Mode::Infer, r2);
  CHECK(a.values() == b.values());
}

TEST_CASE("encoder config validation") {
  ParamStore p;
  Rng rng(23);
  EncoderConfig bad;
  bad.dropout_p = 1.0;
  CHECK_THROWS_AS(init_encoder_params(p, bad, rng), ConfigError);
  bad = EncoderConfig{};
  bad.kernel_time = 0;
  CHECK_THROWS_AS(init_encoder_params(p, bad, rng), ConfigError);
  bad = EncoderConfig{};
  bad.bn_momentum = 1.0;
  CHECK_THROWS_AS(init_encoder_params(p, bad, rng), ConfigError);
}
