// Acceptance gate: nine independent checks over the whole pipeline, printed
// one pass/fail line each. Exits 0 only when every criterion passes.
//
// Criteria 5-7 drive real training runs and the eegtext binary (expected as a
// sibling executable), so a full run takes a few minutes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <unistd.h>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "eegtext/classifier.hpp"
#include "eegtext/dsp.hpp"
#include "eegtext/encoder.hpp"
#include "eegtext/ingest.hpp"
#include "eegtext/io.hpp"
#include "eegtext/layers.hpp"
#include "eegtext/params.hpp"
#include "eegtext/rng.hpp"
#include "eegtext/tensor.hpp"
#include "eegtext/textgen.hpp"
#include "eegtext/trainer.hpp"

namespace fs = std::filesystem;
using namespace eegtext;
using Clock = std::chrono::steady_clock;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw Failure(msg);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median3(double a, double b, double c) {
  std::vector<double> v = {a, b, c};
  std::sort(v.begin(), v.end());
  return v[1];
}

Tensor rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// ---------------------------------------------------------------------------
// criterion 1: reverse-mode gradients vs central differences
// ---------------------------------------------------------------------------

// Relative error with an absolute floor so near-zero gradients compare
// absolutely rather than blowing up the ratio.
double rel_err(double g, double f) {
  return std::abs(g - f) / std::max({1e-3, std::abs(g), std::abs(f)});
}

// Full-coordinate check for one input tensor of a scalar-valued expression.
double grad_err(const std::function<Tensor(const Tensor&)>& f,
                const Tensor& x, double step = 1e-5) {
  Tensor xg(x.shape(), x.values(), x.dtype(), /*requires_grad=*/true);
  Tensor analytic;
  {
    Tape tape;
    Tensor y = f(xg);
    backward(y);
    analytic = tape.grad(xg);
  }
  Tensor numeric =
      finite_diff([&](const Tensor& xx) { return f(xx).item(); }, x, step);
  double worst = 0.0;
  for (size_t i = 0; i < x.size(); ++i)
    worst = std::max(worst, rel_err(analytic.values()[i], numeric.values()[i]));
  return worst;
}

std::string criterion1() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  auto run = [&](const char* what, double e) {
    require(e <= 1e-4, fmt("%s gradient error %.3e exceeds 1e-4", what, e));
    worst = std::max(worst, e);
  };
  Rng rng(5);

  {  // dense: x, w, b
    Tensor x = rand_tensor({3, 4}, rng), w = rand_tensor({4, 6}, rng),
           b = rand_tensor({6}, rng);
    run("dense/x", grad_err(
        [&](const Tensor& t) { return sum(eegtext::tanh(dense(t, w, b))); }, x));
    run("dense/w", grad_err(
        [&](const Tensor& t) { return sum(eegtext::tanh(dense(x, t, b))); }, w));
    run("dense/b", grad_err(
        [&](const Tensor& t) { return sum(eegtext::tanh(dense(x, w, t))); }, b));
  }
  {  // conv block (conv + BN + ELU in train mode): x, w, gamma, beta
    EncoderConfig ecfg;
    ParamStore bs;
    bs.add("blk.w", rand_tensor({5, 1, 3}, rng));
    bs.add("blk.b", rand_tensor({3}, rng));
    bs.add("blk.gamma", rand_tensor({3}, rng, 0.5, 1.5));
    bs.add("blk.beta", rand_tensor({3}, rng));
    bs.add("blk.running_mean", Tensor::zeros({3}), false);
    bs.add("blk.running_var", Tensor::full({3}, 1.0), false);
    Tensor x = rand_tensor({4, 6, 1}, rng);
    auto block_loss = [&](const std::string& name, const Tensor& t) {
      ParamStore ps = bs;
      ps.set(name, t);
      return sum(conv_block(x, ps, "blk", ecfg, Mode::Train));
    };
    run("conv_block/x", grad_err([&](const Tensor& t) {
      ParamStore ps = bs;
      return sum(conv_block(t, ps, "blk", ecfg, Mode::Train));
    }, x));
    run("conv_block/w", grad_err(
        [&](const Tensor& t) { return block_loss("blk.w", t); }, bs.at("blk.w")));
    run("conv_block/gamma", grad_err(
        [&](const Tensor& t) { return block_loss("blk.gamma", t); },
        bs.at("blk.gamma")));
    run("conv_block/beta", grad_err(
        [&](const Tensor& t) { return block_loss("blk.beta", t); },
        bs.at("blk.beta")));
  }
  {  // batch norm on batch moments: x, gamma, beta
    Tensor x = rand_tensor({8, 5}, rng), gamma = rand_tensor({5}, rng, 0.5, 1.5),
           beta = rand_tensor({5}, rng);
    auto bn = [&](const Tensor& xx, const Tensor& g, const Tensor& b) {
      auto m = batch_norm_moments(xx);
      return sum(eegtext::tanh(batch_norm(xx, m.first, m.second, g, b, 1e-3)));
    };
    run("batch_norm/x", grad_err(
        [&](const Tensor& t) { return bn(t, gamma, beta); }, x));
    run("batch_norm/gamma", grad_err(
        [&](const Tensor& t) { return bn(x, t, beta); }, gamma));
    run("batch_norm/beta", grad_err(
        [&](const Tensor& t) { return bn(x, gamma, t); }, beta));
  }
  {  // depthwise: x, w
    Tensor x = rand_tensor({2, 10, 4}, rng), w = rand_tensor({5, 4, 2}, rng);
    run("depthwise/x", grad_err([&](const Tensor& t) {
      return sum(eegtext::tanh(depthwise_conv1d_time(t, w)));
    }, x));
    run("depthwise/w", grad_err([&](const Tensor& t) {
      return sum(eegtext::tanh(depthwise_conv1d_time(x, t)));
    }, w));
  }
  {  // LSTM over 5 steps: xs and every gate tensor
    const size_t Din = 3, H = 4;
    Tensor xs = rand_tensor({2, 5, Din}, rng);
    LstmGates g{rand_tensor({Din + H, H}, rng), rand_tensor({Din + H, H}, rng),
                rand_tensor({Din + H, H}, rng), rand_tensor({Din + H, H}, rng),
                rand_tensor({H}, rng), rand_tensor({H}, rng),
                rand_tensor({H}, rng), rand_tensor({H}, rng)};
    run("lstm/xs", grad_err([&](const Tensor& t) {
      return sum(lstm_sequence(t, {g}));
    }, xs));
    const std::vector<std::pair<const char*, Tensor LstmGates::*>> gates = {
        {"lstm/wf", &LstmGates::wf}, {"lstm/wi", &LstmGates::wi},
        {"lstm/wc", &LstmGates::wc}, {"lstm/wo", &LstmGates::wo},
        {"lstm/bf", &LstmGates::bf}, {"lstm/bi", &LstmGates::bi},
        {"lstm/bc", &LstmGates::bc}, {"lstm/bo", &LstmGates::bo}};
    for (const auto& [label, member] : gates) {
      run(label, grad_err([&](const Tensor& t) {
        LstmGates gg = g;
        gg.*member = t;
        return sum(lstm_sequence(xs, {gg}));
      }, g.*member));
    }
  }
  {  // average pooling
    Tensor x = rand_tensor({2, 9, 3}, rng);
    run("avg_pool/x", grad_err([&](const Tensor& t) {
      return sum(eegtext::tanh(avg_pool_time(t, 4)));
    }, x));
  }
  {  // separable = depthwise then pointwise: x and both kernels
    Tensor x = rand_tensor({2, 8, 3}, rng);
    Tensor wd = rand_tensor({5, 3, 2}, rng), wp = rand_tensor({1, 6, 4}, rng);
    auto sep = [&](const Tensor& xx, const Tensor& d, const Tensor& p) {
      return sum(eegtext::tanh(conv1d_time(depthwise_conv1d_time(xx, d), p)));
    };
    run("separable/x", grad_err(
        [&](const Tensor& t) { return sep(t, wd, wp); }, x));
    run("separable/depth_w", grad_err(
        [&](const Tensor& t) { return sep(x, t, wp); }, wd));
    run("separable/point_w", grad_err(
        [&](const Tensor& t) { return sep(x, wd, t); }, wp));
  }
  {  // dropout with a pinned mask
    Tensor x = rand_tensor({6, 5}, rng);
    run("dropout/x", grad_err([&](const Tensor& t) {
      Rng mask_rng(123);
      return sum(eegtext::tanh(dropout(t, 0.4, mask_rng, true)));
    }, x));
  }
  {  // softmax + cross entropy on logits
    Tensor z = rand_tensor({4, 5}, rng, -2.0, 2.0);
    const std::vector<int> y = {0, 3, 1, 4};
    run("softmax_ce/logits", grad_err([&](const Tensor& t) {
      return cross_entropy(softmax(t), y);
    }, z));
  }
  {  // L2 penalty over a parameter store
    Tensor w = rand_tensor({4, 3}, rng);
    run("l2/w", grad_err([&](const Tensor& t) {
      ParamStore ps;
      ps.add("cls.h.w", t);
      return l2_penalty(ps, 0.37);
    }, w));
  }

  // Full encoder + classifier at T=32, batch 2: analytic backward once,
  // then finite differences at sampled coordinates of every trainable tensor.
  {
    ModelConfig cfg;  // full-size architecture
    Rng init_rng(1);
    ParamStore base;
    init_model_params(base, cfg, init_rng);
    Rng data_rng(2);
    Tensor x = rand_tensor({2, 5, 32, 1}, data_rng);
    const std::vector<int> y = {0, 1};
    const double lambda = cfg.classifier.l2_lambda;

    auto objective = [&](const ParamStore& ps) {
      ParamStore copy = ps;  // train mode mutates BN running stats
      Rng drop_rng(99);
      Tensor probs = model_forward(x, copy, cfg, Mode::Train, drop_rng);
      return add(cross_entropy(probs, y), l2_penalty(copy, lambda)).item();
    };

    std::map<std::string, std::vector<double>> analytic;
    {
      ParamStore work = base;
      Tape tape;
      Rng drop_rng(99);
      Tensor probs = model_forward(x, work, cfg, Mode::Train, drop_rng);
      Tensor obj =
          add(cross_entropy(probs, y), l2_penalty(work, lambda));
      backward(obj);
      for (const auto& it : base.items)
        if (it.trainable) analytic[it.name] = tape.grad(it.value).values();
    }

    Rng pick(7);
    const double h = 1e-5;
    for (const auto& it : base.items) {
      if (!it.trainable) continue;
      const std::vector<double>& g = analytic.at(it.name);
      const size_t n_probe = std::min<size_t>(3, it.value.size());
      for (size_t p = 0; p < n_probe; ++p) {
        const size_t i = static_cast<size_t>(pick.below(it.value.size()));
        auto perturbed = [&](double delta) {
          ParamStore ps = base;
          std::vector<double> v = it.value.values();
          v[i] += delta;
          ps.set(it.name, Tensor(it.value.shape(), std::move(v)));
          return objective(ps);
        };
        const double fd = (perturbed(h) - perturbed(-h)) / (2.0 * h);
        const double e = rel_err(g[i], fd);
        require(e <= 1e-4, fmt("full model %s[%zu] gradient error %.3e",
                               it.name.c_str(), i, e));
        worst = std::max(worst, e);
      }
    }
  }

  const double secs = seconds_since(t0);
  require(secs <= 60.0, fmt("gradient suite took %.1fs (> 60s)", secs));
  return fmt("max rel err %.2e across layer suites + full model, %.1fs",
             worst, secs);
}

// ---------------------------------------------------------------------------
// criterion 2: convolution oracles
// ---------------------------------------------------------------------------

std::vector<double> oracle_conv(const std::vector<double>& x, size_t R,
                                size_t T, size_t Fin,
                                const std::vector<double>& w, size_t K,
                                size_t Fout, const std::vector<double>& b) {
  const size_t pl = (K - 1) / 2;
  std::vector<double> out(R * T * Fout, 0.0);
  for (size_t r = 0; r < R; ++r)
    for (size_t t = 0; t < T; ++t)
      for (size_t fo = 0; fo < Fout; ++fo) {
        double s = b.empty() ? 0.0 : b[fo];
        for (size_t k = 0; k < K; ++k) {
          const long long src = (long long)t + (long long)k - (long long)pl;
          if (src < 0 || src >= (long long)T) continue;
          for (size_t fi = 0; fi < Fin; ++fi)
            s += x[(r * T + src) * Fin + fi] * w[(k * Fin + fi) * Fout + fo];
        }
        out[(r * T + t) * Fout + fo] = s;
      }
  return out;
}

std::vector<double> oracle_depthwise(const std::vector<double>& x, size_t R,
                                     size_t T, size_t Fin,
                                     const std::vector<double>& w, size_t K,
                                     size_t M, const std::vector<double>& b) {
  const size_t pl = (K - 1) / 2;
  std::vector<double> out(R * T * Fin * M, 0.0);
  for (size_t r = 0; r < R; ++r)
    for (size_t t = 0; t < T; ++t)
      for (size_t fi = 0; fi < Fin; ++fi)
        for (size_t j = 0; j < M; ++j) {
          double s = b.empty() ? 0.0 : b[fi * M + j];
          for (size_t k = 0; k < K; ++k) {
            const long long src = (long long)t + (long long)k - (long long)pl;
            if (src < 0 || src >= (long long)T) continue;
            s += x[(r * T + src) * Fin + fi] * w[(k * Fin + fi) * M + j];
          }
          out[(r * T + t) * (Fin * M) + fi * M + j] = s;
        }
  return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), "oracle size mismatch");
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

std::string criterion2() {
  Rng rng(11);
  const size_t R = 2, T = 64, C = 5;
  Tensor x = rand_tensor({R, T, C}, rng);
  double worst = 0.0;

  {  // plain convolution, with bias
    const size_t K = 7, Fout = 4;
    Tensor w = rand_tensor({K, C, Fout}, rng), b = rand_tensor({Fout}, rng);
    Tensor got = conv1d_time(x, w, b);
    worst = std::max(worst, max_abs_diff(got.values(),
        oracle_conv(x.values(), R, T, C, w.values(), K, Fout, b.values())));
  }
  {  // depthwise, with bias
    const size_t K = 5, M = 3;
    Tensor w = rand_tensor({K, C, M}, rng), b = rand_tensor({C * M}, rng);
    Tensor got = depthwise_conv1d_time(x, w, b);
    worst = std::max(worst, max_abs_diff(got.values(),
        oracle_depthwise(x.values(), R, T, C, w.values(), K, M, b.values())));
  }
  {  // separable: depthwise (no bias) then 1x1 pointwise (no bias)
    const size_t K = 9, M = 2, Fout = 6;
    Tensor wd = rand_tensor({K, C, M}, rng);
    Tensor wp = rand_tensor({1, C * M, Fout}, rng);
    Tensor got = conv1d_time(depthwise_conv1d_time(x, wd), wp);
    std::vector<double> mid =
        oracle_depthwise(x.values(), R, T, C, wd.values(), K, M, {});
    std::vector<double> want =
        oracle_conv(mid, R, T, C * M, wp.values(), 1, Fout, {});
    worst = std::max(worst, max_abs_diff(got.values(), want));
  }

  require(worst <= 1e-10, fmt("conv oracle mismatch %.3e exceeds 1e-10", worst));
  return fmt("conv/depthwise/separable match brute force, max |diff| %.2e",
             worst);
}

// ---------------------------------------------------------------------------
// criterion 3: analytic identities
// ---------------------------------------------------------------------------

std::string criterion3() {
  Rng rng(13);

  {  // softmax rows sum to 1; shift invariance
    Tensor z = rand_tensor({7, 9}, rng, -4.0, 4.0);
    Tensor p = softmax(z);
    for (size_t r = 0; r < 7; ++r) {
      double s = 0.0;
      for (size_t c = 0; c < 9; ++c) s += p.values()[r * 9 + c];
      require(std::abs(s - 1.0) <= 1e-6,
              fmt("softmax row %zu sums to %.9f", r, s));
    }
    Tensor shifted = softmax(add_scalar(z, 3.7));
    for (size_t i = 0; i < p.size(); ++i)
      require(std::abs(p.values()[i] - shifted.values()[i]) <= 1e-12,
              "softmax shift invariance broken");
  }
  for (size_t n_c : {2u, 3u, 5u, 10u, 20u}) {  // CE of uniform = ln n_c
    Tensor uniform({4, n_c},
                   std::vector<double>(4 * n_c, 1.0 / double(n_c)));
    const std::vector<int> y = {0, int(n_c) - 1, int(n_c / 2), 0};
    const double ce = cross_entropy(uniform, y).item();
    require(std::abs(ce - std::log(double(n_c))) <= 1e-9,
            fmt("uniform CE for %zu classes is %.12f", n_c, ce));
  }
  {  // ELU(0) == 0 exactly
    const Tensor e = elu(Tensor::zeros({3}));
    for (double v : e.values()) require(v == 0.0, "elu(0) != 0");
  }
  {  // max-norm projection: bounding and idempotent
    const double c = 1.5;
    Tensor w = rand_tensor({6, 8}, rng, -2.0, 2.0);
    Tensor proj = maxnorm_project(w, c);
    for (size_t col = 0; col < 8; ++col) {
      double norm = 0.0;
      for (size_t row = 0; row < 6; ++row) {
        const double v = proj.values()[row * 8 + col];
        norm += v * v;
      }
      require(std::sqrt(norm) <= c + 1e-9,
              fmt("column %zu norm %.12f exceeds %.2f", col, std::sqrt(norm), c));
    }
    Tensor twice = maxnorm_project(proj, c);
    for (size_t i = 0; i < proj.size(); ++i)
      require(std::abs(twice.values()[i] - proj.values()[i]) <= 1e-9,
              "max-norm projection is not idempotent");
  }
  {  // BN train-mode output moments ~ (0, 1)
    Shape shape = {64, 6};
    std::vector<double> v(shape_size(shape));
    for (double& x : v) x = rng.normal(0.0, 3.0);
    Tensor x(std::move(shape), std::move(v));
    auto m = batch_norm_moments(x);
    Tensor out = batch_norm(x, m.first, m.second, Tensor::full({6}, 1.0),
                            Tensor::zeros({6}), 1e-3);
    auto om = batch_norm_moments(out);
    for (size_t f = 0; f < 6; ++f) {
      require(std::abs(om.first.values()[f]) <= 1e-6,
              fmt("BN output mean[%zu] = %.3e", f, om.first.values()[f]));
      require(std::abs(om.second.values()[f] - 1.0) <= 1e-3,
              fmt("BN output var[%zu] = %.6f", f, om.second.values()[f]));
    }
  }
  return "softmax sums/shift, uniform CE, ELU(0), max-norm, BN moments all hold";
}

// ---------------------------------------------------------------------------
// criterion 4: DSP properties
// ---------------------------------------------------------------------------

std::string criterion4() {
  FilterSpec spec;
  const std::vector<double> taps = fir_design(spec);

  const double db10 = 20.0 * std::log10(fir_response(taps, 10.0, 128.0));
  require(std::abs(db10) <= 1.0, fmt("FIR response at 10 Hz is %+.3f dB", db10));
  const double atten60 = -20.0 * std::log10(fir_response(taps, 60.0, 128.0));
  require(atten60 >= 20.0,
          fmt("FIR attenuation at 60 Hz is only %.1f dB", atten60));

  {  // filtfilt zero lag on an in-band sinusoid
    const size_t n = 384;
    std::vector<double> x(n);
    for (size_t i = 0; i < n; ++i)
      x[i] = std::sin(2.0 * M_PI * 10.0 * double(i) / 128.0);
    const std::vector<double> y = filtfilt(x, taps);
    require(y.size() == n, "filtfilt changed the length");
    int best_lag = -99;
    double best = -1e300;
    for (int lag = -8; lag <= 8; ++lag) {
      double corr = 0.0;
      for (size_t i = 64; i < 320; ++i)
        corr += y[i] * x[size_t(long(i) + lag)];
      if (corr > best) {
        best = corr;
        best_lag = lag;
      }
    }
    require(best_lag == 0, fmt("filtfilt peak correlation at lag %d", best_lag));
  }
  {  // STFT round trip, interior RMS
    Rng rng(17);
    const size_t n = 384;
    std::vector<double> w(n);
    for (double& v : w) v = rng.uniform(-1.0, 1.0);
    StftSpec ss;
    const std::vector<double> r = istft(stft(w, ss), n);
    double acc = 0.0;
    size_t count = 0;
    for (size_t i = ss.window; i + ss.window < n; ++i) {
      const double d = r[i] - w[i];
      acc += d * d;
      ++count;
    }
    const double rms = std::sqrt(acc / double(count));
    require(rms <= 1e-6, fmt("STFT round-trip interior RMS %.3e", rms));
  }
  for (size_t len : {100u, 384u, 500u}) {  // fixed-length epochs
    Rng rng(19);
    std::vector<double> w(len);
    for (double& v : w) v = rng.uniform(-1.0, 1.0);
    const std::vector<double> out = fix_length(w, 384);
    require(out.size() == 384, fmt("fix_length(%zu) gave %zu", len, out.size()));
    for (size_t i = 0; i < std::min<size_t>(len, 384); ++i)
      require(out[i] == w[i], "fix_length altered retained samples");
    for (size_t i = len; i < 384; ++i)
      require(out[i] == 0.0, "fix_length pad is not zero");
  }
  return fmt("FIR %+.2f dB @10 Hz / %.0f dB down @60 Hz, zero-lag filtfilt, "
             "STFT round trip, fix_length {100,384,500}",
             db10, atten60);
}

// ---------------------------------------------------------------------------
// criteria 5 & 6: learning capacity and data-efficiency shape
// ---------------------------------------------------------------------------

ModelConfig desk_model(size_t n_classes) {
  ModelConfig m;
  m.encoder.block_filters = {2, 2, 4};
  m.encoder.kernel_time = 17;
  m.encoder.lstm_units = 16;
  m.encoder.sep_kernel_time = 8;
  m.classifier.n_classes = n_classes;
  return m;
}

DatasetManifest manifest_for(const std::vector<RawTrial>& trials,
                             uint64_t split_seed) {
  DatasetManifest manifest;
  for (size_t i = 0; i < trials.size(); ++i) {
    ManifestEntry e;
    e.path = "trial" + std::to_string(i);
    e.label = trials[i].label;
    manifest.entries.push_back(e);
  }
  return split_train_val(manifest, 0.2, split_seed);
}

double capacity_accuracy(size_t n_classes, uint64_t seed, size_t epochs) {
  SynthSpec spec;
  spec.n_classes = n_classes;
  spec.trials_per_class = 50;
  spec.seed = seed;
  spec.n_samples = 256;
  const std::vector<RawTrial> trials = synth_generate(spec);
  const DatasetManifest manifest = manifest_for(trials, seed + 1);

  EpochOptions opts;
  opts.target_length = 256;
  std::vector<RawTrial> tr, va;
  for (size_t i = 0; i < trials.size(); ++i)
    (manifest.entries[i].split == Split::Train ? tr : va)
        .push_back(trials[i]);
  const EpochTensor train_set = assemble_epochs(tr, opts);
  const EpochTensor val_set = assemble_epochs(va, opts);

  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 16;
  tc.lr = 0.002;
  tc.seed = seed + 2;
  FitResult r = fit(train_set, val_set, desk_model(n_classes), tc);
  ParamStore best = r.best.params;
  return evaluate(best, r.best.model, val_set, tc.batch_size).accuracy;
}

std::string criterion5() {
  const auto t0 = Clock::now();
  // Epoch budgets tuned so every class count converges well inside the
  // 100-epoch ceiling; more classes mean more trials and so more updates
  // per epoch.
  const std::vector<std::pair<size_t, size_t>> plan = {
      {2, 10}, {3, 14}, {5, 16}, {10, 12}};
  const uint64_t seeds[3] = {11, 22, 33};
  std::map<size_t, double> med;
  for (const auto& [n_c, epochs] : plan) {
    require(epochs <= 100, "epoch budget exceeds the 100-epoch ceiling");
    double a[3];
    for (int s = 0; s < 3; ++s)
      a[s] = capacity_accuracy(n_c, seeds[s], epochs);
    med[n_c] = median3(a[0], a[1], a[2]);
  }
  require(med[2] >= 0.90, fmt("2-class median accuracy %.3f < 0.90", med[2]));
  require(med[5] >= 0.60, fmt("5-class median accuracy %.3f < 0.60", med[5]));
  require(med[2] >= med[3] - 0.05 && med[3] >= med[5] - 0.05 &&
              med[5] >= med[10] - 0.05,
          fmt("accuracy not monotone within 0.05: %.3f/%.3f/%.3f/%.3f",
              med[2], med[3], med[5], med[10]));
  const double secs = seconds_since(t0);
  require(secs <= 600.0, fmt("capacity suite took %.0fs (> 600s)", secs));
  return fmt("median val acc 2/3/5/10-class = %.2f/%.2f/%.2f/%.2f "
             "(3 seeds, %.0fs)",
             med[2], med[3], med[5], med[10], secs);
}

std::string criterion6() {
  const auto t0 = Clock::now();
  const std::vector<size_t> ks = {10, 25, 50, 100};
  const uint64_t seeds[3] = {11, 22, 33};
  std::vector<std::vector<double>> acc(3);
  for (int s = 0; s < 3; ++s) {
    SynthSpec spec;
    spec.n_classes = 2;
    spec.trials_per_class = 125;
    spec.seed = seeds[s];
    spec.n_samples = 256;
    spec.amplitude = 4.0;  // noisier task so small k clearly underperforms
    spec.noise_sigma = 3.0;
    const std::vector<RawTrial> trials = synth_generate(spec);
    const DatasetManifest manifest = manifest_for(trials, seeds[s] + 1);
    EpochOptions opts;
    opts.target_length = 256;
    TrainConfig tc;
    tc.epochs = 10;
    tc.batch_size = 16;
    tc.lr = 0.002;
    tc.seed = seeds[s] + 2;
    const std::vector<SweepRow> rows = sweep_data_efficiency(
        trials, manifest, seeds[s] + 3, opts, desk_model(2), tc, ks);
    for (const SweepRow& r : rows) acc[s].push_back(r.accuracy);
  }
  std::vector<double> med(ks.size());
  for (size_t i = 0; i < ks.size(); ++i)
    med[i] = median3(acc[0][i], acc[1][i], acc[2][i]);

  for (size_t i = 1; i < ks.size(); ++i)
    require(med[i] >= med[i - 1] - 0.05,
            fmt("accuracy drops from k=%zu (%.3f) to k=%zu (%.3f)",
                ks[i - 1], med[i - 1], ks[i], med[i]));
  const double gain_small = med[2] - med[0];  // k 10 -> 50
  const double gain_large = med[3] - med[2];  // k 50 -> 100
  require(gain_large < gain_small,
          fmt("marginal gain %.3f (50->100) not below %.3f (10->50)",
              gain_large, gain_small));
  return fmt("median acc k10/25/50/100 = %.2f/%.2f/%.2f/%.2f; "
             "gains %.2f then %.2f (%.0fs)",
             med[0], med[1], med[2], med[3], gain_small, gain_large,
             seconds_since(t0));
}

// ---------------------------------------------------------------------------
// criterion 7: perplexity table via the ppl command
// ---------------------------------------------------------------------------

const char kCorpus[] =
    "the quick dog runs over the field and barks at the mail truck\n"
    "a small dog naps in the warm sun by the door\n"
    "the striped cat watches birds from the window sill\n"
    "a gray cat chases a paper ball across the floor\n"
    "the green bird sings from a high branch in the garden\n"
    "a young bird hops between the feeder and the fence\n";

const char* kRefPool[4] = {
    "the dog runs across the field",
    "a cat naps by the warm window",
    "the bird sings in the garden",
    "a small dog barks at the door",
};

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    size_t c0 = 0;
    while (true) {
      size_t comma = line.find(',', c0);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(c0));
        break;
      }
      cells.push_back(line.substr(c0, comma - c0));
      c0 = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string criterion7(const fs::path& exe) {
  const fs::path dir =
      fs::temp_directory_path() / ("eegtext_accept_" + std::to_string(getpid()));
  fs::create_directories(dir);
  struct Cleanup {
    fs::path d;
    ~Cleanup() { std::error_code ec; fs::remove_all(d, ec); }
  } cleanup{dir};

  write_file((dir / "corpus.txt").string(), kCorpus);

  auto run = [&](const std::string& args) {
    const std::string cmd =
        "\"" + exe.string() + "\" " + args + " > /dev/null 2>&1";
    require(std::system(cmd.c_str()) == 0,
            "command failed: eegtext " + args);
  };

  // Tiny LSTM-only models per class count, then one appended ppl table.
  const std::string tiny_sets =
      " --set dsp.tap_count=33 --set dsp.target_length=64"
      " --set dsp.stft_window=16 --set dsp.stft_hop=8"
      " --set encoder.lstm_only=true --set encoder.lstm_units=4"
      " --set classifier.dense1_units=8 --set classifier.dense2_units=8"
      " --set train.epochs=1 --set train.batch_size=2";
  const fs::path ppl_csv = dir / "ppl.csv";
  for (size_t n_c : {2u, 5u, 10u, 20u}) {
    const std::string d = (dir / ("d" + std::to_string(n_c))).string();
    run(fmt("synth --classes %zu --per-class 2 --samples 64 --seed 7"
            " --freq-step 2 --out %s",
            n_c, d.c_str()));
    run(tiny_sets +
        fmt(" preprocess --manifest %s/manifest.tsv --out %s/epochs.bin",
            d.c_str(), d.c_str()));
    run(tiny_sets +
        fmt(" train --epochs-file %s/epochs.bin --out %s/model.ckpt"
            " --metrics %s/metrics.csv",
            d.c_str(), d.c_str(), d.c_str()));
    std::string refs;
    for (size_t i = 0; i < n_c; ++i) {
      refs += kRefPool[i % 4];
      refs += '\n';
    }
    write_file(d + "/refs.txt", refs);
    run(tiny_sets +
        fmt(" --set textgen.corpus=%s ppl --ckpt %s/model.ckpt"
            " --epochs-file %s/epochs.bin --references %s/refs.txt"
            " --out %s --split val --append",
            (dir / "corpus.txt").string().c_str(), d.c_str(), d.c_str(),
            d.c_str(), ppl_csv.string().c_str()));
  }

  const auto rows = parse_csv(read_file(ppl_csv.string()));
  require(rows.size() == 5, fmt("ppl table has %zu lines, expected 5",
                                rows.size()));
  require(rows[0] == std::vector<std::string>(
              {"n_classes", "mean_ppl", "mean_bpc", "n_sequences"}),
          "ppl table header wrong");
  const size_t want_nc[4] = {2, 5, 10, 20};
  for (size_t i = 0; i < 4; ++i) {
    require(rows[i + 1].size() == 4, "ppl row has wrong arity");
    require(std::stoul(rows[i + 1][0]) == want_nc[i],
            fmt("ppl row %zu has n_classes %s", i + 1, rows[i + 1][0].c_str()));
    const double ppl = std::stod(rows[i + 1][1]);
    const double bpc_col = std::stod(rows[i + 1][2]);
    require(std::isfinite(ppl) && ppl > 1.0, "ppl value out of range");
    require(std::abs(std::log2(ppl) - bpc_col) <= 1e-9,
            fmt("BPC column %.12f != log2(ppl) %.12f", bpc_col,
                std::log2(ppl)));
    require(std::stoul(rows[i + 1][3]) == want_nc[i],
            "ppl row scored an unexpected sequence count");
  }

  // Uniform-model identity: scoring over contexts the model never saw makes
  // every conditional exactly 1/V.
  const NgramModel model = ngram_train(kCorpus, 3, 1.0);
  const double V = double(model.vocab.size());
  const std::vector<double> lps = ngram_score(model, "0419", "#");
  const double uppl = perplexity(lps);
  require(std::abs(uppl - V) <= 1e-9,
          fmt("uniform-model PPL %.12f != vocab size %.0f", uppl, V));
  require(std::abs(bpc(uppl) - std::log2(V)) <= 1e-9, "uniform-model BPC off");

  // In-domain references must score below a disjoint-alphabet corpus.
  const Checkpoint ck = load_checkpoint((dir / "d2/model.ckpt").string());
  Backend backend;
  backend.ngram = model;
  const PromptTemplate tmpl = parse_prompt_template(kDefaultPromptTemplate);
  LabelMap labels = synth_label_map(2);
  // d2 epochs: reload through the trainer-facing container by re-running
  // eval-time preprocessing at the library level.
  SynthSpec spec2;
  spec2.n_classes = 2;
  spec2.trials_per_class = 2;
  spec2.seed = 7;
  spec2.n_samples = 64;
  EpochOptions opts;
  opts.filter.tap_count = 33;
  opts.stft.window = 16;
  opts.stft.hop = 8;
  opts.target_length = 64;
  const EpochTensor tiny = assemble_epochs(synth_generate(spec2), opts);
  const std::vector<std::string> in_refs = {kRefPool[0], kRefPool[1],
                                            kRefPool[2], kRefPool[3]};
  const std::vector<std::string> out_refs = {"0619 4415 2210 8175",
                                             "9941 0633 5027 1182",
                                             "3308 7754 2146 9901",
                                             "5512 8037 6649 0328"};
  const PplReport in_rep =
      eval_perplexity_by_class(ck, tiny, backend, tmpl, labels, &in_refs);
  const PplReport out_rep =
      eval_perplexity_by_class(ck, tiny, backend, tmpl, labels, &out_refs);
  require(in_rep.mean_ppl < out_rep.mean_ppl,
          fmt("in-domain PPL %.2f not below disjoint PPL %.2f",
              in_rep.mean_ppl, out_rep.mean_ppl));

  return fmt("rows for 2/5/10/20 classes, uniform PPL == V == %.0f, "
             "in-domain %.1f < disjoint %.1f",
             V, in_rep.mean_ppl, out_rep.mean_ppl);
}

// ---------------------------------------------------------------------------
// criterion 8: determinism and persistence
// ---------------------------------------------------------------------------

EpochTensor toy_epochs(size_t per_class, size_t t_len, uint64_t seed) {
  const size_t n = per_class * 2;
  Rng rng(seed);
  std::vector<double> data(n * 5 * t_len);
  std::vector<int> labels;
  for (size_t i = 0; i < n; ++i) {
    const int label = int(i % 2);
    labels.push_back(label);
    const double f = 6.0 + 10.0 * label;
    const double dc = label ? 1.0 : -1.0;
    for (size_t c = 0; c < 5; ++c) {
      const double phase = rng.uniform(0.0, 6.28);
      for (size_t t = 0; t < t_len; ++t)
        data[(i * 5 + c) * t_len + t] =
            2.0 * std::sin(2.0 * M_PI * f * double(t) / 128.0 + phase) + dc +
            0.1 * rng.normal();
    }
  }
  EpochTensor e;
  e.data = Tensor({n, 5, t_len, 1}, std::move(data));
  e.labels = std::move(labels);
  return e;
}

std::string criterion8() {
  ModelConfig cfg;
  cfg.encoder.lstm_only = true;
  cfg.encoder.lstm_units = 6;
  cfg.encoder.lstm_layers = 1;
  cfg.classifier.hidden = {6};
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.seed = 17;
  const EpochTensor train_set = toy_epochs(4, 32, 90);
  const EpochTensor val_set = toy_epochs(2, 32, 91);

  const FitResult r1 = fit(train_set, val_set, cfg, tc);
  const FitResult r2 = fit(train_set, val_set, cfg, tc);
  require(r1.log.to_csv() == r2.log.to_csv(),
          "identical seeds produced different metrics logs");

  const fs::path path = fs::temp_directory_path() /
                        ("eegtext_ckpt_" + std::to_string(getpid()) + ".bin");
  save_checkpoint(r1.best, path.string());
  const Checkpoint loaded = load_checkpoint(path.string());
  require(loaded.params.items.size() == r1.best.params.items.size(),
          "checkpoint dropped parameters");
  for (size_t i = 0; i < loaded.params.items.size(); ++i) {
    require(loaded.params.items[i].name == r1.best.params.items[i].name,
            "checkpoint reordered parameters");
    require(loaded.params.items[i].value.values() ==
                r1.best.params.items[i].value.values(),
            "checkpoint altered parameter values");
  }
  {  // infer-mode outputs bitwise equal through the round trip
    Rng unused1(0), unused2(0);
    ParamStore p1 = r1.best.params, p2 = loaded.params;
    const Tensor o1 =
        model_forward(val_set.data, p1, r1.best.model, Mode::Infer, unused1);
    const Tensor o2 =
        model_forward(val_set.data, p2, loaded.model, Mode::Infer, unused2);
    require(o1.values() == o2.values(),
            "round-tripped checkpoint changed infer outputs");
  }
  {  // checksum notices a flipped payload byte
    std::string bytes = read_file(path.string());
    bytes[bytes.size() / 2] = char(bytes[bytes.size() / 2] ^ 0x01);
    const fs::path bad = path.string() + ".bad";
    write_file(bad.string(), bytes);
    bool threw = false;
    try {
      load_checkpoint(bad.string());
    } catch (const IoError&) {
      threw = true;
    }
    std::error_code ec;
    fs::remove(bad, ec);
    fs::remove(path, ec);
    require(threw, "corrupted checkpoint loaded without error");
  }
  return "bitwise metrics replay, bitwise checkpoint round trip, corruption "
         "detected";
}

// ---------------------------------------------------------------------------
// criterion 9: parameter-count calibration
// ---------------------------------------------------------------------------

std::string criterion9() {
  ModelConfig cfg;  // defaults, n_classes = 2
  Rng rng(0);
  ParamStore params;
  init_model_params(params, cfg, rng);
  const double total = double(count_parameters(params));
  const double trainable = double(count_trainable_parameters(params));
  const double reference = 145000.0;
  const double dev = 100.0 * (total - reference) / reference;
  require(std::abs(total - reference) <= 0.30 * reference,
          fmt("parameter count %.0f deviates %+.1f%% from %.0f",
              total, dev, reference));
  return fmt("%.0f parameters (%.0f trainable) vs %.0f reference: %+.1f%%, "
             "inside +/-30%% (difference traced to the recurrent block; see "
             "README architecture notes)",
             total, trainable, reference, dev);
}

}  // namespace

int main(int, char** argv) {
  const fs::path exe = fs::path(argv[0]).parent_path() / "eegtext";

  const std::vector<std::pair<std::string, std::function<std::string()>>>
      criteria = {
          {"gradient checks", criterion1},
          {"convolution oracles", criterion2},
          {"analytic identities", criterion3},
          {"DSP properties", criterion4},
          {"learning capacity", criterion5},
          {"data-efficiency shape", criterion6},
          {"perplexity table", [&] { return criterion7(exe); }},
          {"determinism & persistence", criterion8},
          {"parameter-count calibration", criterion9},
      };

  size_t passed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    std::string verdict, detail;
    try {
      detail = criteria[i].second();
      verdict = "PASS";
      ++passed;
    } catch (const std::exception& e) {
      verdict = "FAIL";
      detail = e.what();
    }
    std::printf("criterion %zu (%s): %s - %s\n", i + 1,
                criteria[i].first.c_str(), verdict.c_str(), detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", passed, criteria.size());
  return passed == criteria.size() ? 0 : 1;
}
