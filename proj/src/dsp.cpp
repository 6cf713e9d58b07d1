#include "eegtext/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "eegtext/errors.hpp"
#include "eegtext/io.hpp"

namespace eegtext {

namespace {

constexpr double kPi = std::numbers::pi;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

// DC-normalized Hamming-windowed lowpass at normalized cutoff fc = f/fs.
std::vector<double> lowpass_taps(double fc, size_t taps) {
  const size_t M = taps - 1;  // even
  std::vector<double> h(taps);
  // Fill half and mirror so symmetry is exact in floating point.
  for (size_t n = 0; n <= M / 2; ++n) {
    double wn = 0.54 - 0.46 * std::cos(2.0 * kPi * double(n) / double(M));
    double v = 2.0 * fc * sinc(2.0 * fc * (double(n) - double(M) / 2.0)) * wn;
    h[n] = v;
    h[M - n] = v;
  }
  double dc = 0.0;
  for (double v : h) dc += v;
  for (double& v : h) v /= dc;
  return h;
}

void validate_filter(const FilterSpec& s) {
  if (!(s.passband_low_hz >= 0.0 && s.passband_low_hz < s.passband_high_hz &&
        s.passband_high_hz < s.sample_rate_hz / 2.0)) {
    throw ConfigError("filter band " + format_double(s.passband_low_hz) + "-" +
                      format_double(s.passband_high_hz) +
                      " Hz invalid for fs=" + format_double(s.sample_rate_hz));
  }
  if (s.tap_count < 3 || s.tap_count % 2 == 0) {
    throw ConfigError("tap_count must be odd and >= 3, got " +
                      std::to_string(s.tap_count));
  }
}

void validate_stft(const StftSpec& s) {
  if (s.hop == 0 || s.hop > s.window) {
    throw ConfigError("stft hop " + std::to_string(s.hop) +
                      " invalid for window " + std::to_string(s.window));
  }
  // Constant overlap-add for the periodic Hann needs the hop to divide the
  // window with at least 2x overlap.
  if (s.window % s.hop != 0 || s.window / s.hop < 2) {
    throw ConfigError("window " + std::to_string(s.window) + " / hop " +
                      std::to_string(s.hop) +
                      " does not satisfy constant overlap-add");
  }
}

std::vector<double> hann_periodic(size_t n) {
  std::vector<double> w(n);
  for (size_t i = 0; i < n; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * double(i) / double(n)));
  }
  return w;
}

// Reflection ("triangle wave") index into [0, n): ... 2 1 0 1 2 ... n-1 n-2 ...
size_t reflect_index(long i, size_t n) {
  const long period = 2 * static_cast<long>(n) - 2;
  long j = i % period;
  if (j < 0) j += period;
  if (j >= static_cast<long>(n)) j = period - j;
  return static_cast<size_t>(j);
}

// Causal FIR pass, zero initial state: y[i] = sum_k h[k] x[i-k].
void filter_causal(const std::vector<double>& h, const std::vector<double>& x,
                   std::vector<double>& y) {
  const size_t n = x.size(), K = h.size();
  y.assign(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const size_t kmax = std::min(K - 1, i);
    double s = 0.0;
    for (size_t k = 0; k <= kmax; ++k) s += h[k] * x[i - k];
    y[i] = s;
  }
}

}  // namespace

std::vector<double> fix_length(const std::vector<double>& wave,
                               size_t target) {
  if (wave.empty()) throw NumericError("fix_length on an empty waveform");
  std::vector<double> out(target, 0.0);
  std::copy(wave.begin(),
            wave.begin() + static_cast<long>(std::min(wave.size(), target)),
            out.begin());
  return out;
}

std::vector<double> fir_design(const FilterSpec& spec) {
  validate_filter(spec);
  const double fs = spec.sample_rate_hz;
  std::vector<double> high = lowpass_taps(spec.passband_high_hz / fs,
                                          spec.tap_count);
  std::vector<double> taps(spec.tap_count);
  if (spec.passband_low_hz > 0.0) {
    std::vector<double> low = lowpass_taps(spec.passband_low_hz / fs,
                                           spec.tap_count);
    for (size_t i = 0; i < taps.size(); ++i) taps[i] = high[i] - low[i];
  } else {
    taps = high;
  }
  const double center = (spec.passband_low_hz + spec.passband_high_hz) / 2.0;
  const double gain = fir_response(taps, center, fs);
  if (gain <= 0.0) throw NumericError("degenerate filter design");
  // Scale the two symmetric halves identically to keep symmetry exact.
  for (double& v : taps) v /= gain;
  return taps;
}

double fir_response(const std::vector<double>& taps, double freq_hz,
                    double sample_rate_hz) {
  const double w = 2.0 * kPi * freq_hz / sample_rate_hz;
  double re = 0.0, im = 0.0;
  for (size_t n = 0; n < taps.size(); ++n) {
    re += taps[n] * std::cos(w * double(n));
    im -= taps[n] * std::sin(w * double(n));
  }
  return std::hypot(re, im);
}

std::vector<double> filtfilt(const std::vector<double>& wave,
                             const std::vector<double>& taps) {
  const size_t n = wave.size();
  if (n < 2) throw NumericError("filtfilt needs at least 2 samples");
  if (taps.empty()) throw NumericError("filtfilt with no taps");
  // Reflection padding long enough to swallow both passes' edge transients.
  const size_t P = 3 * taps.size();
  std::vector<double> padded(n + 2 * P);
  for (size_t i = 0; i < padded.size(); ++i) {
    padded[i] = wave[reflect_index(static_cast<long>(i) - static_cast<long>(P),
                                   n)];
  }
  std::vector<double> fwd, bwd;
  filter_causal(taps, padded, fwd);
  std::reverse(fwd.begin(), fwd.end());
  filter_causal(taps, fwd, bwd);
  std::reverse(bwd.begin(), bwd.end());
  return {bwd.begin() + static_cast<long>(P),
          bwd.begin() + static_cast<long>(P + n)};
}

Spectrogram stft(const std::vector<double>& wave, const StftSpec& spec) {
  validate_stft(spec);
  if (wave.size() < spec.window) {
    throw NumericError("waveform of " + std::to_string(wave.size()) +
                       " samples is shorter than one STFT window (" +
                       std::to_string(spec.window) + ")");
  }
  Spectrogram sg;
  sg.window = spec.window;
  sg.hop = spec.hop;
  sg.bins = spec.window / 2 + 1;
  sg.frames = (wave.size() - spec.window) / spec.hop + 1;
  sg.c.assign(sg.frames * sg.bins, {0.0, 0.0});
  const std::vector<double> w = hann_periodic(spec.window);
  std::vector<double> buf(spec.window);
  for (size_t f = 0; f < sg.frames; ++f) {
    const size_t start = f * spec.hop;
    for (size_t i = 0; i < spec.window; ++i) buf[i] = wave[start + i] * w[i];
    for (size_t b = 0; b < sg.bins; ++b) {
      double re = 0.0, im = 0.0;
      const double wb = 2.0 * kPi * double(b) / double(spec.window);
      for (size_t i = 0; i < spec.window; ++i) {
        re += buf[i] * std::cos(wb * double(i));
        im -= buf[i] * std::sin(wb * double(i));
      }
      sg.at(f, b) = {re, im};
    }
  }
  return sg;
}

std::vector<double> istft(const Spectrogram& sg, size_t out_len) {
  StftSpec spec;
  spec.window = sg.window;
  spec.hop = sg.hop;
  validate_stft(spec);
  if (sg.bins != sg.window / 2 + 1 || sg.c.size() != sg.frames * sg.bins) {
    throw NumericError("malformed spectrogram");
  }
  const std::vector<double> w = hann_periodic(sg.window);
  const size_t span = (sg.frames - 1) * sg.hop + sg.window;
  std::vector<double> num(span, 0.0), den(span, 0.0);
  std::vector<double> frame(sg.window);
  for (size_t f = 0; f < sg.frames; ++f) {
    // Inverse real DFT of this frame's half spectrum.
    for (size_t i = 0; i < sg.window; ++i) {
      double s = 0.0;
      for (size_t b = 0; b < sg.bins; ++b) {
        const double wb = 2.0 * kPi * double(b) * double(i) / double(sg.window);
        const std::complex<double>& cb = sg.at(f, b);
        double term = cb.real() * std::cos(wb) - cb.imag() * std::sin(wb);
        // Interior bins stand for a conjugate pair; DC and Nyquist do not.
        if (b != 0 && b != sg.window / 2) term *= 2.0;
        s += term;
      }
      frame[i] = s / double(sg.window);
    }
    const size_t start = f * sg.hop;
    for (size_t i = 0; i < sg.window; ++i) {
      num[start + i] += w[i] * frame[i];
      den[start + i] += w[i] * w[i];
    }
  }
  std::vector<double> out(out_len, 0.0);
  const size_t lim = std::min(out_len, span);
  for (size_t i = 0; i < lim; ++i) {
    out[i] = den[i] > 1e-12 ? num[i] / den[i] : 0.0;
  }
  return out;
}

std::vector<uint8_t> lowpass_mask(const StftSpec& spec, double sample_rate_hz,
                                  double cutoff_hz) {
  const size_t bins = spec.window / 2 + 1;
  std::vector<uint8_t> keep(bins, 1);
  for (size_t b = 0; b < bins; ++b) {
    const double f = double(b) * sample_rate_hz / double(spec.window);
    if (f > cutoff_hz) keep[b] = 0;
  }
  return keep;
}

std::vector<double> stft_denoise(const std::vector<double>& wave,
                                 const StftSpec& spec,
                                 const std::vector<uint8_t>& keep) {
  Spectrogram sg = stft(wave, spec);
  if (keep.size() != sg.bins) {
    throw NumericError("mask has " + std::to_string(keep.size()) +
                       " bins, spectrogram has " + std::to_string(sg.bins));
  }
  for (size_t f = 0; f < sg.frames; ++f) {
    for (size_t b = 0; b < sg.bins; ++b) {
      if (!keep[b]) sg.at(f, b) = {0.0, 0.0};
    }
  }
  return istft(sg, wave.size());
}

EpochTensor assemble_epochs(const std::vector<RawTrial>& trials,
                            const EpochOptions& opts) {
  if (trials.empty()) throw NumericError("assemble_epochs with no trials");
  validate_filter(opts.filter);
  validate_stft(opts.stft);
  const std::vector<double> taps = fir_design(opts.filter);
  const std::vector<uint8_t> keep =
      lowpass_mask(opts.stft, opts.filter.sample_rate_hz,
                   opts.filter.passband_high_hz);
  const size_t N = trials.size();
  const size_t T = opts.target_length;
  std::vector<double> data(N * kNumChannels * T);
  std::vector<int> labels(N);
  for (size_t n = 0; n < N; ++n) {
    const RawTrial& trial = trials[n];
    labels[n] = trial.label;
    for (size_t c = 0; c < kNumChannels; ++c) {
      try {
        if (trial.channels[c].empty()) {
          throw NumericError(std::string("channel ") + kChannelNames[c] +
                             " is empty");
        }
        std::vector<double> wave = fix_length(trial.channels[c], T);
        wave = filtfilt(wave, taps);
        wave = stft_denoise(wave, opts.stft, keep);
        if (opts.zscore) {
          double mean = 0.0;
          for (double v : wave) mean += v;
          mean /= double(T);
          double var = 0.0;
          for (double v : wave) var += (v - mean) * (v - mean);
          var /= double(T);
          const double inv = 1.0 / std::sqrt(var + 1e-12);
          for (double& v : wave) v = (v - mean) * inv;
        }
        std::copy(wave.begin(), wave.end(),
                  data.begin() + static_cast<long>((n * kNumChannels + c) * T));
      } catch (const Error& e) {
        throw NumericError("trial " +
                           (trial.meta.synset.empty()
                                ? "#" + std::to_string(n)
                                : default_filename(trial.meta)) +
                           ": " + e.what());
      }
    }
  }
  EpochTensor out;
  out.data = Tensor({N, kNumChannels, T, 1}, std::move(data));
  out.labels = std::move(labels);
  out.sample_rate_hz = opts.filter.sample_rate_hz;
  return out;
}

}  // namespace eegtext
