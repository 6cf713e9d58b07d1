#ifndef EEGTEXT_DSP_HPP_
#define EEGTEXT_DSP_HPP_

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "eegtext/ingest.hpp"
#include "eegtext/tensor.hpp"

namespace eegtext {

struct FilterSpec {
  double sample_rate_hz = 128.0;
  double passband_low_hz = 0.5;
  double passband_high_hz = 50.0;
  size_t tap_count = 129;  // odd: linear-phase type I
};

struct StftSpec {
  size_t window = 32;  // periodic Hann
  size_t hop = 16;
};

// Truncates at the end or right-pads with zeros to exactly `target` samples.
std::vector<double> fix_length(const std::vector<double>& wave,
                               size_t target = 384);

// Windowed-sinc (Hamming) bandpass: difference of two DC-normalized lowpass
// kernels, then scaled to unit gain at the band center. Taps are exactly
// symmetric.
std::vector<double> fir_design(const FilterSpec& spec);

// |H(f)| of a tap set at frequency f.
double fir_response(const std::vector<double>& taps, double freq_hz,
                    double sample_rate_hz);

// Forward-then-reverse filtering over a reflection-padded copy: zero net
// phase, output length == input length. Input must have 2+ samples.
std::vector<double> filtfilt(const std::vector<double>& wave,
                             const std::vector<double>& taps);

struct Spectrogram {
  size_t frames = 0;
  size_t bins = 0;  // window/2 + 1
  size_t window = 0;
  size_t hop = 0;
  std::vector<std::complex<double>> c;  // frame-major: c[frame * bins + bin]

  std::complex<double>& at(size_t frame, size_t bin) {
    return c[frame * bins + bin];
  }
  const std::complex<double>& at(size_t frame, size_t bin) const {
    return c[frame * bins + bin];
  }
};

// frames = floor((len - window)/hop) + 1; each frame Hann-windowed then DFT'd
// (real input, bins 0..window/2).
Spectrogram stft(const std::vector<double>& wave, const StftSpec& spec);

// Weighted overlap-add with window-squared normalization; samples with no
// window coverage come back as 0. out_len trims/pads the reconstruction.
std::vector<double> istft(const Spectrogram& spec, size_t out_len);

// keep[bin] per rfft bin: 1 to pass, 0 to zero. Default mask for denoising.
std::vector<uint8_t> lowpass_mask(const StftSpec& spec, double sample_rate_hz,
                                  double cutoff_hz);

// stft -> zero masked bins -> istft; output length == input length.
std::vector<double> stft_denoise(const std::vector<double>& wave,
                                 const StftSpec& spec,
                                 const std::vector<uint8_t>& keep);

struct EpochOptions {
  FilterSpec filter;
  StftSpec stft;
  size_t target_length = 384;
  bool zscore = false;  // per-channel standardization after denoising
};

struct EpochTensor {
  Tensor data;              // (N, 5, T, 1)
  std::vector<int> labels;  // per trial
  double sample_rate_hz = 128.0;
};

// Per channel: fix_length -> filtfilt -> stft_denoise (-> optional z-score).
// Any per-trial failure is rethrown with the trial path prepended.
EpochTensor assemble_epochs(const std::vector<RawTrial>& trials,
                            const EpochOptions& opts);

}  // namespace eegtext

#endif  // EEGTEXT_DSP_HPP_
