#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "uverify/audio.hpp"
#include "uverify/common.hpp"
#include "uverify/features.hpp"

namespace uverify {

// MFCC pipeline parameters. The frame count for a signal of length L samples
// is 1 + floor((L - frame_samples) / shift_samples).
struct FrontendConfig {
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  double pre_emphasis = 0.97;
  std::size_t num_mel_filters = 26;
  std::size_t num_ceps = 13;
  std::size_t fft_size = 0;  // 0 = smallest power of two >= frame samples
  std::size_t delta_window = 2;
  double log_floor = std::numeric_limits<double>::min();

  void validate() const {
    if (frame_length_ms <= 0.0 || frame_shift_ms <= 0.0)
      throw ValidationError("frame length and shift must be positive");
    if (frame_shift_ms > frame_length_ms)
      throw ValidationError("frame shift must not exceed frame length");
    if (num_mel_filters == 0) throw ValidationError("need at least one mel filter");
    if (num_ceps == 0 || num_ceps > num_mel_filters)
      throw ValidationError("num_ceps must be in [1, num_mel_filters]");
    if (pre_emphasis < 0.0 || pre_emphasis >= 1.0)
      throw ValidationError("pre-emphasis coefficient must be in [0, 1)");
    if (delta_window == 0) throw ValidationError("delta window must be >= 1");
    if (log_floor <= 0.0) throw ValidationError("log floor must be positive");
  }

  std::size_t frame_samples(std::size_t sample_rate) const {
    return static_cast<std::size_t>(std::llround(frame_length_ms * sample_rate / 1000.0));
  }
  std::size_t shift_samples(std::size_t sample_rate) const {
    return static_cast<std::size_t>(std::llround(frame_shift_ms * sample_rate / 1000.0));
  }
  std::size_t effective_fft_size(std::size_t sample_rate) const {
    std::size_t n = frame_samples(sample_rate);
    std::size_t fft = fft_size ? fft_size : std::bit_ceil(n);
    if (!std::has_single_bit(fft) || fft < n)
      throw ValidationError("fft_size must be a power of two >= frame samples");
    return fft;
  }

  // Identifies the full featurization recipe; models remember it so that a
  // model is never scored against features produced differently.
  std::string fingerprint(std::size_t sample_rate) const {
    std::ostringstream os;
    os << "mfcc:sr=" << sample_rate << ",fl=" << format_double(frame_length_ms)
       << ",fs=" << format_double(frame_shift_ms) << ",pe=" << format_double(pre_emphasis)
       << ",nf=" << num_mel_filters << ",nc=" << num_ceps
       << ",fft=" << effective_fft_size(sample_rate) << ",dw=" << delta_window;
    return os.str();
  }
};

namespace detail {

// In-place iterative radix-2 FFT, decimation in time.
inline void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * 3.14159265358979323846 / static_cast<double>(len);
    double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::size_t a = i + k, b = i + k + len / 2;
        double tr = re[b] * cr - im[b] * ci;
        double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filters on the mel scale, unit peak, spanning [0, Nyquist].
// Returns num_filters x (fft/2 + 1) weights.
inline std::vector<std::vector<double>> mel_filterbank(std::size_t num_filters,
                                                       std::size_t fft_size,
                                                       std::size_t sample_rate) {
  const std::size_t bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(num_filters + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(num_filters + 1));
  std::vector<std::vector<double>> fb(num_filters, std::vector<double>(bins, 0.0));
  for (std::size_t m = 0; m < num_filters; ++m) {
    double lo = edges[m], c = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      double w = 0.0;
      if (f > lo && f < c)
        w = (f - lo) / (c - lo);
      else if (f >= c && f < hi)
        w = (hi - f) / (hi - c);
      fb[m][k] = w;
    }
  }
  return fb;
}

// Center frequency (Hz) of mel filter m, 0-based.
inline double mel_filter_center(std::size_t m, std::size_t num_filters, std::size_t sample_rate) {
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  return mel_to_hz(mel_lo +
                   (mel_hi - mel_lo) * static_cast<double>(m + 1) / static_cast<double>(num_filters + 1));
}

// Orthonormal DCT-II of x, truncated to the first n_out coefficients.
inline std::vector<double> dct2_ortho(std::span<const double> x, std::size_t n_out) {
  const std::size_t m = x.size();
  std::vector<double> out(n_out, 0.0);
  const double pi = 3.14159265358979323846;
  for (std::size_t j = 0; j < n_out; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      acc += x[i] * std::cos(pi * static_cast<double>(j) * (2.0 * static_cast<double>(i) + 1.0) /
                             (2.0 * static_cast<double>(m)));
    double scale = (j == 0) ? std::sqrt(1.0 / static_cast<double>(m))
                            : std::sqrt(2.0 / static_cast<double>(m));
    out[j] = scale * acc;
  }
  return out;
}

}  // namespace detail

// Log mel filterbank energies, T x num_mel_filters. Exposed separately from
// compute_mfcc so the filterbank response is directly observable.
inline FeatureMatrix compute_fbank(const Waveform& w, const FrontendConfig& cfg) {
  cfg.validate();
  if (w.sample_rate == 0) throw ValidationError("waveform sample rate is zero");
  if (!all_finite(w.samples)) throw ValidationError("waveform contains non-finite samples");
  const std::size_t frame_n = cfg.frame_samples(w.sample_rate);
  const std::size_t shift_n = cfg.shift_samples(w.sample_rate);
  if (frame_n == 0 || shift_n == 0) throw ValidationError("frame or shift rounds to zero samples");
  if (w.samples.size() < frame_n)
    throw ValidationError("waveform shorter than one frame (" +
                          std::to_string(w.samples.size()) + " < " + std::to_string(frame_n) +
                          " samples)");
  const std::size_t fft_n = cfg.effective_fft_size(w.sample_rate);
  const std::size_t T = 1 + (w.samples.size() - frame_n) / shift_n;
  const auto fb = detail::mel_filterbank(cfg.num_mel_filters, fft_n, w.sample_rate);
  const std::size_t bins = fft_n / 2 + 1;

  std::vector<double> window(frame_n);
  for (std::size_t i = 0; i < frame_n; ++i)
    window[i] = frame_n > 1 ? 0.54 - 0.46 * std::cos(2.0 * 3.14159265358979323846 *
                                                     static_cast<double>(i) /
                                                     static_cast<double>(frame_n - 1))
                            : 1.0;

  FeatureMatrix out;
  out.num_frames = T;
  out.dim = cfg.num_mel_filters;
  out.frame_shift_ms = cfg.frame_shift_ms;
  out.values.resize(T * out.dim);

  std::vector<double> re(fft_n), im(fft_n), power(bins);
  for (std::size_t t = 0; t < T; ++t) {
    const double* src = w.samples.data() + t * shift_n;
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    // pre-emphasis within the frame, then Hamming window
    for (std::size_t i = frame_n; i-- > 1;) re[i] = src[i] - cfg.pre_emphasis * src[i - 1];
    re[0] = src[0] * (1.0 - cfg.pre_emphasis);
    for (std::size_t i = 0; i < frame_n; ++i) re[i] *= window[i];
    detail::fft_radix2(re, im);
    for (std::size_t k = 0; k < bins; ++k) power[k] = re[k] * re[k] + im[k] * im[k];
    double* row = out.values.data() + t * out.dim;
    for (std::size_t m = 0; m < cfg.num_mel_filters; ++m) {
      double e = 0.0;
      const auto& weights = fb[m];
      for (std::size_t k = 0; k < bins; ++k) e += weights[k] * power[k];
      row[m] = std::log(std::max(e, cfg.log_floor));
    }
  }
  return out;
}

// 13-dimensional MFCCs: DCT-II of the log mel energies, coefficients 0..12.
inline FeatureMatrix compute_mfcc(const Waveform& w, const FrontendConfig& cfg) {
  FeatureMatrix fbank = compute_fbank(w, cfg);
  FeatureMatrix out;
  out.num_frames = fbank.num_frames;
  out.dim = cfg.num_ceps;
  out.frame_shift_ms = cfg.frame_shift_ms;
  out.values.resize(out.num_frames * out.dim);
  for (std::size_t t = 0; t < fbank.num_frames; ++t) {
    auto ceps = detail::dct2_ortho(fbank.frame(t), cfg.num_ceps);
    std::copy(ceps.begin(), ceps.end(), out.values.begin() + t * out.dim);
  }
  return out;
}

// Regression deltas with edge frames clamped:
//   d_t = sum_{n=1..W} n * (c_{t+n} - c_{t-n}) / (2 * sum_{n=1..W} n^2)
// Delta-deltas apply the same operator to the deltas. Output is [c, d, dd].
inline FeatureMatrix append_deltas(const FeatureMatrix& feat, std::size_t window,
                                   std::size_t expected_dim = 13) {
  if (window == 0) throw ValidationError("delta window must be >= 1");
  if (expected_dim != 0 && feat.dim != expected_dim)
    throw ValidationError("append_deltas: input has dimension " + std::to_string(feat.dim) +
                          ", expected " + std::to_string(expected_dim));
  feat.validate();
  const std::size_t T = feat.num_frames, D = feat.dim;
  double denom = 0.0;
  for (std::size_t n = 1; n <= window; ++n) denom += static_cast<double>(n * n);
  denom *= 2.0;

  auto regress = [&](const std::vector<double>& src, std::vector<double>& dst) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t d = 0; d < D; ++d) {
        double acc = 0.0;
        for (std::size_t n = 1; n <= window; ++n) {
          std::size_t fwd = std::min(t + n, T - 1);
          std::size_t bwd = t >= n ? t - n : 0;
          acc += static_cast<double>(n) * (src[fwd * D + d] - src[bwd * D + d]);
        }
        dst[t * D + d] = acc / denom;
      }
    }
  };

  std::vector<double> delta(T * D), delta2(T * D);
  regress(feat.values, delta);
  regress(delta, delta2);

  FeatureMatrix out;
  out.num_frames = T;
  out.dim = 3 * D;
  out.frame_shift_ms = feat.frame_shift_ms;
  out.values.resize(T * out.dim);
  for (std::size_t t = 0; t < T; ++t) {
    double* row = out.values.data() + t * out.dim;
    std::copy(feat.values.begin() + t * D, feat.values.begin() + (t + 1) * D, row);
    std::copy(delta.begin() + t * D, delta.begin() + (t + 1) * D, row + D);
    std::copy(delta2.begin() + t * D, delta2.begin() + (t + 1) * D, row + 2 * D);
  }
  return out;
}

// Full frontend: 13 MFCCs plus deltas and delta-deltas, D = 39.
inline FeatureMatrix compute_features(const Waveform& w, const FrontendConfig& cfg) {
  return append_deltas(compute_mfcc(w, cfg), cfg.delta_window, cfg.num_ceps);
}

}  // namespace uverify
