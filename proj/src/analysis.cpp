// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melvq/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <string>

#include "melvq/error.hpp"
#include "melvq/fft.hpp"
#include "melvq/parallel.hpp"

namespace melvq {
namespace {

const Matrix& cached_dct(int size) {
  thread_local std::map<int, Matrix> cache;
  auto it = cache.find(size);
  if (it == cache.end()) it = cache.emplace(size, dct_matrix(size)).first;
  return it->second;
}

}  // namespace

void FrameConfig::validate() const {
  if (frame_len <= 0 || frame_shift <= 0 || fft_size <= 0 || num_mel <= 0 ||
      sample_rate <= 0)
    throw Error(ErrorKind::kInvalidArgument, "frame config: non-positive field");
  if (frame_len != fft_size)
    throw Error(ErrorKind::kInvalidArgument,
                "frame config: frame length must equal FFT size");
  if (frame_len % frame_shift != 0)
    throw Error(ErrorKind::kInvalidArgument,
                "frame config: frame shift must divide frame length");
  if (num_mel > bins())
    throw Error(ErrorKind::kInvalidArgument,
                "frame config: " + std::to_string(num_mel) +
                    " mel bands exceed " + std::to_string(bins()) + " bins");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> hamming_window(int length) {
  std::vector<double> w(static_cast<std::size_t>(length), 1.0);
  if (length == 1) return w;
  for (int n = 0; n < length; ++n)
    w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (length - 1));
  return w;
}

std::size_t frame_count(std::size_t num_samples, const FrameConfig& cfg) {
  const auto hop = static_cast<std::size_t>(cfg.frame_shift);
  return std::max<std::size_t>(1, (num_samples + hop - 1) / hop);
}

FrameMatrix frame_signal(const AudioBuffer& audio, const FrameConfig& cfg) {
  cfg.validate();
  if (audio.sample_rate_hz != cfg.sample_rate)
    throw Error(ErrorKind::kSampleRate,
                "frame_signal: sample rate " +
                    std::to_string(audio.sample_rate_hz) + " != " +
                    std::to_string(cfg.sample_rate));
  if (audio.samples.empty())
    throw Error(ErrorKind::kInvalidArgument, "frame_signal: empty signal");

  const std::size_t num_frames = frame_count(audio.size(), cfg);
  const std::size_t len = static_cast<std::size_t>(cfg.frame_len);
  const std::size_t hop = static_cast<std::size_t>(cfg.frame_shift);

  FrameMatrix out;
  out.window = hamming_window(cfg.frame_len);
  out.frames = Matrix::Zero(static_cast<Eigen::Index>(num_frames), cfg.frame_len);
  for (std::size_t m = 0; m < num_frames; ++m) {
    const std::size_t start = m * hop;
    const std::size_t end = std::min(audio.size(), start + len);
    for (std::size_t n = 0; start + n < end; ++n)
      out.frames(m, n) = audio.samples[start + n] * out.window[n];
  }
  return out;
}

MelFilterbank build_mel_filterbank(const FrameConfig& cfg) {
  if (cfg.num_mel < 1)
    throw Error(ErrorKind::kInvalidArgument, "mel filterbank: K < 1");
  if (cfg.num_mel > cfg.bins())
    throw Error(ErrorKind::kInvalidArgument,
                "mel filterbank: K exceeds N/2+1 bins");
  const int num_mel = cfg.num_mel;
  const double top = hz_to_mel(cfg.sample_rate / 2.0);

  MelFilterbank fb;
  fb.band_edges_hz.resize(num_mel + 2);
  for (int i = 0; i < num_mel + 2; ++i)
    fb.band_edges_hz[i] = mel_to_hz(top * i / (num_mel + 1));
  fb.band_edges_hz.back() = cfg.sample_rate / 2.0;

  fb.weights = Matrix::Zero(num_mel, cfg.bins());
  const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.fft_size;
  for (int k = 0; k < num_mel; ++k) {
    const double lo = fb.band_edges_hz[k];
    const double mid = fb.band_edges_hz[k + 1];
    const double hi = fb.band_edges_hz[k + 2];
    for (int b = 0; b < cfg.bins(); ++b) {
      const double f = b * bin_hz;
      const double rise = (f - lo) / (mid - lo);
      const double fall = (hi - f) / (hi - mid);
      fb.weights(k, b) = std::max(0.0, std::min(rise, fall));
    }
  }
  return fb;
}

MagnitudeSpectrogram magnitude_spectrogram(const FrameMatrix& frames,
                                           const FrameConfig& cfg) {
  cfg.validate();
  if (frames.frames.cols() != cfg.frame_len)
    throw Error(ErrorKind::kInvalidArgument,
                "magnitude_spectrogram: frame length mismatch");
  MagnitudeSpectrogram out;
  out.config = cfg;
  out.values = Matrix::Zero(frames.frames.rows(), cfg.bins());
  parallel_for(static_cast<std::size_t>(frames.frames.rows()), [&](std::size_t m) {
    RealFft& fft = thread_fft(static_cast<std::size_t>(cfg.fft_size));
    std::vector<std::complex<double>> spec(fft.bins());
    const auto row = static_cast<Eigen::Index>(m);
    fft.forward({frames.frames.row(row).data(),
                 static_cast<std::size_t>(cfg.frame_len)},
                spec);
    for (std::size_t k = 0; k < spec.size(); ++k)
      out.values(row, static_cast<Eigen::Index>(k)) = std::abs(spec[k]);
  });
  return out;
}

MelSpectrogram log_mel_from_magnitude(const MagnitudeSpectrogram& mag,
                                      const MelFilterbank& fb) {
  if (fb.weights.cols() != mag.values.cols() ||
      fb.weights.rows() != mag.config.num_mel)
    throw Error(ErrorKind::kInvalidArgument,
                "log_mel: filterbank shape does not match spectrogram");
  MelSpectrogram out;
  out.config = mag.config;
  out.values = mag.values * fb.weights.transpose();
  out.values = out.values.array().max(kLogFloor).log().matrix();
  return out;
}

MelSpectrogram log_mel_spectrogram(const FrameMatrix& frames,
                                   const MelFilterbank& fb,
                                   const FrameConfig& cfg) {
  return log_mel_from_magnitude(magnitude_spectrogram(frames, cfg), fb);
}

Matrix dct_matrix(int size) {
  Matrix basis(size, size);
  const double s0 = std::sqrt(1.0 / size);
  const double sk = std::sqrt(2.0 / size);
  for (int k = 0; k < size; ++k)
    for (int n = 0; n < size; ++n)
      basis(k, n) = (k == 0 ? s0 : sk) *
                    std::cos(std::numbers::pi * (n + 0.5) * k / size);
  return basis;
}

Vector dct(std::span<const double> values) {
  const int size = static_cast<int>(values.size());
  Eigen::Map<const Vector> in(values.data(), size);
  return cached_dct(size) * in;
}

Vector idct(std::span<const double> values) {
  const int size = static_cast<int>(values.size());
  Eigen::Map<const Vector> in(values.data(), size);
  return cached_dct(size).transpose() * in;
}

MfccMatrix mfcc(const MelSpectrogram& mel) {
  if (!mel.values.allFinite())
    throw Error(ErrorKind::kInvalidArgument, "mfcc: non-finite mel values");
  MfccMatrix out;
  out.config = mel.config;
  out.values = mel.values * cached_dct(static_cast<int>(mel.values.cols())).transpose();
  return out;
}

MfccMatrix extract_mfcc(const AudioBuffer& audio, const FrameConfig& cfg) {
  const FrameMatrix frames = frame_signal(audio, cfg);
  const MelFilterbank fb = build_mel_filterbank(cfg);
  return mfcc(log_mel_spectrogram(frames, fb, cfg));
}

}  // namespace melvq
