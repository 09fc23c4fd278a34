// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "melvq/signal_io.hpp"

namespace melvq {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kLogFloor = 1e-5;

/// Framing and filterbank parameters. Defaults are the codec's: 64 ms
/// Hamming frames at a 16 ms hop, 80 mel bands at 16 kHz.
struct FrameConfig {
  int frame_len = 1024;
  int frame_shift = 256;
  int fft_size = 1024;
  int num_mel = 80;
  int sample_rate = kCodecSampleRate;

  int bins() const noexcept { return fft_size / 2 + 1; }
  double frames_per_second() const noexcept {
    return static_cast<double>(sample_rate) / frame_shift;
  }
  /// Throws kInvalidArgument unless L = N, R | L and K <= N/2+1.
  void validate() const;

  bool operator==(const FrameConfig&) const = default;
};

struct FrameMatrix {
  Matrix frames;  // M x L, windowed
  std::vector<double> window;
};

struct MelFilterbank {
  Matrix weights;                     // K x (N/2+1)
  std::vector<double> band_edges_hz;  // K+2
};

struct MelSpectrogram {
  Matrix values;  // M x K, natural log of mel energies
  FrameConfig config;
};

struct MfccMatrix {
  Matrix values;  // M x K
  FrameConfig config;
};

struct MagnitudeSpectrogram {
  Matrix values;  // M x (N/2+1)
  FrameConfig config;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Symmetric Hamming window, 0.54 - 0.46 cos(2 pi n / (L-1)).
std::vector<double> hamming_window(int length);

/// max(1, ceil(num_samples / R)).
std::size_t frame_count(std::size_t num_samples, const FrameConfig& cfg);

FrameMatrix frame_signal(const AudioBuffer& audio, const FrameConfig& cfg);

MelFilterbank build_mel_filterbank(const FrameConfig& cfg);

/// |FFT| of every frame, bins 0..N/2.
MagnitudeSpectrogram magnitude_spectrogram(const FrameMatrix& frames,
                                           const FrameConfig& cfg);

/// log(max(M |F|, 1e-5)) per frame.
MelSpectrogram log_mel_from_magnitude(const MagnitudeSpectrogram& mag,
                                      const MelFilterbank& fb);

MelSpectrogram log_mel_spectrogram(const FrameMatrix& frames,
                                   const MelFilterbank& fb,
                                   const FrameConfig& cfg);

/// Orthonormal DCT-II basis, row k = basis function k.
Matrix dct_matrix(int size);

/// Orthonormal DCT-II of one vector.
Vector dct(std::span<const double> values);
/// Inverse of dct (DCT-III with orthonormal scaling).
Vector idct(std::span<const double> values);

MfccMatrix mfcc(const MelSpectrogram& mel);

/// Framing, log-mel and DCT in one call. Used by both the encoder and the
/// trainer so that features always match.
MfccMatrix extract_mfcc(const AudioBuffer& audio, const FrameConfig& cfg = {});

}  // namespace melvq
