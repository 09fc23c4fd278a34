// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "melvq/analysis.hpp"
#include "melvq/bitstream.hpp"
#include "melvq/quantizer.hpp"

namespace melvq {

using ComplexMatrix =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kDefaultGriffinLimIterations = 60;
inline constexpr double kOlaFloor = 1e-8;

/// Inverse of the analysis DCT, mapping a (dequantized) MFCC vector back
/// to log mel energies.
Vector idct_mel(std::span<const double> z_hat);

/// Moore-Penrose pseudo-inverse of the filterbank matrix, (N/2+1) x K.
/// Throws kInvalidArgument when the filterbank is numerically rank
/// deficient.
Matrix mel_pseudo_inverse(const MelFilterbank& fb);

/// exp of the log mel energies mapped through the pseudo-inverse, negative
/// bins clamped to zero.
MagnitudeSpectrogram mel_to_linear(const MelSpectrogram& mel, const MelFilterbank& fb);

/// Complex STFT of `num_frames` frames starting at sample 0; samples past
/// the end of the signal are zero.
ComplexMatrix stft(std::span<const double> signal, const FrameConfig& cfg,
                   std::size_t num_frames);

/// Weighted overlap-add: every frame is multiplied by `window`, summed at
/// hops of `hop`, and divided by the summed squared window (floored at
/// 1e-8). Output length is (M-1)*hop + L.
std::vector<double> overlap_add(const Matrix& frames, std::span<const double> window,
                                int hop);

/// Least-squares inverse STFT via inverse DFT and overlap_add.
std::vector<double> istft(const ComplexMatrix& spec, const FrameConfig& cfg);

struct GriffinLimResult {
  AudioBuffer audio;
  /// ||STFT(x_t)| - mag| over the full two-sided spectrum, one entry per
  /// iteration.
  std::vector<double> consistency_error;
};

/// Griffin-Lim phase recovery from an all-zero initial phase.
GriffinLimResult griffin_lim(const MagnitudeSpectrogram& mag, int iterations);

/// MELSPEC file: "MELS" | version (1) | M | K | f_s | L | R (u32 LE each)
/// | M*K float32 LE values, row-major.
inline constexpr std::size_t kMelHeaderSize = 25;
void export_mel(const MelSpectrogram& mel, const std::filesystem::path& path);
MelSpectrogram import_mel(const std::filesystem::path& path);

struct DecodeResult {
  AudioBuffer audio;           // clamped to [-1, 1]
  MelSpectrogram mel;          // reconstructed log mel-spectrogram
  std::vector<double> consistency_error;
};

/// Log-mel to waveform: mel_to_linear then Griffin-Lim.
DecodeResult synthesize(const MelSpectrogram& mel, int gl_iterations);

/// Full receiver: dequantize, IDCT, mel inversion, Griffin-Lim.
DecodeResult decode_stream(const EncodedStream& stream, const CodebookSet& set,
                           int gl_iterations = kDefaultGriffinLimIterations,
                           const FrameConfig& cfg = {});

}  // namespace melvq
