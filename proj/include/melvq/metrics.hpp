// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "melvq/analysis.hpp"
#include "melvq/signal_io.hpp"

namespace melvq {

/// Windowed-sinc polyphase rational resampler (Kaiser window, 64 taps per
/// phase). Output length is ceil(len * up / down).
std::vector<double> resample(std::span<const double> signal, int up, int down);

/// Short-time objective intelligibility in [0, 1]. Both signals are
/// resampled to 10 kHz and truncated to the shorter one. Throws kTooShort
/// when fewer than 30 non-silent frames remain.
double stoi(const AudioBuffer& reference, const AudioBuffer& degraded);

/// Mel-cepstral distortion in dB over coefficients 1..K-1, averaged over
/// frames after truncation to the shorter sequence.
double mcd(const MfccMatrix& reference, const MfccMatrix& degraded);

/// Log-spectral distance in dB, averaged over frames.
double lsd(const MagnitudeSpectrogram& reference, const MagnitudeSpectrogram& degraded);

inline constexpr double kSegSnrMin = -10.0;
inline constexpr double kSegSnrMax = 35.0;

/// Segmental SNR over non-overlapping segments. Segments more than 40 dB
/// below the loudest reference segment are skipped; each segment value is
/// clamped to [-10, 35] dB.
double seg_snr(const AudioBuffer& reference, const AudioBuffer& degraded, int seg_len = 256);

struct QualityReport {
  std::string id;
  std::optional<double> stoi;
  double mcd_db = 0.0;
  double lsd_db = 0.0;
  double seg_snr_db = 0.0;
};

/// All metrics for one reference/degraded pair.
QualityReport evaluate_pair(const AudioBuffer& reference, const AudioBuffer& degraded,
                            std::string id, const FrameConfig& cfg = {});

/// Mean of every metric; stoi is averaged over the reports that have one.
QualityReport corpus_mean(std::span<const QualityReport> reports);

/// One JSON object per line. The footer line carries "mean": true and a
/// "count" field.
std::string format_report_line(const QualityReport& report);
std::string format_mean_footer(std::span<const QualityReport> reports);

}  // namespace melvq
