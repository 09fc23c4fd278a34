// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <vector>

namespace melvq {

inline constexpr int kCodecSampleRate = 16000;

/// Mono PCM signal, samples nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate_hz = kCodecSampleRate;

  std::size_t size() const noexcept { return samples.size(); }
  bool operator==(const AudioBuffer&) const = default;
};

/// Reads an integer PCM RIFF/WAVE file (16, 24 or 32 bit). Samples are
/// scaled by 2^-(bits-1) and multichannel input is averaged to mono.
AudioBuffer read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono. Samples are clamped to [-1, 1 - 2^-15] and
/// rounded to the nearest step.
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

/// Throws kSampleRate unless the buffer is at the codec rate.
void require_codec_rate(const AudioBuffer& audio);

}  // namespace melvq
