// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "melvq/analysis.hpp"
#include "melvq/quantizer.hpp"

namespace melvq {

/// The .mvqc stream. On the wire:
///
///   "MVQC" | version (1) | rate mode (1) | frame count (u32 LE)
///   | codebook hash (u64 LE) | payload
///
/// The payload holds frame_count frames of 16 (1000 bit/s) or 32
/// (2000 bit/s) bits, fields MSB-first in the order SQ, VQ stage 1,
/// VQ stage 2, zero-padded to a byte boundary at the end of the stream.
struct EncodedStream {
  static constexpr std::size_t kHeaderSize = 18;
  static constexpr std::uint8_t kVersion = 0x01;

  RateMode mode = RateMode::kR1000;
  std::uint32_t frame_count = 0;
  std::uint64_t codebook_hash = 0;
  std::vector<std::uint8_t> payload;

  std::vector<std::uint8_t> to_bytes() const;
  /// Validates header and payload length.
  static EncodedStream from_bytes(std::span<const std::uint8_t> bytes);

  bool operator==(const EncodedStream&) const = default;
};

EncodedStream pack(std::span<const FrameCode> codes, RateMode mode,
                   std::uint64_t codebook_hash);

struct UnpackedStream {
  RateMode mode = RateMode::kR1000;
  std::uint64_t codebook_hash = 0;
  std::vector<FrameCode> codes;
};

std::vector<FrameCode> unpack(const EncodedStream& stream);
UnpackedStream unpack(std::span<const std::uint8_t> bytes);

/// Payload bits per frame times frames per second.
double stream_bitrate(const EncodedStream& stream, const FrameConfig& cfg = {});
double bitrate_for(int bits_per_frame, const FrameConfig& cfg = {});

void write_stream(const EncodedStream& stream, const std::filesystem::path& path);
EncodedStream read_stream(const std::filesystem::path& path);

}  // namespace melvq
