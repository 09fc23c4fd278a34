// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "melvq/analysis.hpp"
#include "melvq/bitstream.hpp"
#include "melvq/quantizer.hpp"

namespace melvq {

std::vector<FrameCode> quantize_mfcc(const MfccMatrix& mfccs, const CodebookSet& set,
                                     std::size_t beam_width = kDefaultBeamWidth);

/// Transmitter: 16 kHz audio -> MFCCs -> frame codes -> packed stream.
EncodedStream encode_audio(const AudioBuffer& audio, const CodebookSet& set,
                           std::size_t beam_width = kDefaultBeamWidth,
                           const FrameConfig& cfg = {});

/// Decoded length for a stream of `frame_count` frames: (M-1) R + L.
std::size_t decoded_length(std::size_t frame_count, const FrameConfig& cfg = {});

}  // namespace melvq
