// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melvq/codec.hpp"

#include <algorithm>
#include <string>

#include "melvq/error.hpp"
#include "melvq/parallel.hpp"

namespace melvq {

std::vector<FrameCode> quantize_mfcc(const MfccMatrix& mfccs, const CodebookSet& set,
                                     std::size_t beam_width) {
  set.validate();
  const int spectral_dim = set.vector ? set.vector->dim() : set.msvq->dim();
  if (mfccs.values.cols() != spectral_dim + 1)
    throw Error(ErrorKind::kInvalidArgument,
                "quantize_mfcc: " + std::to_string(mfccs.values.cols()) +
                    " coefficients per frame, codebooks expect " +
                    std::to_string(spectral_dim + 1));
  const auto frames = static_cast<std::size_t>(mfccs.values.rows());
  std::vector<FrameCode> codes(frames);
  constexpr std::size_t kChunk = 64;
  parallel_for((frames + kChunk - 1) / kChunk, [&](std::size_t chunk) {
    const std::size_t begin = chunk * kChunk;
    const std::size_t count = std::min(kChunk, frames - begin);
    const auto rows = mfccs.values.middleRows(static_cast<Eigen::Index>(begin),
                                              static_cast<Eigen::Index>(count));
    const Matrix spectral = rows.rightCols(spectral_dim);
    for (std::size_t i = 0; i < count; ++i)
      codes[begin + i].sq_index = sq_encode(rows(static_cast<Eigen::Index>(i), 0), set.scalar);
    if (set.mode == RateMode::kR1000) {
      const auto matches = vq_search_batch(spectral, *set.vector);
      for (std::size_t i = 0; i < count; ++i) codes[begin + i].vq_indices = {matches[i].index};
    } else {
      const auto matches = msvq_search_batch(spectral, *set.msvq, beam_width);
      for (std::size_t i = 0; i < count; ++i)
        codes[begin + i].vq_indices = {matches[i].indices[0], matches[i].indices[1]};
    }
  });
  return codes;
}

EncodedStream encode_audio(const AudioBuffer& audio, const CodebookSet& set,
                           std::size_t beam_width, const FrameConfig& cfg) {
  require_codec_rate(audio);
  const MfccMatrix mfccs = extract_mfcc(audio, cfg);
  const std::vector<FrameCode> codes = quantize_mfcc(mfccs, set, beam_width);
  return pack(codes, set.mode, set.content_hash);
}

std::size_t decoded_length(std::size_t frame_count, const FrameConfig& cfg) {
  if (frame_count == 0) return 0;
  return (frame_count - 1) * static_cast<std::size_t>(cfg.frame_shift) +
         static_cast<std::size_t>(cfg.frame_len);
}

}  // namespace melvq
