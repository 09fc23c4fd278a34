// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "melvq/quantizer.hpp"

namespace melvq {

/// Distortion history of a training run. Each Lloyd run (one per LBG split
/// level, one per MSVQ stage level) is a separate round; every round is
/// non-increasing. Distortion is the mean squared error per vector.
struct TrainReport {
  std::vector<std::vector<double>> rounds;
  std::size_t iterations = 0;
  double final_distortion = 0.0;

  /// The last Lloyd run, i.e. the one that produced the final codebook.
  const std::vector<double>& distortion() const { return rounds.back(); }
};

struct LloydOptions {
  double relative_tolerance = 1e-4;
  int max_iterations = 50;
  double split_epsilon = 0.01;
};

/// Lloyd-Max design of a 2^bits-level scalar quantizer, initialized at the
/// (i + 0.5) / 2^bits sample quantiles.
std::pair<ScalarCodebook, TrainReport> train_scalar(std::span<const double> samples,
                                                    int bits,
                                                    const LloydOptions& opts = {});

/// LBG design by binary splitting from the global centroid.
std::pair<VectorCodebook, TrainReport> train_lbg(const Matrix& vectors, int bits,
                                                 const LloydOptions& opts = {});

/// Sequential two-stage design: stage 2 is trained on the residuals of a
/// greedy stage-1 encode.
std::pair<MsvqCodebook, TrainReport> train_msvq(const Matrix& vectors,
                                                std::array<int, 2> bits,
                                                const LloydOptions& opts = {});

/// Bit widths of a codebook set; Table 1 values unless overridden.
struct TrainConfig {
  RateMode mode = RateMode::kR1000;
  int sq_bits = 4;
  int vq_bits = 12;
  std::array<int, 2> stage_bits{13, 13};

  static TrainConfig for_mode(RateMode mode);
  std::size_t min_vectors() const;
};

struct TrainedCodebooks {
  CodebookSet set;
  TrainReport scalar_report;
  TrainReport vector_report;
};

/// Trains the scalar codebook on column 0 and the VQ/MSVQ on columns 1..
/// of an MFCC matrix (T x 80). Codebook values are rounded to float32, the
/// precision of the codebook file, and the content hash is filled in.
TrainedCodebooks train_codebooks(const Matrix& mfccs, const TrainConfig& cfg,
                                 const LloydOptions& opts = {});

/// Training vectors pooled from a list of WAV files.
struct TrainingCorpus {
  Matrix vectors;  // T x K MFCC frames
  std::vector<std::string> source_manifest;
};

TrainingCorpus build_corpus(const std::vector<std::filesystem::path>& wavs,
                            const FrameConfig& cfg = {});

/// Reads a manifest: one path per line, blank lines and '#' comments
/// ignored. Relative paths resolve against the manifest's directory.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path);

/// MVQB codebook file encoding.
std::vector<std::uint8_t> serialize_codebooks(const CodebookSet& set);
CodebookSet parse_codebooks(std::span<const std::uint8_t> bytes,
                            std::optional<RateMode> expected = std::nullopt);

/// FNV-1a of the serialized set, excluding the trailing hash field.
std::uint64_t codebook_hash(const CodebookSet& set);

void save_codebooks(const CodebookSet& set, const std::filesystem::path& path);
CodebookSet load_codebooks(const std::filesystem::path& path,
                           std::optional<RateMode> expected = std::nullopt);

}  // namespace melvq
