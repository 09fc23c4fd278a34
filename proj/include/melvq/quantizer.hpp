// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "melvq/analysis.hpp"

namespace melvq {

/// Wire value of the rate-mode byte.
enum class RateMode : std::uint8_t { kR1000 = 0, kR2000 = 1 };

/// Field widths of one frame on the wire, energy index first.
struct BitAllocation {
  int sq_bits;
  std::vector<int> vq_bits;  // one entry per VQ stage

  int frame_bits() const noexcept {
    int total = sq_bits;
    for (int b : vq_bits) total += b;
    return total;
  }
};

/// 4-bit SQ + 12-bit VQ, or 6-bit SQ + (13,13)-bit MSVQ.
BitAllocation wire_allocation(RateMode mode);
int bit_rate(RateMode mode);
RateMode rate_mode_from_bitrate(int bits_per_second);
std::optional<RateMode> rate_mode_from_byte(std::uint8_t value);

inline constexpr int kMfccDim = 80;
inline constexpr int kSpectralDim = kMfccDim - 1;
inline constexpr int kDefaultBeamWidth = 8;

class ScalarCodebook {
 public:
  ScalarCodebook() = default;
  /// levels must be strictly increasing with a power-of-two count.
  explicit ScalarCodebook(std::vector<double> levels);

  int bits() const noexcept { return bits_; }
  std::size_t size() const noexcept { return levels_.size(); }
  const std::vector<double>& levels() const noexcept { return levels_; }

  bool operator==(const ScalarCodebook&) const = default;

 private:
  std::vector<double> levels_;
  int bits_ = 0;
};

class VectorCodebook {
 public:
  VectorCodebook() = default;
  /// codewords must have a power-of-two row count and finite entries.
  explicit VectorCodebook(Matrix codewords);

  int bits() const noexcept { return bits_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(codewords_.rows()); }
  int dim() const noexcept { return static_cast<int>(codewords_.cols()); }
  const Matrix& codewords() const noexcept { return codewords_; }
  std::span<const double> codeword(std::size_t index) const;

  bool operator==(const VectorCodebook& other) const {
    return bits_ == other.bits_ && codewords_ == other.codewords_;
  }

 private:
  Matrix codewords_;
  int bits_ = 0;
};

class MsvqCodebook {
 public:
  MsvqCodebook() = default;
  /// Two or more stages of equal dimension.
  explicit MsvqCodebook(std::vector<VectorCodebook> stages);

  const std::vector<VectorCodebook>& stages() const noexcept { return stages_; }
  int dim() const noexcept { return stages_.empty() ? 0 : stages_.front().dim(); }

  bool operator==(const MsvqCodebook&) const = default;

 private:
  std::vector<VectorCodebook> stages_;
};

/// Scalar codebook for z_0 plus either a VQ (1000 bit/s) or an MSVQ
/// (2000 bit/s) for z_1..z_79.
struct CodebookSet {
  RateMode mode = RateMode::kR1000;
  ScalarCodebook scalar;
  std::optional<VectorCodebook> vector;
  std::optional<MsvqCodebook> msvq;
  std::uint64_t content_hash = 0;

  /// Checks the mode/codebook pairing, dimensions, and that no codebook is
  /// wider than its wire field.
  void validate() const;
  BitAllocation allocation() const;

  bool operator==(const CodebookSet&) const = default;
};

/// Quantizer indices of one frame: the energy index, then one index per
/// VQ stage.
struct FrameCode {
  std::uint32_t sq_index = 0;
  std::vector<std::uint32_t> vq_indices;

  bool operator==(const FrameCode&) const = default;
};

/// Squared Euclidean distance.
double squared_distance(std::span<const double> a, std::span<const double> b);

std::uint32_t sq_encode(double value, const ScalarCodebook& cb);
double sq_decode(std::uint32_t index, const ScalarCodebook& cb);

struct VqMatch {
  std::uint32_t index = 0;
  double distance = 0.0;
};

/// Nearest codeword by squared distance, ties to the lower index.
VqMatch vq_search(std::span<const double> vec, const VectorCodebook& cb);
std::uint32_t vq_encode(std::span<const double> vec, const VectorCodebook& cb);
std::span<const double> vq_decode(std::uint32_t index, const VectorCodebook& cb);

struct MsvqResult {
  std::array<std::uint32_t, 2> indices{};
  double distortion = 0.0;
};

/// M-best tree search over a two-stage MSVQ. The beam_width lowest-distortion
/// stage-1 codewords are kept; stage 2 is searched on each residual and the
/// pair with the smallest final residual wins.
MsvqResult msvq_search(std::span<const double> vec, const MsvqCodebook& cb,
                       std::size_t beam_width);
std::array<std::uint32_t, 2> msvq_encode(std::span<const double> vec,
                                         const MsvqCodebook& cb,
                                         std::size_t beam_width = kDefaultBeamWidth);
Vector msvq_decode(std::span<const std::uint32_t> indices, const MsvqCodebook& cb);

/// Row-wise vq_search / msvq_search over a matrix of vectors. Results are
/// identical to the one-at-a-time searches, ties included; the batch form
/// scores codewords with matrix products and only re-checks near winners.
std::vector<VqMatch> vq_search_batch(const Matrix& vecs, const VectorCodebook& cb);
std::vector<MsvqResult> msvq_search_batch(const Matrix& vecs, const MsvqCodebook& cb,
                                          std::size_t beam_width);

FrameCode quantize_frame(std::span<const double> z, const CodebookSet& set,
                         std::size_t beam_width = kDefaultBeamWidth);
Vector dequantize_frame(const FrameCode& code, const CodebookSet& set);

/// Throws unless every index fits both the codebook and the wire field.
void check_frame_code(const FrameCode& code, const CodebookSet& set);

}  // namespace melvq
