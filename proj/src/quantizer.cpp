// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melvq/quantizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "melvq/error.hpp"

namespace melvq {
namespace {

int log2_exact(std::size_t n, const char* what) {
  if (n == 0 || !std::has_single_bit(n))
    throw Error(ErrorKind::kInvalidArgument,
                std::string(what) + ": size " + std::to_string(n) +
                    " is not a power of two");
  return std::countr_zero(n);
}

// Squared distance accumulated in four lanes, abandoning the sum once it
// reaches bound. Lanes only grow, so a partial sum >= bound implies the full
// sum is too; the full sum is combined in the same order as
// squared_distance().
double bounded_distance(const double* a, const double* b, std::size_t n,
                        double bound) {
  double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
  std::size_t i = 0;
  while (i + 16 <= n) {
    for (std::size_t end = i + 16; i < end; i += 4) {
      const double d0 = a[i] - b[i], d1 = a[i + 1] - b[i + 1];
      const double d2 = a[i + 2] - b[i + 2], d3 = a[i + 3] - b[i + 3];
      l0 += d0 * d0;
      l1 += d1 * d1;
      l2 += d2 * d2;
      l3 += d3 * d3;
    }
    if ((l0 + l1) + (l2 + l3) >= bound) return (l0 + l1) + (l2 + l3);
  }
  for (; i + 4 <= n; i += 4) {
    const double d0 = a[i] - b[i], d1 = a[i + 1] - b[i + 1];
    const double d2 = a[i + 2] - b[i + 2], d3 = a[i + 3] - b[i + 3];
    l0 += d0 * d0;
    l1 += d1 * d1;
    l2 += d2 * d2;
    l3 += d3 * d3;
  }
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    l0 += d * d;
  }
  return (l0 + l1) + (l2 + l3);
}

struct Candidate {
  double distance;
  std::uint32_t index;
};

// Nearest codeword with ties to the lower index.
Candidate nearest(const double* vec, const VectorCodebook& cb) {
  const auto dim = static_cast<std::size_t>(cb.dim());
  const double* base = cb.codewords().data();
  Candidate best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t j = 0; j < cb.size(); ++j) {
    const double d = bounded_distance(vec, base + j * dim, dim, best.distance);
    if (d < best.distance) best = {d, static_cast<std::uint32_t>(j)};
  }
  return best;
}

// Candidate shortlists for the batched searches. Distances are estimated as
// |x|^2 - 2 x.c + |c|^2 with one matrix product per tile of codewords; the
// rounding error of that estimate is below 1e-13 (|x| + |c|)^2 at the
// dimensions used here, and the margin leaves four orders of magnitude spare.
// A codeword can only be among the `width` nearest if its estimate is within
// two margins of the width-th smallest estimate; everything else is strictly
// farther than the true width-th distance.
constexpr double kEstimateMargin = 1e-9;
constexpr Eigen::Index kBlockRows = 64;
constexpr Eigen::Index kTileWords = 1024;

class Shortlist {
 public:
  Shortlist(std::size_t width, double margin) : width_(width), margin_(margin) {
    smallest_.reserve(width);
  }

  void offer(double estimate, std::uint32_t index) {
    // Past the cut nothing changes: the heap top is below the cut.
    if (estimate > cut_) return;
    if (smallest_.size() < width_) {
      smallest_.push_back(estimate);
      std::push_heap(smallest_.begin(), smallest_.end());
      if (smallest_.size() == width_) cut_ = smallest_.front() + 2.0 * margin_;
    } else if (estimate < smallest_.front()) {
      std::pop_heap(smallest_.begin(), smallest_.end());
      smallest_.back() = estimate;
      std::push_heap(smallest_.begin(), smallest_.end());
      cut_ = smallest_.front() + 2.0 * margin_;
    }
    // The cut only tightens, so anything that passes the final cut passed
    // it here too.
    if (estimate <= cut_) {
      entries_.push_back({estimate, index});
      if (entries_.size() > 4 * width_ + 64) prune();
    }
  }

  /// Ascending codeword indices that may be among the `width` nearest.
  std::vector<std::uint32_t> indices() {
    prune();
    std::vector<std::uint32_t> out;
    out.reserve(entries_.size());
    for (const Candidate& c : entries_) out.push_back(c.index);
    return out;
  }

 private:
  void prune() {
    const double c = cut_;
    std::erase_if(entries_, [c](const Candidate& e) { return !(e.distance <= c); });
  }

  std::size_t width_;
  double margin_;
  double cut_ = std::numeric_limits<double>::infinity();
  std::vector<double> smallest_;  // max-heap of the `width` smallest estimates
  std::vector<Candidate> entries_;
};

std::vector<std::vector<std::uint32_t>> shortlists(const Matrix& x, const VectorCodebook& cb,
                                                   std::size_t width) {
  const Matrix& c = cb.codewords();
  const Vector c_norm = c.rowwise().squaredNorm();
  const double c_max = std::sqrt(c_norm.maxCoeff());
  const Vector x_norm = x.rowwise().squaredNorm();
  width = std::min(width, cb.size());

  std::vector<std::vector<std::uint32_t>> out(static_cast<std::size_t>(x.rows()));
  Matrix products;
  for (Eigen::Index start = 0; start < x.rows(); start += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, x.rows() - start);
    std::vector<Shortlist> lists;
    lists.reserve(static_cast<std::size_t>(rows));
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double scale = std::sqrt(x_norm[start + r]) + c_max;
      lists.emplace_back(width, kEstimateMargin * scale * scale);
    }
    for (Eigen::Index tile = 0; tile < c.rows(); tile += kTileWords) {
      const Eigen::Index words = std::min(kTileWords, c.rows() - tile);
      products.noalias() = x.middleRows(start, rows) * c.middleRows(tile, words).transpose();
      for (Eigen::Index r = 0; r < rows; ++r) {
        Shortlist& list = lists[static_cast<std::size_t>(r)];
        const double xn = x_norm[start + r];
        for (Eigen::Index k = 0; k < words; ++k)
          list.offer(xn - 2.0 * products(r, k) + c_norm[tile + k],
                     static_cast<std::uint32_t>(tile + k));
      }
    }
    for (Eigen::Index r = 0; r < rows; ++r)
      out[static_cast<std::size_t>(start + r)] = lists[static_cast<std::size_t>(r)].indices();
  }
  return out;
}

// nearest() over a shortlist; visiting the survivors in ascending order keeps
// its tie-breaking.
Candidate nearest_of(const double* vec, const VectorCodebook& cb,
                     const std::vector<std::uint32_t>& indices) {
  const auto dim = static_cast<std::size_t>(cb.dim());
  const double* base = cb.codewords().data();
  Candidate best{std::numeric_limits<double>::infinity(), 0};
  for (std::uint32_t j : indices) {
    const double d = bounded_distance(vec, base + j * dim, dim, best.distance);
    if (d < best.distance) best = {d, j};
  }
  return best;
}

void require_dim(std::size_t got, int want, const char* what) {
  if (got != static_cast<std::size_t>(want))
    throw Error(ErrorKind::kInvalidArgument,
                std::string(what) + ": dimension " + std::to_string(got) +
                    " != codebook dimension " + std::to_string(want));
}

void require_index(std::uint32_t index, std::size_t size, const char* what) {
  if (index >= size)
    throw Error(ErrorKind::kInvalidArgument,
                std::string(what) + ": index " + std::to_string(index) +
                    " out of range [0, " + std::to_string(size) + ")");
}

}  // namespace

BitAllocation wire_allocation(RateMode mode) {
  switch (mode) {
    case RateMode::kR1000:
      return {4, {12}};
    case RateMode::kR2000:
      return {6, {13, 13}};
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown rate mode");
}

int bit_rate(RateMode mode) { return mode == RateMode::kR1000 ? 1000 : 2000; }

RateMode rate_mode_from_bitrate(int bits_per_second) {
  if (bits_per_second == 1000) return RateMode::kR1000;
  if (bits_per_second == 2000) return RateMode::kR2000;
  throw Error(ErrorKind::kInvalidArgument,
              "rate must be 1000 or 2000, got " + std::to_string(bits_per_second));
}

std::optional<RateMode> rate_mode_from_byte(std::uint8_t value) {
  if (value == 0) return RateMode::kR1000;
  if (value == 1) return RateMode::kR2000;
  return std::nullopt;
}

ScalarCodebook::ScalarCodebook(std::vector<double> levels)
    : levels_(std::move(levels)) {
  bits_ = log2_exact(levels_.size(), "scalar codebook");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (!std::isfinite(levels_[i]))
      throw Error(ErrorKind::kInvalidArgument, "scalar codebook: non-finite level");
    if (i > 0 && !(levels_[i] > levels_[i - 1]))
      throw Error(ErrorKind::kInvalidArgument,
                  "scalar codebook: levels not strictly increasing");
  }
}

VectorCodebook::VectorCodebook(Matrix codewords) : codewords_(std::move(codewords)) {
  bits_ = log2_exact(static_cast<std::size_t>(codewords_.rows()), "vector codebook");
  if (codewords_.cols() < 1)
    throw Error(ErrorKind::kInvalidArgument, "vector codebook: zero dimension");
  if (!codewords_.allFinite())
    throw Error(ErrorKind::kInvalidArgument, "vector codebook: non-finite codeword");
}

std::span<const double> VectorCodebook::codeword(std::size_t index) const {
  const auto dim = static_cast<std::size_t>(codewords_.cols());
  return {codewords_.data() + index * dim, dim};
}

MsvqCodebook::MsvqCodebook(std::vector<VectorCodebook> stages)
    : stages_(std::move(stages)) {
  if (stages_.size() != 2)
    throw Error(ErrorKind::kInvalidArgument, "MSVQ codebook needs exactly 2 stages");
  if (stages_[0].dim() != stages_[1].dim())
    throw Error(ErrorKind::kInvalidArgument, "MSVQ stages differ in dimension");
}

void CodebookSet::validate() const {
  const BitAllocation wire = wire_allocation(mode);
  if (scalar.size() == 0)
    throw Error(ErrorKind::kInvalidArgument, "codebook set: missing scalar codebook");
  if (scalar.bits() > wire.sq_bits)
    throw Error(ErrorKind::kInvalidArgument,
                "codebook set: scalar codebook wider than its " +
                    std::to_string(wire.sq_bits) + "-bit field");
  if (mode == RateMode::kR1000) {
    if (!vector || msvq)
      throw Error(ErrorKind::kModeMismatch,
                  "codebook set: 1000 bit/s mode needs a VQ and no MSVQ");
    if (vector->bits() > wire.vq_bits[0])
      throw Error(ErrorKind::kInvalidArgument,
                  "codebook set: VQ wider than its 12-bit field");
  } else {
    if (!msvq || vector)
      throw Error(ErrorKind::kModeMismatch,
                  "codebook set: 2000 bit/s mode needs an MSVQ and no VQ");
    for (std::size_t s = 0; s < msvq->stages().size(); ++s)
      if (msvq->stages()[s].bits() > wire.vq_bits[s])
        throw Error(ErrorKind::kInvalidArgument,
                    "codebook set: MSVQ stage wider than its 13-bit field");
  }
}

BitAllocation CodebookSet::allocation() const {
  BitAllocation a{scalar.bits(), {}};
  if (vector) a.vq_bits.push_back(vector->bits());
  if (msvq)
    for (const auto& s : msvq->stages()) a.vq_bits.push_back(s.bits());
  return a;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorKind::kInvalidArgument, "squared_distance: size mismatch");
  return bounded_distance(a.data(), b.data(), a.size(),
                          std::numeric_limits<double>::infinity());
}

std::uint32_t sq_encode(double value, const ScalarCodebook& cb) {
  const auto& levels = cb.levels();
  if (levels.empty())
    throw Error(ErrorKind::kInvalidArgument, "sq_encode: empty codebook");
  // First level >= value; the answer is it or its left neighbour.
  auto it = std::lower_bound(levels.begin(), levels.end(), value);
  if (it == levels.begin()) return 0;
  if (it == levels.end()) return static_cast<std::uint32_t>(levels.size() - 1);
  const double below = value - *(it - 1);
  const double above = *it - value;
  const auto hi = static_cast<std::uint32_t>(it - levels.begin());
  return below * below <= above * above ? hi - 1 : hi;
}

double sq_decode(std::uint32_t index, const ScalarCodebook& cb) {
  require_index(index, cb.size(), "sq_decode");
  return cb.levels()[index];
}

VqMatch vq_search(std::span<const double> vec, const VectorCodebook& cb) {
  require_dim(vec.size(), cb.dim(), "vq_encode");
  if (cb.size() == 0) throw Error(ErrorKind::kInvalidArgument, "vq_encode: empty codebook");
  const Candidate c = nearest(vec.data(), cb);
  return {c.index, c.distance};
}

std::uint32_t vq_encode(std::span<const double> vec, const VectorCodebook& cb) {
  return vq_search(vec, cb).index;
}

std::span<const double> vq_decode(std::uint32_t index, const VectorCodebook& cb) {
  require_index(index, cb.size(), "vq_decode");
  return cb.codeword(index);
}

namespace {

// Keeps the `beam` lowest distances in ascending order; strictly-less
// insertion keeps earlier (lower) indices ahead on ties. Indices must arrive
// in ascending order.
class Beam {
 public:
  explicit Beam(std::size_t width) : width_(width) { kept_.reserve(width + 1); }

  double bound() const {
    return kept_.size() < width_ ? std::numeric_limits<double>::infinity()
                                 : kept_.back().distance;
  }
  void offer(double d, std::uint32_t index) {
    if (kept_.size() == width_ && !(d < kept_.back().distance)) return;
    auto pos = std::upper_bound(kept_.begin(), kept_.end(), d,
                                [](double v, const Candidate& c) { return v < c.distance; });
    kept_.insert(pos, {d, index});
    if (kept_.size() > width_) kept_.pop_back();
  }
  const std::vector<Candidate>& kept() const { return kept_; }

 private:
  std::size_t width_;
  std::vector<Candidate> kept_;
};

void better_pair(MsvqResult& best, std::uint32_t first, const Candidate& second) {
  const bool better =
      second.distance < best.distortion ||
      (second.distance == best.distortion &&
       std::pair(first, second.index) < std::pair(best.indices[0], best.indices[1]));
  if (better) best = {{first, second.index}, second.distance};
}

void check_msvq_args(const MsvqCodebook& cb, std::size_t beam_width, std::size_t dim) {
  if (beam_width < 1)
    throw Error(ErrorKind::kInvalidArgument, "msvq_encode: beam width must be >= 1");
  if (cb.stages().size() != 2)
    throw Error(ErrorKind::kInvalidArgument, "msvq_encode: empty codebook");
  require_dim(dim, cb.dim(), "msvq_encode");
}

}  // namespace

MsvqResult msvq_search(std::span<const double> vec, const MsvqCodebook& cb,
                       std::size_t beam_width) {
  check_msvq_args(cb, beam_width, vec.size());
  const VectorCodebook& first = cb.stages()[0];
  const VectorCodebook& second = cb.stages()[1];
  const auto dim = static_cast<std::size_t>(cb.dim());

  Beam beam(std::min(beam_width, first.size()));
  const double* base = first.codewords().data();
  for (std::size_t j = 0; j < first.size(); ++j) {
    const double bound = beam.bound();
    beam.offer(bounded_distance(vec.data(), base + j * dim, dim, bound),
               static_cast<std::uint32_t>(j));
  }

  MsvqResult best{{0, 0}, std::numeric_limits<double>::infinity()};
  std::vector<double> residual(dim);
  for (const Candidate& c : beam.kept()) {
    const double* cw = base + c.index * dim;
    for (std::size_t d = 0; d < dim; ++d) residual[d] = vec[d] - cw[d];
    better_pair(best, c.index, nearest(residual.data(), second));
  }
  return best;
}

std::vector<VqMatch> vq_search_batch(const Matrix& vecs, const VectorCodebook& cb) {
  require_dim(static_cast<std::size_t>(vecs.cols()), cb.dim(), "vq_encode");
  if (cb.size() == 0) throw Error(ErrorKind::kInvalidArgument, "vq_encode: empty codebook");
  const auto lists = shortlists(vecs, cb, 1);
  std::vector<VqMatch> out(lists.size());
  for (std::size_t r = 0; r < lists.size(); ++r) {
    const Candidate c = nearest_of(vecs.row(static_cast<Eigen::Index>(r)).data(), cb, lists[r]);
    out[r] = {c.index, c.distance};
  }
  return out;
}

std::vector<MsvqResult> msvq_search_batch(const Matrix& vecs, const MsvqCodebook& cb,
                                          std::size_t beam_width) {
  check_msvq_args(cb, beam_width, static_cast<std::size_t>(vecs.cols()));
  const VectorCodebook& first = cb.stages()[0];
  const VectorCodebook& second = cb.stages()[1];
  const auto dim = static_cast<std::size_t>(cb.dim());
  const std::size_t width = std::min(beam_width, first.size());
  const double* base = first.codewords().data();

  // Stage 1: the same beam as msvq_search(), fed only the shortlisted
  // codewords in ascending order.
  const auto lists = shortlists(vecs, first, width);
  std::vector<std::vector<Candidate>> kept(lists.size());
  for (std::size_t r = 0; r < lists.size(); ++r) {
    const double* x = vecs.row(static_cast<Eigen::Index>(r)).data();
    Beam beam(width);
    for (std::uint32_t j : lists[r]) {
      const double bound = beam.bound();
      beam.offer(bounded_distance(x, base + j * dim, dim, bound), j);
    }
    kept[r] = beam.kept();
  }

  // Stage 2 on every surviving residual.
  Matrix residuals(static_cast<Eigen::Index>(lists.size() * width), cb.dim());
  Eigen::Index n = 0;
  for (std::size_t r = 0; r < kept.size(); ++r)
    for (const Candidate& c : kept[r]) {
      const double* cw = base + c.index * dim;
      for (std::size_t d = 0; d < dim; ++d)
        residuals(n, static_cast<Eigen::Index>(d)) =
            vecs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) - cw[d];
      ++n;
    }
  residuals.conservativeResize(n, Eigen::NoChange);
  const auto second_lists = shortlists(residuals, second, 1);

  std::vector<MsvqResult> out(kept.size());
  n = 0;
  for (std::size_t r = 0; r < kept.size(); ++r) {
    MsvqResult best{{0, 0}, std::numeric_limits<double>::infinity()};
    for (const Candidate& c : kept[r]) {
      better_pair(best, c.index,
                  nearest_of(residuals.row(n).data(), second,
                             second_lists[static_cast<std::size_t>(n)]));
      ++n;
    }
    out[r] = best;
  }
  return out;
}

std::array<std::uint32_t, 2> msvq_encode(std::span<const double> vec,
                                         const MsvqCodebook& cb,
                                         std::size_t beam_width) {
  return msvq_search(vec, cb, beam_width).indices;
}

Vector msvq_decode(std::span<const std::uint32_t> indices, const MsvqCodebook& cb) {
  if (indices.size() != cb.stages().size())
    throw Error(ErrorKind::kInvalidArgument, "msvq_decode: wrong number of indices");
  Vector out = Vector::Zero(cb.dim());
  for (std::size_t s = 0; s < indices.size(); ++s) {
    const auto cw = vq_decode(indices[s], cb.stages()[s]);
    out += Eigen::Map<const Vector>(cw.data(), cb.dim());
  }
  return out;
}

FrameCode quantize_frame(std::span<const double> z, const CodebookSet& set,
                         std::size_t beam_width) {
  const int spectral_dim = set.vector ? set.vector->dim() : set.msvq ? set.msvq->dim() : 0;
  if (set.mode == RateMode::kR1000 ? !set.vector : !set.msvq)
    throw Error(ErrorKind::kModeMismatch, "quantize_frame: codebook set lacks the mode's VQ");
  require_dim(z.size(), spectral_dim + 1, "quantize_frame");
  FrameCode code;
  code.sq_index = sq_encode(z[0], set.scalar);
  const auto rest = z.subspan(1);
  if (set.mode == RateMode::kR1000) {
    code.vq_indices = {vq_encode(rest, *set.vector)};
  } else {
    const auto idx = msvq_encode(rest, *set.msvq, beam_width);
    code.vq_indices = {idx[0], idx[1]};
  }
  return code;
}

void check_frame_code(const FrameCode& code, const CodebookSet& set) {
  const BitAllocation wire = wire_allocation(set.mode);
  if (code.vq_indices.size() != wire.vq_bits.size())
    throw Error(ErrorKind::kModeMismatch,
                "frame code has " + std::to_string(code.vq_indices.size()) +
                    " VQ indices, mode expects " + std::to_string(wire.vq_bits.size()));
  require_index(code.sq_index, set.scalar.size(), "frame code (SQ)");
  if (set.vector) require_index(code.vq_indices[0], set.vector->size(), "frame code (VQ)");
  if (set.msvq)
    for (std::size_t s = 0; s < 2; ++s)
      require_index(code.vq_indices[s], set.msvq->stages()[s].size(), "frame code (MSVQ)");
}

Vector dequantize_frame(const FrameCode& code, const CodebookSet& set) {
  if (set.mode == RateMode::kR1000 ? !set.vector : !set.msvq)
    throw Error(ErrorKind::kModeMismatch, "dequantize_frame: codebook set lacks the mode's VQ");
  check_frame_code(code, set);
  const int spectral_dim = set.vector ? set.vector->dim() : set.msvq->dim();
  Vector z(spectral_dim + 1);
  z[0] = sq_decode(code.sq_index, set.scalar);
  if (set.mode == RateMode::kR1000) {
    const auto cw = vq_decode(code.vq_indices[0], *set.vector);
    std::copy(cw.begin(), cw.end(), z.data() + 1);
  } else {
    z.tail(spectral_dim) = msvq_decode(code.vq_indices, *set.msvq);
  }
  return z;
}

}  // namespace melvq
