// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melvq/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "melvq/error.hpp"
#include "melvq/hash.hpp"
#include "melvq/parallel.hpp"
#include "melvq/signal_io.hpp"

namespace melvq {
namespace {

constexpr char kMagic[4] = {'M', 'V', 'Q', 'B'};
constexpr std::uint8_t kVersion = 0x01;

std::span<const double> row_of(const Matrix& m, Eigen::Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

struct Partition {
  std::vector<std::uint32_t> cell;
  std::vector<double> distance;
  double mean_distortion = 0.0;
};

Partition assign(const Matrix& data, const Matrix& codewords) {
  const VectorCodebook cb(codewords);
  const auto count = static_cast<std::size_t>(data.rows());
  Partition p;
  p.cell.resize(count);
  p.distance.resize(count);
  constexpr std::size_t kChunk = 256;
  parallel_for((count + kChunk - 1) / kChunk, [&](std::size_t chunk) {
    const std::size_t begin = chunk * kChunk;
    const std::size_t n = std::min(kChunk, count - begin);
    const auto matches = vq_search_batch(
        data.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(n)), cb);
    for (std::size_t i = 0; i < n; ++i) {
      p.cell[begin + i] = matches[i].index;
      p.distance[begin + i] = matches[i].distance;
    }
  });
  double total = 0.0;  // fixed summation order
  for (double d : p.distance) total += d;
  p.mean_distortion = total / static_cast<double>(count);
  return p;
}

// Centroid update; empty cells are moved onto the farthest member of the
// currently most populous cell.
Matrix update_centroids(const Matrix& data, const Matrix& codewords,
                        const Partition& p) {
  const Eigen::Index cells = codewords.rows();
  Matrix sums = Matrix::Zero(cells, data.cols());
  std::vector<std::size_t> counts(static_cast<std::size_t>(cells), 0);
  for (Eigen::Index t = 0; t < data.rows(); ++t) {
    sums.row(p.cell[t]) += data.row(t);
    ++counts[p.cell[t]];
  }
  Matrix next = codewords;
  for (Eigen::Index k = 0; k < cells; ++k)
    if (counts[k] > 0) next.row(k) = sums.row(k) / static_cast<double>(counts[k]);

  std::vector<bool> used(static_cast<std::size_t>(data.rows()), false);
  for (Eigen::Index k = 0; k < cells; ++k) {
    if (counts[k] > 0) continue;
    const auto donor = static_cast<std::uint32_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
    Eigen::Index far = -1;
    for (Eigen::Index t = 0; t < data.rows(); ++t)
      if (p.cell[t] == donor && !used[t] && (far < 0 || p.distance[t] > p.distance[far]))
        far = t;
    if (far < 0) continue;  // donor exhausted; fewer distinct points than cells
    used[far] = true;
    next.row(k) = data.row(far);
    --counts[donor];
    counts[k] = 1;
  }
  return next;
}

// One Lloyd run from the given codebook. Appends a round to the report. If
// rounding ever makes an update worse, the previous codebook is kept so the
// recorded sequence is non-increasing.
Matrix lloyd(const Matrix& data, Matrix codewords, const LloydOptions& opts,
             TrainReport& report) {
  std::vector<double> round;
  Partition p = assign(data, codewords);
  round.push_back(p.mean_distortion);
  for (int it = 0; it < opts.max_iterations && p.mean_distortion > 0.0; ++it) {
    Matrix next = update_centroids(data, codewords, p);
    Partition q = assign(data, next);
    if (q.mean_distortion > p.mean_distortion) break;
    const double drop = (p.mean_distortion - q.mean_distortion) / p.mean_distortion;
    codewords = std::move(next);
    p = std::move(q);
    round.push_back(p.mean_distortion);
    if (drop < opts.relative_tolerance) break;
  }
  report.iterations += round.size();
  report.final_distortion = round.back();
  report.rounds.push_back(std::move(round));
  return codewords;
}

void require_bits(int bits, const char* what) {
  if (bits < 0 || bits > 24)
    throw Error(ErrorKind::kInvalidArgument,
                std::string(what) + ": bit width " + std::to_string(bits) + " out of range");
}

void require_rows(Eigen::Index rows, int bits, const char* what) {
  if (rows < (Eigen::Index{1} << bits))
    throw Error(ErrorKind::kInsufficientData,
                std::string(what) + ": " + std::to_string(rows) +
                    " training vectors, at least " +
                    std::to_string(Eigen::Index{1} << bits) + " required");
}

Matrix round_to_float(const Matrix& m) {
  return m.cast<float>().cast<double>();
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(std::uint8_t(v & 0xFF));
  out.push_back(std::uint8_t(v >> 8));
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(bits >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    if (bytes_.size() - pos_ < n)
      throw Error(ErrorKind::kFormat, "codebook file truncated");
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto b = take(2);
    return std::uint16_t(b[0] | b[1] << 8);
  }
  double f32() {
    auto b = take(4);
    std::uint32_t v = std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
                      std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
    return static_cast<double>(std::bit_cast<float>(v));
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = v << 8 | b[i];
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

Matrix read_codewords(Reader& in, int bits, int dim) {
  Matrix m(Eigen::Index{1} << bits, dim);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = in.f32();
  return m;
}

}  // namespace

std::pair<ScalarCodebook, TrainReport> train_scalar(std::span<const double> samples,
                                                    int bits, const LloydOptions& opts) {
  require_bits(bits, "train_scalar");
  const std::size_t levels = std::size_t{1} << bits;
  std::vector<double> sorted(samples.begin(), samples.end());
  if (std::any_of(sorted.begin(), sorted.end(), [](double v) { return !std::isfinite(v); }))
    throw Error(ErrorKind::kInvalidArgument, "train_scalar: non-finite sample");
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < levels)
    throw Error(ErrorKind::kInsufficientData,
                "train_scalar: " + std::to_string(distinct.size()) +
                    " distinct samples, at least " + std::to_string(levels) + " required");

  auto quantiles = [&](const std::vector<double>& v) {
    Matrix init(static_cast<Eigen::Index>(levels), 1);
    for (std::size_t i = 0; i < levels; ++i) {
      auto pos = static_cast<std::size_t>((i + 0.5) * v.size() / levels);
      init(static_cast<Eigen::Index>(i), 0) = v[std::min(pos, v.size() - 1)];
    }
    return init;
  };
  Matrix init = quantiles(sorted);
  for (Eigen::Index i = 1; i < init.rows(); ++i)
    if (!(init(i, 0) > init(i - 1, 0))) {
      // Repeated values collapse sample quantiles; fall back to quantiles of
      // the distinct values, which are strictly increasing.
      init = quantiles(distinct);
      break;
    }

  Eigen::Map<const Matrix> data(samples.data(), static_cast<Eigen::Index>(samples.size()), 1);
  TrainReport report;
  Matrix trained = lloyd(Matrix(data), init, opts, report);
  std::vector<double> out(trained.data(), trained.data() + trained.size());
  std::sort(out.begin(), out.end());
  return {ScalarCodebook(std::move(out)), std::move(report)};
}

std::pair<VectorCodebook, TrainReport> train_lbg(const Matrix& vectors, int bits,
                                                 const LloydOptions& opts) {
  require_bits(bits, "train_lbg");
  require_rows(vectors.rows(), bits, "train_lbg");
  if (vectors.cols() < 1 || !vectors.allFinite())
    throw Error(ErrorKind::kInvalidArgument, "train_lbg: empty or non-finite data");

  TrainReport report;
  Matrix codewords = Matrix::Zero(1, vectors.cols());
  for (Eigen::Index t = 0; t < vectors.rows(); ++t) codewords.row(0) += vectors.row(t);
  codewords /= static_cast<double>(vectors.rows());
  codewords = lloyd(vectors, codewords, opts, report);
  while (codewords.rows() < (Eigen::Index{1} << bits)) {
    Matrix split(codewords.rows() * 2, codewords.cols());
    for (Eigen::Index k = 0; k < codewords.rows(); ++k) {
      split.row(2 * k) = codewords.row(k) * (1.0 + opts.split_epsilon);
      split.row(2 * k + 1) = codewords.row(k) * (1.0 - opts.split_epsilon);
    }
    codewords = lloyd(vectors, std::move(split), opts, report);
  }
  return {VectorCodebook(std::move(codewords)), std::move(report)};
}

std::pair<MsvqCodebook, TrainReport> train_msvq(const Matrix& vectors,
                                                std::array<int, 2> bits,
                                                const LloydOptions& opts) {
  require_rows(vectors.rows(), std::max(bits[0], bits[1]), "train_msvq");
  auto [first, report] = train_lbg(vectors, bits[0], opts);

  Matrix residuals(vectors.rows(), vectors.cols());
  parallel_for(static_cast<std::size_t>(vectors.rows()), [&](std::size_t t) {
    const auto r = static_cast<Eigen::Index>(t);
    const auto cw = first.codeword(vq_encode(row_of(vectors, r), first));
    for (Eigen::Index d = 0; d < vectors.cols(); ++d)
      residuals(r, d) = vectors(r, d) - cw[static_cast<std::size_t>(d)];
  });
  auto [second, second_report] = train_lbg(residuals, bits[1], opts);
  for (auto& round : second_report.rounds) report.rounds.push_back(std::move(round));
  report.iterations += second_report.iterations;

  MsvqCodebook cb({std::move(first), std::move(second)});
  std::vector<double> dist(static_cast<std::size_t>(vectors.rows()));
  parallel_for(dist.size(), [&](std::size_t t) {
    dist[t] = msvq_search(row_of(vectors, static_cast<Eigen::Index>(t)), cb, 1).distortion;
  });
  double total = 0.0;
  for (double d : dist) total += d;
  report.final_distortion = total / static_cast<double>(dist.size());
  return {std::move(cb), std::move(report)};
}

TrainConfig TrainConfig::for_mode(RateMode mode) {
  TrainConfig cfg;
  cfg.mode = mode;
  const BitAllocation wire = wire_allocation(mode);
  cfg.sq_bits = wire.sq_bits;
  if (mode == RateMode::kR1000) {
    cfg.vq_bits = wire.vq_bits[0];
  } else {
    cfg.stage_bits = {wire.vq_bits[0], wire.vq_bits[1]};
  }
  return cfg;
}

std::size_t TrainConfig::min_vectors() const {
  int widest = sq_bits;
  if (mode == RateMode::kR1000) {
    widest = std::max(widest, vq_bits);
  } else {
    widest = std::max({widest, stage_bits[0], stage_bits[1]});
  }
  return std::size_t{1} << widest;
}

TrainedCodebooks train_codebooks(const Matrix& mfccs, const TrainConfig& cfg,
                                 const LloydOptions& opts) {
  if (mfccs.cols() < 2)
    throw Error(ErrorKind::kInvalidArgument, "train_codebooks: need at least 2 coefficients");
  if (static_cast<std::size_t>(mfccs.rows()) < cfg.min_vectors())
    throw Error(ErrorKind::kInsufficientData,
                "insufficient training data: " + std::to_string(mfccs.rows()) +
                    " frames, at least " + std::to_string(cfg.min_vectors()) +
                    " required for the requested bit widths");

  TrainedCodebooks out;
  out.set.mode = cfg.mode;
  const Vector energy = mfccs.col(0);
  auto [scalar, scalar_report] = train_scalar({energy.data(), std::size_t(energy.size())},
                                              cfg.sq_bits, opts);
  std::vector<double> levels = scalar.levels();
  for (double& v : levels) v = static_cast<double>(static_cast<float>(v));
  out.set.scalar = ScalarCodebook(std::move(levels));
  out.scalar_report = std::move(scalar_report);

  const Matrix spectral = mfccs.rightCols(mfccs.cols() - 1);
  if (cfg.mode == RateMode::kR1000) {
    auto [vq, report] = train_lbg(spectral, cfg.vq_bits, opts);
    out.set.vector = VectorCodebook(round_to_float(vq.codewords()));
    out.vector_report = std::move(report);
  } else {
    auto [msvq, report] = train_msvq(spectral, cfg.stage_bits, opts);
    out.set.msvq = MsvqCodebook({VectorCodebook(round_to_float(msvq.stages()[0].codewords())),
                                 VectorCodebook(round_to_float(msvq.stages()[1].codewords()))});
    out.vector_report = std::move(report);
  }
  out.set.validate();
  out.set.content_hash = codebook_hash(out.set);
  return out;
}

std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open manifest " + path.string());
  std::vector<std::filesystem::path> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos || line[begin] == '#') continue;
    const auto end = line.find_last_not_of(" \t\r");
    std::filesystem::path p = line.substr(begin, end - begin + 1);
    if (p.is_relative()) p = path.parent_path() / p;
    out.push_back(std::move(p));
  }
  return out;
}

TrainingCorpus build_corpus(const std::vector<std::filesystem::path>& wavs,
                            const FrameConfig& cfg) {
  if (wavs.empty()) throw Error(ErrorKind::kInvalidArgument, "empty training manifest");
  std::vector<MfccMatrix> features;
  TrainingCorpus corpus;
  Eigen::Index total = 0;
  for (const auto& path : wavs) {
    const AudioBuffer audio = read_wav(path);
    require_codec_rate(audio);
    features.push_back(extract_mfcc(audio, cfg));
    total += features.back().values.rows();
    corpus.source_manifest.push_back(path.string());
  }
  corpus.vectors.resize(total, cfg.num_mel);
  Eigen::Index row = 0;
  for (const auto& f : features) {
    corpus.vectors.middleRows(row, f.values.rows()) = f.values;
    row += f.values.rows();
  }
  return corpus;
}

std::vector<std::uint8_t> serialize_codebooks(const CodebookSet& set) {
  set.validate();
  const BitAllocation bits = set.allocation();
  const int dim = set.vector ? set.vector->dim() : set.msvq->dim();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(set.mode));
  out.push_back(static_cast<std::uint8_t>(bits.sq_bits));
  put_u16(out, static_cast<std::uint16_t>(dim));
  for (int b : bits.vq_bits) out.push_back(static_cast<std::uint8_t>(b));
  for (double v : set.scalar.levels()) put_f32(out, v);
  auto put_matrix = [&](const Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) put_f32(out, m.data()[i]);
  };
  if (set.vector) put_matrix(set.vector->codewords());
  if (set.msvq)
    for (const auto& stage : set.msvq->stages()) put_matrix(stage.codewords());
  put_u64(out, fnv1a64(out));
  return out;
}

std::uint64_t codebook_hash(const CodebookSet& set) {
  const auto bytes = serialize_codebooks(set);
  return fnv1a64(std::span(bytes).first(bytes.size() - 8));
}

CodebookSet parse_codebooks(std::span<const std::uint8_t> bytes,
                            std::optional<RateMode> expected) {
  Reader in(bytes);
  auto magic = in.take(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic)))
    throw Error(ErrorKind::kFormat, "not a codebook file (bad magic)");
  if (const auto v = in.u8(); v != kVersion)
    throw Error(ErrorKind::kFormat, "unsupported codebook version " + std::to_string(v));
  const auto mode = rate_mode_from_byte(in.u8());
  if (!mode) throw Error(ErrorKind::kFormat, "codebook file: bad rate-mode byte");
  if (expected && *expected != *mode)
    throw Error(ErrorKind::kModeMismatch,
                "codebook is for " + std::to_string(bit_rate(*mode)) +
                    " bit/s, " + std::to_string(bit_rate(*expected)) + " bit/s requested");
  const int sq_bits = in.u8();
  const int dim = in.u16();
  const BitAllocation wire = wire_allocation(*mode);
  std::vector<int> stage_bits;
  for (std::size_t s = 0; s < wire.vq_bits.size(); ++s) stage_bits.push_back(in.u8());
  bool too_wide = sq_bits > wire.sq_bits || dim == 0;
  for (std::size_t s = 0; s < stage_bits.size(); ++s)
    too_wide = too_wide || stage_bits[s] > wire.vq_bits[s];
  if (too_wide)
    throw Error(ErrorKind::kFormat, "codebook file: bit widths exceed the wire format");

  CodebookSet set;
  set.mode = *mode;
  std::vector<double> levels(std::size_t{1} << sq_bits);
  for (double& v : levels) v = in.f32();
  std::vector<VectorCodebook> stages;
  for (int b : stage_bits) stages.emplace_back(read_codewords(in, b, dim));
  const std::size_t payload = in.pos();
  const std::uint64_t stored = in.u64();
  if (in.remaining() != 0)
    throw Error(ErrorKind::kFormat, "codebook file: trailing bytes after hash");
  const std::uint64_t actual = fnv1a64(bytes.first(payload));
  if (stored != actual)
    throw Error(ErrorKind::kHashMismatch, "codebook file: content hash mismatch");

  try {
    set.scalar = ScalarCodebook(std::move(levels));
  } catch (const Error& e) {
    throw Error(ErrorKind::kFormat, std::string("codebook file: ") + e.what());
  }
  if (*mode == RateMode::kR1000) {
    set.vector = std::move(stages[0]);
  } else {
    set.msvq = MsvqCodebook(std::move(stages));
  }
  set.content_hash = actual;
  return set;
}

void save_codebooks(const CodebookSet& set, const std::filesystem::path& path) {
  const auto bytes = serialize_codebooks(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

CodebookSet load_codebooks(const std::filesystem::path& path,
                           std::optional<RateMode> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open codebook " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_codebooks(bytes, expected);
}

}  // namespace melvq
