// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melvq/synthesis.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "melvq/error.hpp"
#include "melvq/fft.hpp"
#include "melvq/parallel.hpp"

namespace melvq {
namespace {

constexpr char kMelMagic[4] = {'M', 'E', 'L', 'S'};
constexpr std::uint8_t kMelVersion = 0x01;
constexpr double kRankTolerance = 1e-10;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

// Two-sided spectrum norm of |spec| - mag: interior bins appear twice.
double consistency_error(const ComplexMatrix& spec, const Matrix& mag) {
  const Eigen::Index bins = mag.cols();
  double total = 0.0;
  for (Eigen::Index m = 0; m < mag.rows(); ++m) {
    for (Eigen::Index k = 0; k < bins; ++k) {
      const double d = std::abs(spec(m, k)) - mag(m, k);
      const double weight = (k == 0 || k == bins - 1) ? 1.0 : 2.0;
      total += weight * d * d;
    }
  }
  return std::sqrt(total);
}

}  // namespace

Vector idct_mel(std::span<const double> z_hat) { return idct(z_hat); }

Matrix mel_pseudo_inverse(const MelFilterbank& fb) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(fb.weights,
                                               Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0 || sv(sv.size() - 1) < kRankTolerance * sv(0))
    throw Error(ErrorKind::kInvalidArgument,
                "mel filterbank is rank deficient; cannot invert");
  Eigen::MatrixXd pinv =
      svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
  return pinv;
}

MagnitudeSpectrogram mel_to_linear(const MelSpectrogram& mel, const MelFilterbank& fb) {
  if (fb.weights.rows() != mel.values.cols())
    throw Error(ErrorKind::kInvalidArgument,
                "mel_to_linear: filterbank has " + std::to_string(fb.weights.rows()) +
                    " bands, spectrogram " + std::to_string(mel.values.cols()));
  const Matrix pinv = mel_pseudo_inverse(fb);
  MagnitudeSpectrogram out;
  out.config = mel.config;
  out.values = mel.values.array().exp().matrix() * pinv.transpose();
  out.values = out.values.cwiseMax(0.0);
  return out;
}

ComplexMatrix stft(std::span<const double> signal, const FrameConfig& cfg,
                   std::size_t num_frames) {
  cfg.validate();
  const std::vector<double> window = hamming_window(cfg.frame_len);
  const auto len = static_cast<std::size_t>(cfg.frame_len);
  const auto hop = static_cast<std::size_t>(cfg.frame_shift);
  ComplexMatrix out(static_cast<Eigen::Index>(num_frames), cfg.bins());
  parallel_for(num_frames, [&](std::size_t m) {
    RealFft& fft = thread_fft(static_cast<std::size_t>(cfg.fft_size));
    std::vector<double> frame(len, 0.0);
    const std::size_t start = m * hop;
    for (std::size_t n = 0; n < len && start + n < signal.size(); ++n)
      frame[n] = signal[start + n] * window[n];
    std::vector<std::complex<double>> spec(fft.bins());
    fft.forward(frame, spec);
    for (std::size_t k = 0; k < spec.size(); ++k)
      out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = spec[k];
  });
  return out;
}

std::vector<double> overlap_add(const Matrix& frames, std::span<const double> window,
                                int hop) {
  if (static_cast<std::size_t>(frames.cols()) != window.size())
    throw Error(ErrorKind::kInvalidArgument, "overlap_add: window length mismatch");
  if (hop <= 0) throw Error(ErrorKind::kInvalidArgument, "overlap_add: hop must be positive");
  const auto len = static_cast<std::size_t>(frames.cols());
  const auto count = static_cast<std::size_t>(frames.rows());
  if (count == 0) return {};
  const std::size_t total = (count - 1) * static_cast<std::size_t>(hop) + len;
  std::vector<double> signal(total, 0.0);
  std::vector<double> norm(total, 0.0);
  for (std::size_t m = 0; m < count; ++m) {
    const std::size_t start = m * static_cast<std::size_t>(hop);
    for (std::size_t n = 0; n < len; ++n) {
      signal[start + n] += frames(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) *
                           window[n];
      norm[start + n] += window[n] * window[n];
    }
  }
  for (std::size_t i = 0; i < total; ++i) signal[i] /= std::max(norm[i], kOlaFloor);
  return signal;
}

std::vector<double> istft(const ComplexMatrix& spec, const FrameConfig& cfg) {
  cfg.validate();
  if (spec.cols() != cfg.bins())
    throw Error(ErrorKind::kInvalidArgument, "istft: bin count mismatch");
  Matrix frames(spec.rows(), cfg.frame_len);
  parallel_for(static_cast<std::size_t>(spec.rows()), [&](std::size_t m) {
    RealFft& fft = thread_fft(static_cast<std::size_t>(cfg.fft_size));
    const auto row = static_cast<Eigen::Index>(m);
    fft.inverse({spec.row(row).data(), static_cast<std::size_t>(spec.cols())},
                {frames.row(row).data(), static_cast<std::size_t>(cfg.frame_len)});
  });
  return overlap_add(frames, hamming_window(cfg.frame_len), cfg.frame_shift);
}

GriffinLimResult griffin_lim(const MagnitudeSpectrogram& mag, int iterations) {
  if (iterations < 1)
    throw Error(ErrorKind::kInvalidArgument, "griffin_lim: iterations must be >= 1");
  const FrameConfig& cfg = mag.config;
  cfg.validate();
  if (mag.values.cols() != cfg.bins())
    throw Error(ErrorKind::kInvalidArgument, "griffin_lim: bin count mismatch");
  if ((mag.values.array() < 0.0).any() || !mag.values.allFinite())
    throw Error(ErrorKind::kInvalidArgument, "griffin_lim: magnitudes must be finite and >= 0");

  const auto num_frames = static_cast<std::size_t>(mag.values.rows());
  GriffinLimResult result;
  result.audio.sample_rate_hz = cfg.sample_rate;
  ComplexMatrix estimate = mag.values.cast<std::complex<double>>();
  for (int it = 0; it < iterations; ++it) {
    const std::vector<double> signal = istft(estimate, cfg);
    const ComplexMatrix spec = stft(signal, cfg, num_frames);
    result.consistency_error.push_back(consistency_error(spec, mag.values));
    for (Eigen::Index m = 0; m < spec.rows(); ++m) {
      for (Eigen::Index k = 0; k < spec.cols(); ++k) {
        const double a = std::abs(spec(m, k));
        estimate(m, k) = a > 0.0 ? spec(m, k) * (mag.values(m, k) / a)
                                 : std::complex<double>(mag.values(m, k), 0.0);
      }
    }
  }
  result.audio.samples = istft(estimate, cfg);
  return result;
}

void export_mel(const MelSpectrogram& mel, const std::filesystem::path& path) {
  if (!mel.values.allFinite())
    throw Error(ErrorKind::kInvalidArgument, "export_mel: non-finite values");
  std::string out(kMelMagic, 4);
  out.push_back(char(kMelVersion));
  put_u32(out, static_cast<std::uint32_t>(mel.values.rows()));
  put_u32(out, static_cast<std::uint32_t>(mel.values.cols()));
  put_u32(out, static_cast<std::uint32_t>(mel.config.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(mel.config.frame_len));
  put_u32(out, static_cast<std::uint32_t>(mel.config.frame_shift));
  for (Eigen::Index i = 0; i < mel.values.size(); ++i)
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(mel.values.data()[i])));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

MelSpectrogram import_mel(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < kMelHeaderSize || !std::equal(kMelMagic, kMelMagic + 4, bytes.begin()))
    throw Error(ErrorKind::kFormat, path.string() + ": not a MELSPEC file");
  if (bytes[4] != kMelVersion)
    throw Error(ErrorKind::kFormat, path.string() + ": unsupported MELSPEC version");
  const std::uint8_t* p = bytes.data() + 5;
  const std::uint32_t rows = get_u32(p), cols = get_u32(p + 4);
  MelSpectrogram mel;
  mel.config.sample_rate = static_cast<int>(get_u32(p + 8));
  mel.config.frame_len = static_cast<int>(get_u32(p + 12));
  mel.config.fft_size = mel.config.frame_len;
  mel.config.frame_shift = static_cast<int>(get_u32(p + 16));
  mel.config.num_mel = static_cast<int>(cols);
  const std::size_t values = std::size_t{rows} * cols;
  if (bytes.size() != kMelHeaderSize + 4 * values)
    throw Error(ErrorKind::kFormat, path.string() + ": MELSPEC size does not match header");
  mel.values.resize(rows, cols);
  for (std::size_t i = 0; i < values; ++i)
    mel.values.data()[i] = static_cast<double>(
        std::bit_cast<float>(get_u32(bytes.data() + kMelHeaderSize + 4 * i)));
  return mel;
}

DecodeResult synthesize(const MelSpectrogram& mel, int gl_iterations) {
  const MelFilterbank fb = build_mel_filterbank(mel.config);
  GriffinLimResult gla = griffin_lim(mel_to_linear(mel, fb), gl_iterations);
  DecodeResult out;
  out.audio = std::move(gla.audio);
  for (double& s : out.audio.samples) s = std::clamp(s, -1.0, 1.0);
  out.mel = mel;
  out.consistency_error = std::move(gla.consistency_error);
  return out;
}

DecodeResult decode_stream(const EncodedStream& stream, const CodebookSet& set,
                           int gl_iterations, const FrameConfig& cfg) {
  if (stream.codebook_hash != set.content_hash) {
    std::ostringstream msg;
    msg << std::hex << "codebook hash mismatch: stream expects 0x" << stream.codebook_hash
        << ", codebook is 0x" << set.content_hash;
    throw Error(ErrorKind::kHashMismatch, msg.str());
  }
  if (stream.mode != set.mode)
    throw Error(ErrorKind::kModeMismatch, "stream and codebook rate modes differ");
  if (stream.frame_count == 0) throw Error(ErrorKind::kInvalidArgument, "empty stream");
  const std::vector<FrameCode> codes = unpack(stream);

  MelSpectrogram mel;
  mel.config = cfg;
  mel.values.resize(static_cast<Eigen::Index>(codes.size()), cfg.num_mel);
  parallel_for(codes.size(), [&](std::size_t m) {
    const Vector z_hat = dequantize_frame(codes[m], set);
    if (z_hat.size() != cfg.num_mel)
      throw Error(ErrorKind::kInvalidArgument, "codebook dimension does not match mel bands");
    mel.values.row(static_cast<Eigen::Index>(m)) =
        idct_mel({z_hat.data(), static_cast<std::size_t>(z_hat.size())}).transpose();
  });
  return synthesize(mel, gl_iterations);
}

}  // namespace melvq
