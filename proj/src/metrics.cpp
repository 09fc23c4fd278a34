// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melvq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>

#include "melvq/error.hpp"
#include "melvq/fft.hpp"

namespace melvq {
namespace {

// STOI constants.
constexpr int kStoiRate = 10000;
constexpr std::size_t kStoiFrame = 256;
constexpr std::size_t kStoiHop = kStoiFrame / 2;
constexpr std::size_t kStoiFft = 512;
constexpr int kStoiBands = 15;
constexpr double kStoiMinFreq = 150.0;
constexpr std::size_t kStoiSegment = 30;
constexpr double kStoiBeta = -15.0;
constexpr double kStoiDynRange = 40.0;
constexpr double kEps = std::numeric_limits<double>::epsilon();

constexpr int kResampleHalfTaps = 32;
constexpr double kKaiserBeta = 5.0;

// np.hanning(n + 2)[1:-1]
std::vector<double> stoi_window() {
  std::vector<double> w(kStoiFrame);
  const double m = static_cast<double>(kStoiFrame + 1);
  for (std::size_t n = 0; n < kStoiFrame; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n + 1) / m);
  return w;
}

using Rows = std::vector<std::vector<double>>;

// Windowed frames at hop 128 for start positions 0, 128, ... < len - 256.
Rows stoi_frames(std::span<const double> x, const std::vector<double>& w) {
  Rows frames;
  for (std::size_t i = 0; i + kStoiFrame < x.size(); i += kStoiHop) {
    std::vector<double> f(kStoiFrame);
    for (std::size_t n = 0; n < kStoiFrame; ++n) f[n] = w[n] * x[i + n];
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<double> plain_overlap_add(const Rows& frames) {
  if (frames.empty()) return {};
  std::vector<double> out((frames.size() - 1) * kStoiHop + kStoiFrame, 0.0);
  for (std::size_t m = 0; m < frames.size(); ++m)
    for (std::size_t n = 0; n < kStoiFrame; ++n) out[m * kStoiHop + n] += frames[m][n];
  return out;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Drops frames more than 40 dB below the loudest reference frame from both
// signals and re-synthesizes them by overlap-add.
void remove_silent_frames(std::vector<double>& x, std::vector<double>& y) {
  const auto w = stoi_window();
  Rows xf = stoi_frames(x, w), yf = stoi_frames(y, w);
  std::vector<double> energy(xf.size());
  for (std::size_t m = 0; m < xf.size(); ++m)
    energy[m] = 20.0 * std::log10(norm2(xf[m]) + kEps);
  const double top = energy.empty() ? 0.0 : *std::max_element(energy.begin(), energy.end());
  Rows xk, yk;
  for (std::size_t m = 0; m < xf.size(); ++m) {
    if (top - kStoiDynRange - energy[m] < 0.0) {
      xk.push_back(std::move(xf[m]));
      yk.push_back(std::move(yf[m]));
    }
  }
  x = plain_overlap_add(xk);
  y = plain_overlap_add(yk);
}

// One-third octave band envelopes, bands x frames.
Rows third_octave_envelopes(std::span<const double> x) {
  const auto w = stoi_window();
  const Rows frames = stoi_frames(x, w);
  RealFft fft(kStoiFft);
  const std::size_t bins = fft.bins();

  std::vector<double> freq(bins);
  for (std::size_t k = 0; k < bins; ++k)
    freq[k] = static_cast<double>(kStoiRate) * k / kStoiFft;
  auto nearest_bin = [&](double f) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < bins; ++k)
      if ((freq[k] - f) * (freq[k] - f) < (freq[best] - f) * (freq[best] - f)) best = k;
    return best;
  };
  std::vector<std::pair<std::size_t, std::size_t>> bands;
  for (int b = 0; b < kStoiBands; ++b) {
    const double lo = kStoiMinFreq * std::pow(2.0, (2.0 * b - 1.0) / 6.0);
    const double hi = kStoiMinFreq * std::pow(2.0, (2.0 * b + 1.0) / 6.0);
    bands.emplace_back(nearest_bin(lo), nearest_bin(hi));
  }

  Rows env(kStoiBands, std::vector<double>(frames.size(), 0.0));
  std::vector<std::complex<double>> spec(bins);
  for (std::size_t m = 0; m < frames.size(); ++m) {
    fft.forward(frames[m], spec);
    for (int b = 0; b < kStoiBands; ++b) {
      double power = 0.0;
      for (std::size_t k = bands[b].first; k < bands[b].second; ++k) power += std::norm(spec[k]);
      env[b][m] = std::sqrt(power);
    }
  }
  return env;
}

}  // namespace

std::vector<double> resample(std::span<const double> signal, int up, int down) {
  if (up <= 0 || down <= 0)
    throw Error(ErrorKind::kInvalidArgument, "resample: factors must be positive");
  const int g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1) return {signal.begin(), signal.end()};

  // Prototype low-pass at the upsampled rate, cutoff at the lower Nyquist.
  const long half = static_cast<long>(kResampleHalfTaps) * up;
  const double cutoff = 0.5 / std::max(up, down);
  std::vector<double> h(static_cast<std::size_t>(2 * half + 1));
  const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);
  for (long i = -half; i <= half; ++i) {
    const double t = 2.0 * cutoff * static_cast<double>(i);
    const double sinc = i == 0 ? 1.0 : std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
    const double r = static_cast<double>(i) / static_cast<double>(half);
    const double kaiser =
        std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
    h[static_cast<std::size_t>(i + half)] = 2.0 * cutoff * sinc * kaiser * up;
  }

  const auto len = static_cast<long>(signal.size());
  const long out_len = (len * up + down - 1) / down;
  std::vector<double> out(static_cast<std::size_t>(out_len), 0.0);
  for (long j = 0; j < out_len; ++j) {
    const long pos = j * down;  // position on the upsampled grid
    long n_lo = (pos - half + up - 1) / up;
    if (pos - half < 0) n_lo = -((half - pos) / up);
    n_lo = std::max(0L, n_lo);
    const long n_hi = std::min(len - 1, (pos + half) / up);
    double acc = 0.0;
    for (long n = n_lo; n <= n_hi; ++n)
      acc += signal[static_cast<std::size_t>(n)] * h[static_cast<std::size_t>(pos - n * up + half)];
    out[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

double stoi(const AudioBuffer& reference, const AudioBuffer& degraded) {
  if (reference.sample_rate_hz != degraded.sample_rate_hz)
    throw Error(ErrorKind::kInvalidArgument, "stoi: sample rates differ");
  const std::size_t len = std::min(reference.size(), degraded.size());
  std::span<const double> ref(reference.samples.data(), len);
  std::span<const double> deg(degraded.samples.data(), len);
  std::vector<double> x = resample(ref, kStoiRate, reference.sample_rate_hz);
  std::vector<double> y = resample(deg, kStoiRate, reference.sample_rate_hz);

  remove_silent_frames(x, y);
  const Rows x_env = third_octave_envelopes(x);
  const Rows y_env = third_octave_envelopes(y);
  const std::size_t frames = x_env.front().size();
  if (frames < kStoiSegment)
    throw Error(ErrorKind::kTooShort,
                "stoi: " + std::to_string(frames) + " non-silent frames, at least " +
                    std::to_string(kStoiSegment) + " required");

  const double clip = std::pow(10.0, -kStoiBeta / 20.0);
  double total = 0.0;
  std::size_t segments = 0;
  std::vector<double> xs(kStoiSegment), ys(kStoiSegment);
  for (std::size_t end = kStoiSegment; end <= frames; ++end, ++segments) {
    for (int b = 0; b < kStoiBands; ++b) {
      for (std::size_t i = 0; i < kStoiSegment; ++i) {
        xs[i] = x_env[b][end - kStoiSegment + i];
        ys[i] = y_env[b][end - kStoiSegment + i];
      }
      // Normalize the degraded envelope to the reference energy and clip.
      const double scale = norm2(xs) / (norm2(ys) + kEps);
      for (std::size_t i = 0; i < kStoiSegment; ++i)
        ys[i] = std::min(ys[i] * scale, xs[i] * (1.0 + clip));
      const double xm = std::accumulate(xs.begin(), xs.end(), 0.0) / kStoiSegment;
      const double ym = std::accumulate(ys.begin(), ys.end(), 0.0) / kStoiSegment;
      for (std::size_t i = 0; i < kStoiSegment; ++i) {
        xs[i] -= xm;
        ys[i] -= ym;
      }
      const double xn = norm2(xs) + kEps, yn = norm2(ys) + kEps;
      double corr = 0.0;
      for (std::size_t i = 0; i < kStoiSegment; ++i) corr += (xs[i] / xn) * (ys[i] / yn);
      total += corr;
    }
  }
  const double d = total / (static_cast<double>(kStoiBands) * static_cast<double>(segments));
  return std::clamp(d, 0.0, 1.0);
}

double mcd(const MfccMatrix& reference, const MfccMatrix& degraded) {
  if (reference.values.cols() != degraded.values.cols())
    throw Error(ErrorKind::kInvalidArgument, "mcd: coefficient counts differ");
  const Eigen::Index frames = std::min(reference.values.rows(), degraded.values.rows());
  if (frames == 0) throw Error(ErrorKind::kInvalidArgument, "mcd: no frames");
  const Eigen::Index dims = reference.values.cols() - 1;
  const double k = 10.0 / std::numbers::ln10 * std::numbers::sqrt2;
  double total = 0.0;
  for (Eigen::Index m = 0; m < frames; ++m)
    total += k * (reference.values.row(m).tail(dims) - degraded.values.row(m).tail(dims)).norm();
  return total / static_cast<double>(frames);
}

double lsd(const MagnitudeSpectrogram& reference, const MagnitudeSpectrogram& degraded) {
  if (reference.values.cols() != degraded.values.cols())
    throw Error(ErrorKind::kInvalidArgument, "lsd: bin counts differ");
  const Eigen::Index frames = std::min(reference.values.rows(), degraded.values.rows());
  if (frames == 0) throw Error(ErrorKind::kInvalidArgument, "lsd: no frames");
  constexpr double eps = 1e-8;
  const Eigen::Index bins = reference.values.cols();
  double total = 0.0;
  for (Eigen::Index m = 0; m < frames; ++m) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < bins; ++k) {
      const double db =
          20.0 * std::log10((reference.values(m, k) + eps) / (degraded.values(m, k) + eps));
      acc += db * db;
    }
    total += std::sqrt(acc / static_cast<double>(bins));
  }
  return total / static_cast<double>(frames);
}

double seg_snr(const AudioBuffer& reference, const AudioBuffer& degraded, int seg_len) {
  if (seg_len <= 0) throw Error(ErrorKind::kInvalidArgument, "seg_snr: segment length must be > 0");
  const std::size_t len = std::min(reference.size(), degraded.size());
  const auto seg = static_cast<std::size_t>(seg_len);
  const std::size_t count = len / seg;
  std::vector<double> signal(count, 0.0), noise(count, 0.0);
  for (std::size_t s = 0; s < count; ++s) {
    for (std::size_t i = s * seg; i < (s + 1) * seg; ++i) {
      const double e = reference.samples[i] - degraded.samples[i];
      signal[s] += reference.samples[i] * reference.samples[i];
      noise[s] += e * e;
    }
  }
  const double loudest = count ? *std::max_element(signal.begin(), signal.end()) : 0.0;
  if (!(loudest > 0.0))
    throw Error(ErrorKind::kInvalidArgument, "seg_snr: reference is silent");
  const double threshold = loudest * std::pow(10.0, -kStoiDynRange / 10.0);
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t s = 0; s < count; ++s) {
    if (signal[s] <= threshold) continue;
    const double snr = noise[s] > 0.0 ? 10.0 * std::log10(signal[s] / noise[s]) : kSegSnrMax;
    total += std::clamp(snr, kSegSnrMin, kSegSnrMax);
    ++used;
  }
  return total / static_cast<double>(used);
}

QualityReport evaluate_pair(const AudioBuffer& reference, const AudioBuffer& degraded,
                            std::string id, const FrameConfig& cfg) {
  QualityReport r;
  r.id = std::move(id);
  try {
    r.stoi = stoi(reference, degraded);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kTooShort) throw;
  }
  const std::size_t len = std::min(reference.size(), degraded.size());
  AudioBuffer ref{{reference.samples.begin(), reference.samples.begin() + len},
                  reference.sample_rate_hz};
  AudioBuffer deg{{degraded.samples.begin(), degraded.samples.begin() + len},
                  degraded.sample_rate_hz};
  const FrameMatrix ref_frames = frame_signal(ref, cfg);
  const FrameMatrix deg_frames = frame_signal(deg, cfg);
  const MelFilterbank fb = build_mel_filterbank(cfg);
  const MagnitudeSpectrogram ref_mag = magnitude_spectrogram(ref_frames, cfg);
  const MagnitudeSpectrogram deg_mag = magnitude_spectrogram(deg_frames, cfg);
  r.mcd_db = mcd(mfcc(log_mel_from_magnitude(ref_mag, fb)),
                 mfcc(log_mel_from_magnitude(deg_mag, fb)));
  r.lsd_db = lsd(ref_mag, deg_mag);
  r.seg_snr_db = seg_snr(ref, deg);
  return r;
}

QualityReport corpus_mean(std::span<const QualityReport> reports) {
  QualityReport mean;
  mean.id = "mean";
  if (reports.empty()) return mean;
  double stoi_sum = 0.0;
  std::size_t stoi_count = 0;
  for (const auto& r : reports) {
    if (r.stoi) {
      stoi_sum += *r.stoi;
      ++stoi_count;
    }
    mean.mcd_db += r.mcd_db;
    mean.lsd_db += r.lsd_db;
    mean.seg_snr_db += r.seg_snr_db;
  }
  const auto n = static_cast<double>(reports.size());
  mean.mcd_db /= n;
  mean.lsd_db /= n;
  mean.seg_snr_db /= n;
  if (stoi_count) mean.stoi = stoi_sum / static_cast<double>(stoi_count);
  return mean;
}

namespace {

nlohmann::ordered_json to_json(const QualityReport& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["stoi"] = r.stoi ? nlohmann::ordered_json(*r.stoi) : nlohmann::ordered_json(nullptr);
  j["mcd_db"] = r.mcd_db;
  j["lsd_db"] = r.lsd_db;
  j["seg_snr_db"] = r.seg_snr_db;
  return j;
}

}  // namespace

std::string format_report_line(const QualityReport& report) {
  return to_json(report).dump();
}

std::string format_mean_footer(std::span<const QualityReport> reports) {
  nlohmann::ordered_json j = to_json(corpus_mean(reports));
  j["mean"] = true;
  j["count"] = reports.size();
  return j.dump();
}

}  // namespace melvq
