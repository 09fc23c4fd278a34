// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Each criterion is self-contained and runs in its own
// scratch directory.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "melvq/analysis.hpp"
#include "melvq/bitstream.hpp"
#include "melvq/codec.hpp"
#include "melvq/error.hpp"
#include "melvq/metrics.hpp"
#include "melvq/synthesis.hpp"
#include "melvq/trainer.hpp"
#include "speech_synth.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;
using namespace melvq;
using melvq::testing::TempDir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Run {
  int status = -1;
  std::string out;
  double seconds = 0.0;
};

Run cli(const TempDir& dir, const std::string& args) {
  const fs::path log = dir / "cli.log";
  const std::string cmd =
      std::string(MELVQ_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const auto t0 = Clock::now();
  const int raw = std::system(cmd.c_str());
  Run r;
  r.seconds = seconds_since(t0);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::stringstream text;
  text << in.rdbuf();
  r.out = text.str();
  return r;
}

void require(const Run& r, const std::string& what) {
  if (r.status != 0) throw std::runtime_error(what + " failed: " + r.out);
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

bool non_increasing(const std::vector<double>& seq) {
  for (std::size_t i = 1; i < seq.size(); ++i)
    if (seq[i] > seq[i - 1]) return false;
  return true;
}

bool monotone(const TrainReport& r) {
  for (const auto& round : r.rounds)
    if (!non_increasing(round)) return false;
  return !r.rounds.empty();
}

// ---------------------------------------------------------------------------

Outcome rate_exactness() {
  TempDir dir("acc_rate");
  save_codebooks(testing::random_set(RateMode::kR1000, 11, 4, 12), dir / "r1.mvqb");
  save_codebooks(testing::random_set(RateMode::kR2000, 12, 6, 13, 13), dir / "r2.mvqb");
  write_wav(dir / "ten.wav", testing::synth_utterance(31, 10.0));
  write_wav(dir / "odd.wav", testing::synth_utterance(32, 3.317));

  bool ok = true;
  double slowest = 0.0;
  std::ostringstream detail;
  for (const char* wav : {"ten.wav", "odd.wav"}) {
    for (int rate : {1000, 2000}) {
      const std::string cb = rate == 1000 ? "r1.mvqb" : "r2.mvqb";
      const Run r = cli(dir, "encode " + (dir / wav).string() + " " + (dir / "s.mvqc").string() +
                                 " --codebook " + (dir / cb).string() +
                                 " --rate " + std::to_string(rate));
      require(r, "encode");
      const EncodedStream s = read_stream(dir / "s.mvqc");
      const std::uint64_t bits = std::uint64_t{s.frame_count} *
                                 std::uint64_t(wire_allocation(s.mode).frame_bits());
      // rate = bits / (frames * R / fs), compared in integers.
      const bool exact = bits * 16000 == std::uint64_t(rate) * s.frame_count * 256 &&
                         s.payload.size() == (bits + 7) / 8 &&
                         r.out.find("payload bitrate: " + std::to_string(rate) + " bit/s") !=
                             std::string::npos;
      ok = ok && exact;
      if (std::string(wav) == "ten.wav") {
        slowest = std::max(slowest, r.seconds);
        ok = ok && s.frame_count == 625 && r.seconds < 1.0;
      }
      detail << wav << "@" << rate << (exact ? " exact" : " WRONG") << "; ";
    }
  }
  detail << "10 s encode (full-size codebooks, CLI wall time) max " << fmt("%.3f", slowest)
         << " s";
  return {ok, detail.str()};
}

Outcome bitstream_roundtrip() {
  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0, sequences = 0;
  for (RateMode mode : {RateMode::kR1000, RateMode::kR2000}) {
    const BitAllocation a = wire_allocation(mode);
    for (int seq = 0; seq < 10000; ++seq) {
      std::vector<FrameCode> codes(rng() % 40);
      for (auto& c : codes) {
        c.sq_index = std::uint32_t(rng() % (1u << a.sq_bits));
        for (int b : a.vq_bits) c.vq_indices.push_back(std::uint32_t(rng() % (1u << b)));
      }
      const std::uint64_t hash = rng();
      const UnpackedStream u = unpack(pack(codes, mode, hash).to_bytes());
      if (u.codes != codes || u.mode != mode || u.codebook_hash != hash) ++mismatches;
      ++sequences;
    }
  }
  return {mismatches == 0, std::to_string(sequences) + " sequences, " +
                               std::to_string(mismatches) + " mismatches"};
}

std::uint32_t scan_oracle(std::span<const double> x, const Matrix& cb) {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < cb.rows(); ++k) {
    double d = 0.0;
    for (Eigen::Index i = 0; i < cb.cols(); ++i) {
      const double e = x[std::size_t(i)] - cb(k, i);
      d += e * e;
    }
    if (d < best_d) {
      best_d = d;
      best = std::uint32_t(k);
    }
  }
  return best;
}

std::array<std::uint32_t, 2> joint_oracle(std::span<const double> x, const Matrix& c1,
                                          const Matrix& c2) {
  std::array<std::uint32_t, 2> best{};
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < c1.rows(); ++i)
    for (Eigen::Index j = 0; j < c2.rows(); ++j) {
      double d = 0.0;
      for (Eigen::Index k = 0; k < c1.cols(); ++k) {
        const double e = (x[std::size_t(k)] - c1(i, k)) - c2(j, k);
        d += e * e;
      }
      if (d < best_d) {
        best_d = d;
        best = {std::uint32_t(i), std::uint32_t(j)};
      }
    }
  return best;
}

Outcome quantizer_equivalence() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 3.0);
  std::size_t vq_checks = 0, vq_bad = 0;
  for (int book = 0; book < 24; ++book) {
    const int bits = 4 + book % 7;
    Matrix words;
    std::vector<double> x(79);
    if (book % 4 == 3) {
      // Small-integer codebook and half-integer inputs: many exact ties.
      std::uniform_int_distribution<int> bit(0, 1);
      words.resize(Eigen::Index{1} << bits, 79);
      for (Eigen::Index i = 0; i < words.size(); ++i) words.data()[i] = bit(rng);
    } else {
      words = testing::random_codewords(rng, bits, 79, 3.0);
    }
    const VectorCodebook cb(words);
    for (int n = 0; n < 1000; ++n) {
      for (double& v : x)
        v = book % 4 == 3 ? 0.5 * double(rng() % 3) : g(rng);
      if (vq_encode(x, cb) != scan_oracle(x, words)) ++vq_bad;
      ++vq_checks;
    }
  }
  std::size_t ms_checks = 0, ms_bad = 0;
  for (int toy = 0; toy < 200; ++toy) {
    const int dim = 2 + toy % 5;
    const Matrix c1 = testing::random_codewords(rng, 2, dim, 2.0);
    const Matrix c2 = testing::random_codewords(rng, 2, dim, 0.7);
    const MsvqCodebook cb({VectorCodebook(c1), VectorCodebook(c2)});
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int n = 0; n < 50; ++n) {
      for (double& v : x) v = g(rng);
      if (msvq_encode(x, cb, 4) != joint_oracle(x, c1, c2)) ++ms_bad;
      ++ms_checks;
    }
  }
  return {vq_bad == 0 && ms_bad == 0,
          "VQ " + std::to_string(vq_checks) + " inputs over 24 codebooks, " +
              std::to_string(vq_bad) + " mismatches; MSVQ " + std::to_string(ms_checks) +
              " inputs over 200 4x4 toys, " + std::to_string(ms_bad) + " mismatches"};
}

Matrix mixture(std::uint64_t seed, int count, int dim, int clusters) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix centers(clusters, dim);
  for (Eigen::Index i = 0; i < centers.size(); ++i) centers.data()[i] = 4.0 * g(rng);
  Matrix out(count, dim);
  for (int t = 0; t < count; ++t)
    for (int d = 0; d < dim; ++d) out(t, d) = centers(t % clusters, d) + g(rng);
  return out;
}

Outcome lloyd_monotonicity() {
  int runs = 0, bad = 0;
  auto check = [&](const TrainReport& r) {
    runs += int(r.rounds.size());
    if (!monotone(r)) ++bad;
  };
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> e(1.0);
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<double> s(5000);
    for (double& v : s) v = (rng() & 1 ? 1.0 : -1.0) * e(rng) + trial;
    for (int bits = 1; bits <= 6; ++bits) check(train_scalar(s, bits).second);
  }
  for (int trial = 0; trial < 4; ++trial) {
    const Matrix data = mixture(100 + std::uint64_t(trial), 1500, 4 + 8 * trial, 5 + 3 * trial);
    check(train_lbg(data, 7).second);
    check(train_msvq(data, {4, 4}).second);
  }
  const MfccMatrix speech = extract_mfcc(testing::synth_utterance(40, 20.0));
  TrainConfig cfg = TrainConfig::for_mode(RateMode::kR2000);
  cfg.stage_bits = {6, 6};
  const TrainedCodebooks t = train_codebooks(speech.values, cfg);
  check(t.scalar_report);
  check(t.vector_report);

  Matrix corners(4, 2);
  corners << 0, 0, 1, 0, 0, 1, 1, 1;
  const auto [cb, corner_report] = train_lbg(corners, 2);
  check(corner_report);
  const bool zero = corner_report.final_distortion == 0.0;
  return {bad == 0 && zero, std::to_string(runs) + " Lloyd runs, " + std::to_string(bad) +
                                " with an increase; 4-corner distortion " +
                                fmt("%g", corner_report.final_distortion)};
}

Outcome analysis_synthesis_roundtrips() {
  const FrameConfig cfg;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 5.0);
  double dct_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> y(80);
    for (double& v : y) v = g(rng);
    const Vector z = dct(y);
    const Vector back = idct({z.data(), std::size_t(z.size())});
    for (int k = 0; k < 80; ++k) dct_err = std::max(dct_err, std::abs(back[k] - y[std::size_t(k)]));
  }

  double ola_err = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const AudioBuffer x = seed % 2 ? testing::synth_utterance(seed, 2.0)
                                   : testing::white_noise(seed, 0.2, 30000);
    const FrameMatrix f = frame_signal(x, cfg);
    const std::vector<double> y = overlap_add(f.frames, f.window, cfg.frame_shift);
    double num = 0.0, den = 0.0;
    for (std::size_t n = std::size_t(cfg.frame_len); n + std::size_t(cfg.frame_len) < x.size(); ++n) {
      num += (y[n] - x.samples[n]) * (y[n] - x.samples[n]);
      den += x.samples[n] * x.samples[n];
    }
    ola_err = std::max(ola_err, std::sqrt(num / den));
  }

  const MelFilterbank fb = build_mel_filterbank(cfg);
  const MelSpectrogram mel =
      log_mel_spectrogram(frame_signal(testing::tone(1000.0, 0.8, 8000), cfg), fb, cfg);
  std::size_t nearest = 0;
  for (std::size_t k = 0; k < 80; ++k)
    if (std::abs(fb.band_edges_hz[k + 1] - 1000.0) < std::abs(fb.band_edges_hz[nearest + 1] - 1000.0))
      nearest = k;
  Eigen::Index peak = -1;
  mel.values.row(2).maxCoeff(&peak);
  const bool band_ok = peak == Eigen::Index(nearest) &&
                       fb.band_edges_hz[nearest] < 1000.0 && 1000.0 < fb.band_edges_hz[nearest + 2];

  return {dct_err <= 1e-9 && ola_err <= 1e-6 && band_ok,
          "DCT/IDCT max error " + fmt("%.2e", dct_err) + ", OLA relative error " +
              fmt("%.2e", ola_err) + ", 1 kHz tone peaks in band " + std::to_string(peak) +
              " (centre " + fmt("%.1f", fb.band_edges_hz[std::size_t(peak) + 1]) + " Hz)"};
}

Outcome griffin_lim_criterion() {
  const FrameConfig cfg;
  const std::vector<AudioBuffer> inputs{testing::speech_like_chirp(2.0),
                                        testing::synth_utterance(51, 2.0),
                                        testing::synth_utterance(52, 2.0),
                                        testing::white_noise(53, 0.1, 24000),
                                        testing::tone(440.0, 0.5, 16000)};
  int monotone_runs = 0;
  double chirp_snr = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const MagnitudeSpectrogram mag = magnitude_spectrogram(frame_signal(inputs[i], cfg), cfg);
    const GriffinLimResult r = griffin_lim(mag, 60);
    if (r.consistency_error.size() == 60 && non_increasing(r.consistency_error)) ++monotone_runs;
    if (i == 0) {
      const AudioBuffer rec{{r.audio.samples.begin(),
                             r.audio.samples.begin() + long(inputs[0].size())},
                            kCodecSampleRate};
      chirp_snr = seg_snr(inputs[0], rec);
    }
  }
  const bool mono = monotone_runs == int(inputs.size());
  return {mono && chirp_snr > 5.0,
          std::to_string(monotone_runs) + "/" + std::to_string(inputs.size()) +
              " runs non-increasing; 2 s chirp segSNR " + fmt("%.2f", chirp_snr) +
              " dB (required > 5 dB)"};
}

Outcome end_to_end_ordering() {
  const auto t0 = Clock::now();
  TempDir dir("acc_e2e");
  const fs::path train = testing::write_corpus(dir / "train", "tr", 1000, 40, 3.0);
  const fs::path held = testing::write_corpus(dir / "held", "ho", 5000, 20, 3.0);
  const std::string d = dir.path().string() + "/";
  require(cli(dir, "train --manifest " + train.string() + " --rate 1000 --vq-bits 8 --codebook " + d + "r1.mvqb"), "train 1000");
  require(cli(dir, "train --manifest " + train.string() + " --rate 2000 --stage-bits 8,8 --codebook " + d + "r2.mvqb"), "train 2000");

  const auto wavs = read_manifest(held);
  double mcd_1000 = 0.0, mcd_2000 = 0.0, mcd_gla = 0.0;
  for (std::size_t i = 0; i < wavs.size(); ++i) {
    const std::string w = wavs[i].string();
    const AudioBuffer ref = read_wav(wavs[i]);
    for (const char* mode : {"1", "2"}) {
      const std::string stream = d + "s" + mode + ".mvqc", out = d + "d" + mode + ".wav";
      require(cli(dir, "encode " + w + " " + stream + " --codebook " + d + "r" + mode + ".mvqb"), "encode");
      require(cli(dir, "decode " + stream + " " + out + " --codebook " + d + "r" + mode + ".mvqb"), "decode");
      const double m = evaluate_pair(ref, read_wav(out), w).mcd_db;
      (mode[0] == '1' ? mcd_1000 : mcd_2000) += m;
    }
    // Unquantized reference pipeline: analysis straight into the decoder.
    const FrameConfig cfg;
    const MelSpectrogram mel = log_mel_spectrogram(frame_signal(ref, cfg), build_mel_filterbank(cfg), cfg);
    write_wav(dir / "gla.wav", synthesize(mel, kDefaultGriffinLimIterations).audio);
    mcd_gla += evaluate_pair(ref, read_wav(dir / "gla.wav"), w).mcd_db;
  }
  const double n = double(wavs.size());
  mcd_1000 /= n;
  mcd_2000 /= n;
  mcd_gla /= n;
  const double elapsed = seconds_since(t0);
  const bool ok = wavs.size() >= 20 && mcd_2000 <= mcd_1000 && mcd_gla <= mcd_2000 &&
                  mcd_gla <= mcd_1000 && elapsed < 300.0;
  return {ok, std::to_string(wavs.size()) + " held-out utterances; mean MCD unquantized " +
                  fmt("%.3f", mcd_gla) + " dB <= 2000 bit/s " + fmt("%.3f", mcd_2000) +
                  " dB <= 1000 bit/s " + fmt("%.3f", mcd_1000) + " dB; " +
                  fmt("%.1f", elapsed) + " s"};
}

Outcome stoi_self_test() {
  const AudioBuffer x = testing::synth_utterance(61, 3.0);
  AudioBuffer half = x;
  for (double& v : half.samples) v *= 0.5;
  const double self = stoi(x, x);
  const double scaled = stoi(x, half);
  const double noise = stoi(x, testing::white_noise(62, 0.1, x.size()));
  return {std::abs(self - 1.0) <= 1e-6 && std::abs(scaled - 1.0) <= 1e-6 && noise < 0.3,
          "stoi(x,x)=" + fmt("%.9f", self) + ", stoi(x,0.5x)=" + fmt("%.9f", scaled) +
              ", stoi(x,noise)=" + fmt("%.4f", noise)};
}

Outcome determinism() {
  TempDir dir("acc_det");
  const fs::path train = testing::write_corpus(dir / "corpus", "c", 7000, 10, 2.0);
  const std::vector<std::string> inputs{"c_000.wav", "c_004.wav", "c_009.wav"};
  std::vector<std::string> artifacts;
  std::vector<std::vector<std::string>> runs;
  for (const char* threads : {"1", "4"}) {
    setenv("MELVQ_THREADS", threads, 1);
    const std::string d = (dir.path() / (std::string("run") + threads)).string() + "/";
    fs::create_directories(d);
    require(cli(dir, "train --manifest " + train.string() + " --rate 2000 --stage-bits 6,5 --codebook " + d + "cb.mvqb"), "train");
    std::ofstream pairs(d + "pairs.txt");
    for (const auto& in : inputs) {
      const std::string src = (dir.path() / "corpus" / in).string();
      require(cli(dir, "encode " + src + " " + d + in + ".mvqc --codebook " + d + "cb.mvqb"), "encode");
      require(cli(dir, "decode " + d + in + ".mvqc " + d + in + ".dec.wav --codebook " + d + "cb.mvqb"), "decode");
      pairs << src << " " << in << ".dec.wav " << in << "\n";
    }
    pairs.close();
    require(cli(dir, "eval --manifest " + d + "pairs.txt --report " + d + "report.jsonl"), "eval");
    std::vector<std::string> bytes{file_bytes(d + "cb.mvqb"), file_bytes(d + "report.jsonl")};
    for (const auto& in : inputs) {
      bytes.push_back(file_bytes(d + in + ".mvqc"));
      bytes.push_back(file_bytes(d + in + ".dec.wav"));
    }
    runs.push_back(std::move(bytes));
  }
  unsetenv("MELVQ_THREADS");
  std::size_t differing = 0;
  for (std::size_t i = 0; i < runs[0].size(); ++i)
    if (runs[0][i] != runs[1][i] || runs[0][i].empty()) ++differing;
  return {differing == 0, std::to_string(runs[0].size()) +
                              " artifacts (codebook, streams, audio, report) compared between "
                              "MELVQ_THREADS=1 and 4; " +
                              std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"rate exactness", rate_exactness},
      {"bitstream roundtrip", bitstream_roundtrip},
      {"quantizer oracle equivalence", quantizer_equivalence},
      {"Lloyd/LBG monotonicity", lloyd_monotonicity},
      {"analysis/synthesis roundtrips", analysis_synthesis_roundtrips},
      {"Griffin-Lim", griffin_lim_criterion},
      {"end-to-end ordering", end_to_end_ordering},
      {"STOI self-test", stoi_self_test},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << i + 1 << "] " << criteria[i].first
              << ": " << o.detail << " (" << fmt("%.1f", seconds_since(t0)) << " s)"
              << std::endl;
  }
  std::cout << criteria.size() - std::size_t(failed) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
