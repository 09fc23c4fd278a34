// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// melvq: train codebooks, encode/decode .mvqc streams, evaluate quality.
//
// Exit status: 0 success, 1 usage or invalid argument, 2 I/O, 3 malformed
// file, 4 sample-rate mismatch, 5 codebook hash mismatch, 6 rate-mode
// mismatch, 7 insufficient training data, 8 signal too short.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "melvq/bitstream.hpp"
#include "melvq/codec.hpp"
#include "melvq/error.hpp"
#include "melvq/metrics.hpp"
#include "melvq/synthesis.hpp"
#include "melvq/trainer.hpp"

namespace {

using namespace melvq;

int exit_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return 1;
    case ErrorKind::kIo: return 2;
    case ErrorKind::kFormat: return 3;
    case ErrorKind::kSampleRate: return 4;
    case ErrorKind::kHashMismatch: return 5;
    case ErrorKind::kModeMismatch: return 6;
    case ErrorKind::kInsufficientData: return 7;
    case ErrorKind::kTooShort: return 8;
  }
  return 1;
}

struct Options {
  int rate = 1000;
  std::string codebook;
  std::string manifest;
  std::string input;
  std::string output;
  std::string report;
  std::string emit_mel;
  std::size_t beam = kDefaultBeamWidth;
  int gl_iters = kDefaultGriffinLimIterations;
  int sq_bits = -1;
  int vq_bits = -1;
  std::vector<int> stage_bits;
};

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << v;
  return s.str();
}

void print_report(const char* name, const TrainReport& r) {
  std::cout << name << ": " << r.rounds.size() << " Lloyd runs, " << r.iterations
            << " iterations, final distortion " << r.final_distortion << "\n";
}

int cmd_train(const Options& o) {
  TrainConfig cfg = TrainConfig::for_mode(rate_mode_from_bitrate(o.rate));
  if (o.sq_bits >= 0) cfg.sq_bits = o.sq_bits;
  if (o.vq_bits >= 0) cfg.vq_bits = o.vq_bits;
  if (!o.stage_bits.empty()) {
    if (o.stage_bits.size() != 2)
      throw Error(ErrorKind::kInvalidArgument, "--stage-bits takes two values, e.g. 6,6");
    cfg.stage_bits = {o.stage_bits[0], o.stage_bits[1]};
  }
  const auto wavs = read_manifest(o.manifest);
  if (wavs.empty()) throw Error(ErrorKind::kInvalidArgument, "manifest lists no files");
  const TrainingCorpus corpus = build_corpus(wavs);
  std::cout << "training vectors: " << corpus.vectors.rows() << " from " << wavs.size()
            << " files\n";
  const TrainedCodebooks trained = train_codebooks(corpus.vectors, cfg);
  save_codebooks(trained.set, o.codebook);
  print_report("scalar", trained.scalar_report);
  print_report(cfg.mode == RateMode::kR1000 ? "vq" : "msvq", trained.vector_report);
  std::cout << "codebook hash: " << hex64(trained.set.content_hash) << "\n";
  return 0;
}

int cmd_encode(const Options& o, bool rate_given) {
  const CodebookSet set =
      load_codebooks(o.codebook, rate_given ? std::optional(rate_mode_from_bitrate(o.rate))
                                            : std::nullopt);
  const AudioBuffer audio = read_wav(o.input);
  require_codec_rate(audio);
  const EncodedStream stream = encode_audio(audio, set, o.beam);
  write_stream(stream, o.output);
  std::cout << "frames: " << stream.frame_count << "\n"
            << "payload bitrate: " << stream_bitrate(stream) << " bit/s\n";
  return 0;
}

int cmd_decode(const Options& o) {
  const CodebookSet set = load_codebooks(o.codebook);
  const EncodedStream stream = read_stream(o.input);
  const DecodeResult decoded = decode_stream(stream, set, o.gl_iters);
  write_wav(o.output, decoded.audio);
  if (!o.emit_mel.empty()) export_mel(decoded.mel, o.emit_mel);
  std::cout << "frames: " << stream.frame_count << "\n"
            << "samples: " << decoded.audio.size() << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  std::vector<std::array<std::string, 3>> pairs;
  if (!o.manifest.empty()) {
    std::ifstream in(o.manifest);
    if (!in) throw Error(ErrorKind::kIo, "cannot open manifest " + o.manifest);
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream fields(line);
      std::string ref, deg, id;
      if (!(fields >> ref) || ref.front() == '#') continue;
      if (!(fields >> deg))
        throw Error(ErrorKind::kFormat, "eval manifest line needs two paths: " + line);
      if (!(fields >> id)) id = deg;
      const auto base = std::filesystem::path(o.manifest).parent_path();
      pairs.push_back({(base / ref).string(), (base / deg).string(), id});
    }
  } else {
    if (o.input.empty() || o.output.empty())
      throw Error(ErrorKind::kInvalidArgument, "eval needs REF DEG or --manifest");
    pairs.push_back({o.input, o.output, o.output});
  }
  std::vector<QualityReport> reports;
  for (const auto& [ref, deg, id] : pairs)
    reports.push_back(evaluate_pair(read_wav(ref), read_wav(deg), id));

  std::ostringstream text;
  for (const auto& r : reports) text << format_report_line(r) << "\n";
  text << format_mean_footer(reports) << "\n";
  if (o.report.empty()) {
    std::cout << text.str();
  } else {
    std::ofstream out(o.report, std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + o.report);
    out << text.str();
    if (!out) throw Error(ErrorKind::kIo, "write failed: " + o.report);
  }
  return 0;
}

int cmd_inspect(const Options& o) {
  std::ifstream in(o.input, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + o.input);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  const std::string magic(bytes.begin(), bytes.begin() + std::min<std::size_t>(4, bytes.size()));
  if (magic == "MVQC") {
    const EncodedStream s = EncodedStream::from_bytes(bytes);
    std::cout << "stream: " << bit_rate(s.mode) << " bit/s mode, " << s.frame_count
              << " frames, " << s.payload.size() << " payload bytes, codebook "
              << hex64(s.codebook_hash) << "\n"
              << "payload bitrate: " << stream_bitrate(s) << " bit/s\n";
  } else if (magic == "MVQB") {
    const CodebookSet set = parse_codebooks(bytes);
    const BitAllocation a = set.allocation();
    std::cout << "codebook: " << bit_rate(set.mode) << " bit/s mode, " << a.sq_bits
              << "-bit SQ";
    for (int b : a.vq_bits) std::cout << ", " << b << "-bit VQ stage";
    std::cout << ", hash " << hex64(set.content_hash) << "\n";
  } else if (magic == "MELS") {
    const MelSpectrogram mel = import_mel(o.input);
    std::cout << "melspec: " << mel.values.rows() << " frames x " << mel.values.cols()
              << " bands, " << mel.config.sample_rate << " Hz, L=" << mel.config.frame_len
              << " R=" << mel.config.frame_shift << "\n";
  } else {
    throw Error(ErrorKind::kFormat, o.input + ": unrecognized file type");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"melvq: MFCC vector-quantization speech codec at 1000/2000 bit/s"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train a codebook set from a WAV manifest");
  train->add_option("--manifest", o.manifest, "Text file, one WAV path per line")->required();
  train->add_option("--rate", o.rate, "1000 or 2000")->check(CLI::IsMember({1000, 2000}));
  train->add_option("--codebook", o.codebook, "Output codebook (.mvqb)")->required();
  train->add_option("--sq-bits", o.sq_bits, "Energy SQ bits (default per rate)");
  train->add_option("--vq-bits", o.vq_bits, "VQ bits, 1000 bit/s mode (default 12)");
  train->add_option("--stage-bits", o.stage_bits, "MSVQ stage bits a,b (default 13,13)")
      ->delimiter(',')
      ->expected(2);

  auto* encode = app.add_subcommand("encode", "Encode a 16 kHz WAV to .mvqc");
  auto* enc_rate = encode->add_option("--rate", o.rate, "Require this rate mode")
                       ->check(CLI::IsMember({1000, 2000}));
  encode->add_option("input", o.input, "Input WAV")->required();
  encode->add_option("output", o.output, "Output stream")->required();
  encode->add_option("--codebook", o.codebook, "Codebook (.mvqb)")->required();
  encode->add_option("--beam", o.beam, "MSVQ beam width")->check(CLI::PositiveNumber);

  auto* decode = app.add_subcommand("decode", "Decode .mvqc to WAV with Griffin-Lim");
  decode->add_option("input", o.input, "Input stream")->required();
  decode->add_option("output", o.output, "Output WAV")->required();
  decode->add_option("--codebook", o.codebook, "Codebook (.mvqb)")->required();
  decode->add_option("--gl-iters", o.gl_iters, "Griffin-Lim iterations")
      ->check(CLI::PositiveNumber);
  decode->add_option("--emit-mel", o.emit_mel, "Also write the MELSPEC mel-spectrogram");

  auto* eval = app.add_subcommand("eval", "Objective quality of degraded vs reference");
  eval->add_option("reference", o.input, "Reference WAV");
  eval->add_option("degraded", o.output, "Degraded WAV");
  eval->add_option("--manifest", o.manifest, "Lines of 'ref deg [id]'");
  eval->add_option("--report", o.report, "Output report (default stdout)");

  auto* inspect = app.add_subcommand("inspect", "Describe a .mvqc, codebook or MELSPEC file");
  inspect->add_option("file", o.input)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) return cmd_train(o);
    if (encode->parsed()) return cmd_encode(o, enc_rate->count() > 0);
    if (decode->parsed()) return cmd_decode(o);
    if (eval->parsed()) return cmd_eval(o);
    if (inspect->parsed()) return cmd_inspect(o);
  } catch (const Error& e) {
    std::cerr << "melvq: " << e.what() << "\n";
    return exit_status(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "melvq: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
