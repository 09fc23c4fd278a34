// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melvq/signal_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "melvq/error.hpp"

namespace melvq {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
         std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

std::uint16_t le16(const std::uint8_t* p) {
  return std::uint16_t(p[0] | p[1] << 8);
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xFF));
  out.push_back(char(v >> 8));
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (data.size() < 12 || std::memcmp(data.data(), "RIFF", 4) != 0 ||
      std::memcmp(data.data() + 8, "WAVE", 4) != 0)
    throw Error(ErrorKind::kFormat, name + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* pcm = nullptr;
  std::size_t pcm_bytes = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= data.size()) {
    const std::uint8_t* chunk = data.data() + pos;
    std::uint32_t size = le32(chunk + 4);
    std::size_t body = pos + 8;
    std::size_t avail = data.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || avail < 16)
        throw Error(ErrorKind::kFormat, name + ": truncated fmt chunk");
      const std::uint8_t* f = data.data() + body;
      format = le16(f);
      channels = le16(f + 2);
      rate = le32(f + 4);
      bits = le16(f + 14);
      if (format == kFormatExtensible && size >= 26 && avail >= 26)
        format = le16(f + 24);  // sub-format GUID starts with the format tag
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      pcm = data.data() + body;
      pcm_bytes = std::min<std::size_t>(size, avail);
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt || pcm == nullptr)
    throw Error(ErrorKind::kFormat, name + ": missing fmt or data chunk");
  if (format != kFormatPcm)
    throw Error(ErrorKind::kFormat,
                name + ": unsupported encoding " + std::to_string(format) +
                    " (integer PCM only)");
  if (bits != 16 && bits != 24 && bits != 32)
    throw Error(ErrorKind::kFormat,
                name + ": unsupported bit depth " + std::to_string(bits));
  if (channels == 0 || rate == 0)
    throw Error(ErrorKind::kFormat, name + ": bad channel count or rate");

  const std::size_t width = bits / 8;
  const std::size_t frames = pcm_bytes / (width * channels);
  const double scale = std::ldexp(1.0, -(bits - 1));

  AudioBuffer out;
  out.sample_rate_hz = static_cast<int>(rate);
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = pcm + (i * channels + c) * width;
      std::int32_t v;
      if (bits == 16) {
        v = std::int16_t(le16(p));
      } else if (bits == 24) {
        v = std::int32_t(std::uint32_t(p[0]) << 8 | std::uint32_t(p[1]) << 16 |
                         std::uint32_t(p[2]) << 24) >> 8;
      } else {
        v = std::int32_t(le32(p));
      }
      acc += v * scale;
    }
    out.samples[i] = acc / channels;
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(audio.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out.append("RIFF");
  put32(out, 36 + data_bytes);
  out.append("WAVEfmt ");
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(audio.sample_rate_hz));
  put32(out, static_cast<std::uint32_t>(audio.sample_rate_hz) * 2);
  put16(out, 2);
  put16(out, 16);
  out.append("data");
  put32(out, data_bytes);
  for (double s : audio.samples) {
    if (!std::isfinite(s))
      throw Error(ErrorKind::kInvalidArgument, "non-finite sample");
    double v = std::clamp(s, -1.0, 1.0) * 32768.0;
    long q = std::lround(v);
    q = std::clamp(q, -32768L, 32767L);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

void require_codec_rate(const AudioBuffer& audio) {
  if (audio.sample_rate_hz != kCodecSampleRate)
    throw Error(ErrorKind::kSampleRate,
                "sample rate " + std::to_string(audio.sample_rate_hz) +
                    " Hz not supported; the codec requires " +
                    std::to_string(kCodecSampleRate) + " Hz");
}

}  // namespace melvq
