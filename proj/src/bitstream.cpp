// Copyright 2026  The melvq Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "melvq/bitstream.hpp"

#include <fstream>
#include <iterator>
#include <string>

#include "melvq/error.hpp"

namespace melvq {
namespace {

constexpr std::uint8_t kMagic[4] = {'M', 'V', 'Q', 'C'};

class BitWriter {
 public:
  void put(std::uint32_t value, int bits) {
    for (int b = bits - 1; b >= 0; --b) {
      if (fill_ == 0) bytes_.push_back(0);
      if ((value >> b) & 1u) bytes_.back() |= std::uint8_t(0x80u >> fill_);
      fill_ = (fill_ + 1) & 7;
    }
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  int fill_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t get(int bits) {
    std::uint32_t v = 0;
    for (int b = 0; b < bits; ++b, ++pos_)
      v = v << 1 | ((bytes_[pos_ >> 3] >> (7 - (pos_ & 7))) & 1u);
    return v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::size_t payload_bytes(RateMode mode, std::uint32_t frames) {
  const auto bits = static_cast<std::size_t>(wire_allocation(mode).frame_bits()) * frames;
  return (bits + 7) / 8;
}

}  // namespace

std::vector<std::uint8_t> EncodedStream::to_bytes() const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(mode));
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(frame_count >> (8 * i)));
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(codebook_hash >> (8 * i)));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

EncodedStream EncodedStream::from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize)
    throw Error(ErrorKind::kFormat, "stream truncated: incomplete header");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
    throw Error(ErrorKind::kFormat, "not an .mvqc stream (bad magic)");
  if (bytes[4] != kVersion)
    throw Error(ErrorKind::kFormat, "unsupported stream version " + std::to_string(bytes[4]));
  const auto mode = rate_mode_from_byte(bytes[5]);
  if (!mode) throw Error(ErrorKind::kFormat, "bad rate-mode byte " + std::to_string(bytes[5]));

  EncodedStream s;
  s.mode = *mode;
  for (int i = 3; i >= 0; --i) s.frame_count = s.frame_count << 8 | bytes[6 + i];
  for (int i = 7; i >= 0; --i) s.codebook_hash = s.codebook_hash << 8 | bytes[10 + i];

  const std::size_t want = payload_bytes(s.mode, s.frame_count);
  const std::size_t have = bytes.size() - kHeaderSize;
  if (have < want)
    throw Error(ErrorKind::kFormat,
                "stream truncated: payload " + std::to_string(have) + " bytes, " +
                    std::to_string(want) + " expected for " +
                    std::to_string(s.frame_count) + " frames");
  if (have > want)
    throw Error(ErrorKind::kFormat,
                "trailing garbage: " + std::to_string(have - want) +
                    " bytes after the payload");
  s.payload.assign(bytes.begin() + kHeaderSize, bytes.end());
  const auto used_bits =
      static_cast<std::size_t>(wire_allocation(s.mode).frame_bits()) * s.frame_count;
  if (used_bits % 8 != 0 && (s.payload.back() & (0xFFu >> (used_bits % 8))) != 0)
    throw Error(ErrorKind::kFormat, "trailing garbage in padding bits");
  return s;
}

EncodedStream pack(std::span<const FrameCode> codes, RateMode mode,
                   std::uint64_t codebook_hash) {
  const BitAllocation wire = wire_allocation(mode);
  BitWriter writer;
  for (std::size_t f = 0; f < codes.size(); ++f) {
    const FrameCode& code = codes[f];
    if (code.vq_indices.size() != wire.vq_bits.size())
      throw Error(ErrorKind::kInvalidArgument,
                  "pack: frame " + std::to_string(f) + " has the wrong number of VQ indices");
    if (code.sq_index >> wire.sq_bits)
      throw Error(ErrorKind::kInvalidArgument,
                  "pack: frame " + std::to_string(f) + " SQ index out of range");
    writer.put(code.sq_index, wire.sq_bits);
    for (std::size_t s = 0; s < wire.vq_bits.size(); ++s) {
      if (code.vq_indices[s] >> wire.vq_bits[s])
        throw Error(ErrorKind::kInvalidArgument,
                    "pack: frame " + std::to_string(f) + " VQ index out of range");
      writer.put(code.vq_indices[s], wire.vq_bits[s]);
    }
  }
  EncodedStream s;
  s.mode = mode;
  s.frame_count = static_cast<std::uint32_t>(codes.size());
  s.codebook_hash = codebook_hash;
  s.payload = writer.take();
  return s;
}

std::vector<FrameCode> unpack(const EncodedStream& stream) {
  if (stream.payload.size() != payload_bytes(stream.mode, stream.frame_count))
    throw Error(ErrorKind::kFormat, "unpack: payload length does not match frame count");
  const BitAllocation wire = wire_allocation(stream.mode);
  BitReader reader(stream.payload);
  std::vector<FrameCode> codes(stream.frame_count);
  for (FrameCode& code : codes) {
    code.sq_index = reader.get(wire.sq_bits);
    code.vq_indices.resize(wire.vq_bits.size());
    for (std::size_t s = 0; s < wire.vq_bits.size(); ++s)
      code.vq_indices[s] = reader.get(wire.vq_bits[s]);
  }
  return codes;
}

UnpackedStream unpack(std::span<const std::uint8_t> bytes) {
  const EncodedStream s = EncodedStream::from_bytes(bytes);
  return {s.mode, s.codebook_hash, unpack(s)};
}

double bitrate_for(int bits_per_frame, const FrameConfig& cfg) {
  // bits * f_s / R is exact for the codec's integer parameters.
  return static_cast<double>(static_cast<long long>(bits_per_frame) * cfg.sample_rate) /
         cfg.frame_shift;
}

double stream_bitrate(const EncodedStream& stream, const FrameConfig& cfg) {
  return bitrate_for(wire_allocation(stream.mode).frame_bits(), cfg);
}

void write_stream(const EncodedStream& stream, const std::filesystem::path& path) {
  const auto bytes = stream.to_bytes();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "write failed: " + path.string());
}

EncodedStream read_stream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open stream " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return EncodedStream::from_bytes(bytes);
}

}  // namespace melvq
