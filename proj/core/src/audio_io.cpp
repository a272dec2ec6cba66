// SPDX-License-Identifier: Apache-2.0
#include "melvc/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "melvc/errors.hpp"

namespace melvc {

namespace {

std::uint32_t read_u32(std::span<const std::byte> b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) |
         (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::byte> b, std::size_t off) {
  return static_cast<std::uint16_t>(static_cast<std::uint16_t>(b[off]) |
                                    (static_cast<std::uint16_t>(b[off + 1]) << 8));
}

bool tag_is(std::span<const std::byte> b, std::size_t off, const char* tag) {
  return std::memcmp(b.data() + off, tag, 4) == 0;
}

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

void put_u16(std::vector<std::byte>& out, std::uint16_t v) {
  out.push_back(static_cast<std::byte>(v & 0xff));
  out.push_back(static_cast<std::byte>(v >> 8));
}

void put_tag(std::vector<std::byte>& out, const char* tag) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>(tag[i]));
}

}  // namespace

Waveform::Waveform(std::vector<double> s, int rate) : samples(std::move(s)), sample_rate(rate) {
  if (rate <= 0) throw ParamError("sample rate must be positive");
  for (double& x : samples) {
    if (!std::isfinite(x)) throw ParamError("non-finite sample");
    if (x > 1.0 || x < -1.0) {
      x = std::clamp(x, -1.0, 1.0);
      ++clipped;
    }
  }
}

double Waveform::duration_seconds() const {
  return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
}

bool is_corpus_rate(int rate) { return rate == 16000 || rate == 22050 || rate == 24000; }

Waveform parse_wav(std::span<const std::byte> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE"))
    throw FormatError("not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::uint16_t bits = 0;
  std::uint32_t rate = 0;
  std::size_t off = 12;
  while (off + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = read_u32(bytes, off + 4);
    const std::size_t body = off + 8;
    if (chunk_size > bytes.size() - body) throw FormatError("chunk extends past end of file");

    if (tag_is(bytes, off, "fmt ")) {
      if (chunk_size < 16) throw FormatError("fmt chunk too small");
      const std::uint16_t format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      if (format != 1) throw UnsupportedError("only PCM WAV is supported (format " + std::to_string(format) + ")");
      if (bits != 16) throw UnsupportedError("only 16-bit PCM is supported (got " + std::to_string(bits) + " bits)");
      if (channels != 1 && channels != 2)
        throw UnsupportedError("only mono or stereo WAV is supported");
      if (rate == 0 || rate > 1000000) throw FormatError("invalid sample rate");
      have_fmt = true;
    } else if (tag_is(bytes, off, "data")) {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk");
      const std::size_t frame_bytes = 2u * channels;
      const std::size_t frames = chunk_size / frame_bytes;
      std::vector<double> samples(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const auto raw = static_cast<std::int16_t>(read_u16(bytes, body + i * frame_bytes + 2 * c));
          acc += static_cast<double>(raw) / 32768.0;
        }
        samples[i] = acc / static_cast<double>(channels);
      }
      return Waveform(std::move(samples), static_cast<int>(rate));
    }
    off = body + chunk_size + (chunk_size & 1u);
  }
  throw FormatError(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_wav(std::as_bytes(std::span(raw)));
}

std::vector<std::byte> encode_wav(const Waveform& w) {
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::vector<std::byte> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double x : w.samples) {
    const double scaled = std::round(x * 32768.0);
    const auto code = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(code));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  const auto bytes = encode_wav(w);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace melvc
