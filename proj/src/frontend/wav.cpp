#include "rdvq/frontend/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rdvq/common.hpp"

namespace rdvq {

namespace {

uint32_t le32(const unsigned char* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t le16(const unsigned char* p) { return uint16_t(p[0] | p[1] << 8); }

void put32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError(path + ": offset 0: not a RIFF/WAVE file");
  std::size_t pos = 12;
  bool have_fmt = false;
  uint32_t rate = 0;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size())
      throw DataError(str_cat(path, ": offset ", pos, ": truncated chunk"));
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw DataError(str_cat(path, ": offset ", pos, ": short fmt chunk"));
      const unsigned char* f = bytes.data() + body;
      const uint16_t format = le16(f), channels = le16(f + 2), bits = le16(f + 14);
      rate = le32(f + 4);
      if (format != 1 || channels != 1 || bits != 16)
        throw DataError(str_cat(path, ": offset ", body, ": only mono 16-bit PCM is supported (format=",
                                format, " channels=", channels, " bits=", bits, ")"));
      if (rate == 0) throw DataError(str_cat(path, ": offset ", body + 4, ": zero sample rate"));
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw DataError(str_cat(path, ": offset ", pos, ": data chunk before fmt"));
      Waveform w;
      w.sample_rate = rate;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const int16_t s = static_cast<int16_t>(le16(bytes.data() + body + 2 * i));
        w.samples[i] = s / 32768.0;
      }
      return w;
    }
    pos = body + size + (size & 1);
  }
  throw DataError(path + ": no data chunk");
}

void write_wav(const std::string& path, const Waveform& wave) {
  if (!(wave.sample_rate > 0)) throw std::invalid_argument("write_wav: sample rate must be > 0");
  const uint32_t rate = static_cast<uint32_t>(std::lround(wave.sample_rate));
  const uint32_t data_bytes = static_cast<uint32_t>(wave.samples.size() * 2);
  std::string out = "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, rate);
  put32(out, rate * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, data_bytes);
  for (double s : wave.samples) {
    const long v = std::lround(std::clamp(s, -1.0, 32767.0 / 32768.0) * 32768.0);
    put16(out, static_cast<uint16_t>(static_cast<int16_t>(v)));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path + ": cannot write");
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace rdvq
