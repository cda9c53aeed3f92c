#pragma once

#include <string>
#include <vector>

namespace rdvq {

struct Waveform {
  std::vector<double> samples;
  double sample_rate = 16000.0;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Mono 16-bit little-endian PCM only. Samples are scaled to [-1, 1).
// Throws DataError on anything else.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& wave);

}  // namespace rdvq
