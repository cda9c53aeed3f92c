#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace rdvq {

using Run = std::pair<int, std::size_t>;  // (unit, length)

std::vector<Run> rle_encode(const std::vector<int>& codes);
std::vector<int> rle_decode(const std::vector<Run>& runs);
// One symbol per run.
std::vector<int> segmentize(const std::vector<int>& codes);

enum class BitrateMode { kFrame, kRle, kSegment };
BitrateMode parse_bitrate_mode(const std::string& s);
const char* bitrate_mode_name(BitrateMode m);

// Empirical entropy in bits of a symbol histogram. Terms are summed in
// ascending count order so relabeling symbols cannot change the result.
double entropy_bits(std::vector<std::size_t> counts);

// (M / D) * H over the whole corpus, where M is the symbol count in the
// chosen encoding, D the total duration in seconds and H the empirical
// entropy of those symbols.
double bitrate(const std::vector<std::vector<int>>& corpus, double duration_s, BitrateMode mode);

struct BitrateReport {
  double frame = 0, rle = 0, segment = 0;
  std::size_t frames = 0, runs = 0;
};
BitrateReport all_bitrates(const std::vector<std::vector<int>>& corpus, double duration_s);

}  // namespace rdvq
