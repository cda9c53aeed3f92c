#include "rdvq/zeroeval/bitrate.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "rdvq/common.hpp"

namespace rdvq {

std::vector<Run> rle_encode(const std::vector<int>& codes) {
  std::vector<Run> runs;
  for (int c : codes) {
    if (!runs.empty() && runs.back().first == c) ++runs.back().second;
    else runs.emplace_back(c, 1);
  }
  return runs;
}

std::vector<int> rle_decode(const std::vector<Run>& runs) {
  std::vector<int> out;
  for (const auto& [c, n] : runs) out.insert(out.end(), n, c);
  return out;
}

std::vector<int> segmentize(const std::vector<int>& codes) {
  std::vector<int> out;
  for (int c : codes)
    if (out.empty() || out.back() != c) out.push_back(c);
  return out;
}

BitrateMode parse_bitrate_mode(const std::string& s) {
  if (s == "frame") return BitrateMode::kFrame;
  if (s == "rle") return BitrateMode::kRle;
  if (s == "segment") return BitrateMode::kSegment;
  throw UsageError("bitrate mode must be frame, rle or segment, got '" + s + "'");
}

const char* bitrate_mode_name(BitrateMode m) {
  switch (m) {
    case BitrateMode::kFrame: return "frame";
    case BitrateMode::kRle: return "rle";
    case BitrateMode::kSegment: return "segment";
  }
  return "?";
}

double entropy_bits(std::vector<std::size_t> counts) {
  std::sort(counts.begin(), counts.end());
  double total = 0;
  for (std::size_t c : counts) total += double(c);
  if (total <= 0) return 0.0;
  double h = 0;
  for (std::size_t c : counts)
    if (c) {
      const double p = double(c) / total;
      h -= p * std::log2(p);
    }
  return h;
}

namespace {

template <typename Symbol>
std::pair<std::size_t, double> count_and_entropy(const std::vector<Symbol>& symbols) {
  std::map<Symbol, std::size_t> hist;
  for (const auto& s : symbols) ++hist[s];
  std::vector<std::size_t> counts;
  for (const auto& [s, c] : hist) counts.push_back(c);
  return {symbols.size(), entropy_bits(std::move(counts))};
}

}  // namespace

double bitrate(const std::vector<std::vector<int>>& corpus, double duration_s, BitrateMode mode) {
  if (!(duration_s > 0)) throw DataError("bitrate: total duration must be positive");
  std::pair<std::size_t, double> mh;
  if (mode == BitrateMode::kRle) {
    std::vector<Run> all;
    for (const auto& seq : corpus) {
      auto r = rle_encode(seq);
      all.insert(all.end(), r.begin(), r.end());
    }
    mh = count_and_entropy(all);
  } else {
    std::vector<int> all;
    for (const auto& seq : corpus) {
      const auto s = mode == BitrateMode::kSegment ? segmentize(seq) : seq;
      all.insert(all.end(), s.begin(), s.end());
    }
    mh = count_and_entropy(all);
  }
  return double(mh.first) / duration_s * mh.second;
}

BitrateReport all_bitrates(const std::vector<std::vector<int>>& corpus, double duration_s) {
  BitrateReport r;
  r.frame = bitrate(corpus, duration_s, BitrateMode::kFrame);
  r.rle = bitrate(corpus, duration_s, BitrateMode::kRle);
  r.segment = bitrate(corpus, duration_s, BitrateMode::kSegment);
  for (const auto& s : corpus) {
    r.frames += s.size();
    r.runs += rle_encode(s).size();
  }
  return r;
}

}  // namespace rdvq
