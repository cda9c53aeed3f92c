#pragma once

// On-disk formats shared by the command-line tools.
//
//   features   "VQGF", u32 version, u32 rows, u32 cols, rows*cols f32 (all LE)
//   units      utt_id<TAB>c0 c1 ...            one utterance per line
//   alignment  utt_id<TAB>start_s<TAB>end_s<TAB>tier<TAB>label
//   triples    idA idB idX contrast_id         ids are utt:start:end frames
//   images     utt_id<TAB>v0 v1 ...            %.9g floats

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rdvq/diffcore/tensor.hpp"

namespace rdvq {

inline constexpr uint32_t kFeatureFormatVersion = 1;

// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

std::string encode_features(const Tensor<float>& m);
Tensor<float> decode_features(const std::string& bytes, const std::string& source = "<bytes>");
void write_features(const std::string& path, const Tensor<float>& m);
Tensor<float> read_features(const std::string& path);

struct UnitSequence {
  std::string utt_id;
  std::vector<int> codes;

  bool operator==(const UnitSequence&) const = default;
};

std::string format_units(const std::vector<UnitSequence>& units);
std::vector<UnitSequence> parse_units(const std::string& text, const std::string& source = "<text>");
void write_units(const std::string& path, const std::vector<UnitSequence>& units);
std::vector<UnitSequence> read_units(const std::string& path);

struct AlignmentInterval {
  std::string utt_id;
  double start_s = 0;
  double end_s = 0;
  std::string tier;  // "phone" or "word"
  std::string label;

  bool operator==(const AlignmentInterval&) const = default;
};

std::string format_alignments(const std::vector<AlignmentInterval>& rows);
// Rejects overlapping intervals within one (utterance, tier).
std::vector<AlignmentInterval> parse_alignments(const std::string& text,
                                                const std::string& source = "<text>");
void write_alignments(const std::string& path, const std::vector<AlignmentInterval>& rows);
std::vector<AlignmentInterval> read_alignments(const std::string& path);

// A frame range [start, end) of an utterance, at the 10 ms input frame rate.
struct SegmentRef {
  std::string utt_id;
  std::size_t start = 0;
  std::size_t end = 0;

  std::string id() const;
  static SegmentRef parse(const std::string& id);
  bool operator==(const SegmentRef&) const = default;
  auto operator<=>(const SegmentRef&) const = default;
};

struct TripleRecord {
  SegmentRef a, b, x;
  std::string contrast;

  bool operator==(const TripleRecord&) const = default;
};

std::string format_triples(const std::vector<TripleRecord>& triples);
std::vector<TripleRecord> parse_triples(const std::string& text, const std::string& source = "<text>");
void write_triples(const std::string& path, const std::vector<TripleRecord>& triples);
std::vector<TripleRecord> read_triples(const std::string& path);

std::string format_image_features(const std::vector<std::pair<std::string, std::vector<float>>>& rows);
std::vector<std::pair<std::string, std::vector<float>>> parse_image_features(
    const std::string& text, const std::string& source = "<text>");

}  // namespace rdvq
