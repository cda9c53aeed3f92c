#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rdvq/io/formats.hpp"
#include "rdvq/zeroeval/dtw.hpp"

namespace rdvq {

enum class Aggregation { kCell, kFlat };
Aggregation parse_aggregation(const std::string& s);

inline constexpr double kInputFrameRate = 100.0;

// Frames [first, last) of a sequence at `rate` Hz whose centers fall inside
// the 100 Hz segment [start, end). A segment too short to contain any
// center maps to the frame holding its midpoint. Clamped to n_frames.
std::pair<std::size_t, std::size_t> frames_in_segment(std::size_t start, std::size_t end, double rate,
                                                      std::size_t n_frames);

// Returns the features of a segment as frames x dim, or nothing when the
// segment cannot be resolved.
using SegmentExtractor = std::function<std::optional<Tensor<float>>(const SegmentRef&)>;

// Dense per-utterance features (frames x dim) at a common frame rate.
struct FeatureSet {
  std::map<std::string, Tensor<float>> utts;
  double frame_rate = kInputFrameRate;
};

SegmentExtractor feature_extractor(const FeatureSet& set);

// Unit sequences embedded frame by frame, either through a K x D code table
// or as one-hot vectors when `table` is empty. In segment mode the codes of
// each segment are collapsed to one symbol per run before embedding.
struct UnitFeatureOptions {
  double frame_rate = 50.0;
  bool segment = false;
};
SegmentExtractor unit_extractor(const std::map<std::string, std::vector<int>>& units,
                                const Tensor<float>& table, std::size_t num_units,
                                const UnitFeatureOptions& opt);

struct AbxOptions {
  FrameMetric metric = FrameMetric::kCosine;
  Aggregation aggregation = Aggregation::kCell;
  std::size_t threads = 1;
};

struct AbxResult {
  double error = 0;  // in [0, 1]
  std::size_t triples_used = 0;
  std::size_t skipped = 0;
  std::map<std::string, double> cell_error;
  std::vector<double> scores;  // per triple in input order, NaN when skipped
};

// Per triple: 1 if d(A,X) > d(B,X), 0.5 on equality, 0 otherwise. Cell mode
// averages within each contrast id, then across contrast ids.
AbxResult abx_error(const std::vector<TripleRecord>& triples, const SegmentExtractor& extract,
                    const AbxOptions& opt);

}  // namespace rdvq
