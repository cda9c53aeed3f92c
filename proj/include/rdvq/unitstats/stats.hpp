#pragma once

#include <map>
#include <string>
#include <vector>

#include "rdvq/io/formats.hpp"
#include "rdvq/synth/corpus.hpp"

namespace rdvq {

using UnitMap = std::map<std::string, std::vector<int>>;
using TrackMap = std::map<std::string, std::vector<TimedLabel>>;  // intervals in 100 Hz frames

UnitMap to_unit_map(const std::vector<UnitSequence>& units);

struct ContingencyTable {
  std::vector<std::string> labels;          // sorted
  std::vector<int> units;                   // sorted
  std::vector<std::vector<double>> counts;  // [label][unit]
  std::size_t dropped = 0;                  // unit frames outside every interval

  double total() const;
};

// Each unit frame at `rate` Hz is credited to the interval holding its center time.
ContingencyTable cooccurrence(const UnitMap& units, double rate, const TrackMap& align);

struct ConditionalMatrix {
  std::vector<std::vector<double>> p;  // P(label | unit), [label][unit]
  std::vector<bool> empty_unit;        // unit column had no counts
};
ConditionalMatrix conditional_matrix(const ContingencyTable& t);

// 2 I(L;U) / (H(L) + H(U)), 0 log 0 = 0. A table whose marginals are both
// degenerate has all mass in one cell and scores 1.
double nmi(const std::vector<std::vector<double>>& counts);

struct WordDetectorRow {
  int code = 0;
  std::string word;
  double precision = 0, recall = 0, f1 = 0;
  std::size_t occ = 0;
  std::size_t code_runs = 0, word_tokens = 0;
};

enum class WordMatch { kMidpoint, kOverlap };
WordMatch parse_word_match(const std::string& s);

// One row per (code, word) pair with at least one matching run. A detection
// is a maximal run of one code; it matches the word token holding its
// temporal midpoint (or, in overlap mode, covering at least half the run).
std::vector<WordDetectorRow> word_detector_stats(const UnitMap& units, double rate, const TrackMap& words,
                                                 WordMatch match = WordMatch::kMidpoint);

// Best row per code, sorted by F1 descending with ties by code index.
std::vector<WordDetectorRow> rank_codes(const std::vector<WordDetectorRow>& rows);

// Distinct codes whose best F1 exceeds tau.
std::size_t f1_threshold_count(const std::vector<WordDetectorRow>& rows, double tau);

double f1_score(double precision, double recall);

// Plain-text reports.
std::string format_conditional_matrix(const ContingencyTable& t, const ConditionalMatrix& m);
std::string format_detector_report(const std::vector<WordDetectorRow>& rows);  // percentages
std::string format_threshold_curve(const std::vector<WordDetectorRow>& rows, const std::vector<double>& taus);
std::string format_unit_track(const std::string& utt, const std::vector<int>& codes, double rate);

}  // namespace rdvq
