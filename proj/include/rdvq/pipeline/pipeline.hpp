#pragma once

// Glue shared by the command-line tool and the end-to-end checks: encoding a
// corpus through a trained model, building minimal-pair triples, mixing
// noise into features, and the ABX / bitrate report rows.

#include <map>
#include <string>
#include <vector>

#include "rdvq/groundnet/model.hpp"
#include "rdvq/synth/abx_triples.hpp"
#include "rdvq/synth/corpus.hpp"
#include "rdvq/zeroeval/abx.hpp"
#include "rdvq/zeroeval/bitrate.hpp"

namespace rdvq {

// Output frame rate of a named tap ("conv1", "res1".."res4", "vq2", "vq3").
double tap_frame_rate(const AudioBranchConfig& cfg, const std::string& tap);
// 2 for "vq2", 3 for "vq3", 0 for any other tap.
int vq_layer_of(const std::string& tap);

struct NamedFeatures {
  std::string id;
  const Tensor<float>* features;  // frames x bins
};

std::vector<NamedFeatures> named_features(const std::vector<GroundedPair>& utts);

// Codes of an enabled, trained VQ layer for every utterance.
std::vector<UnitSequence> encode_units(ModelState& state, const std::vector<NamedFeatures>& utts, int layer);

// Continuous activations of a tap, frames x channels, for every utterance.
FeatureSet encode_features(ModelState& state, const std::vector<NamedFeatures>& utts, const std::string& tap);

FeatureSet input_features(const std::vector<NamedFeatures>& utts);

AbxEnumeration make_triples(const std::vector<GroundedPair>& utts, std::size_t max_triples, SpeakerMode mode,
                            uint64_t seed);

// Copies of `utts` with synthetic noise mixed into each utterance at an SNR
// drawn uniformly from [lo_db, hi_db].
std::vector<GroundedPair> add_feature_noise(const std::vector<GroundedPair>& utts, double lo_db, double hi_db,
                                            uint64_t seed);

struct UnitAbxOptions {
  AbxOptions abx;
  double frame_rate = 50.0;
  bool one_hot = false;  // otherwise codebook rows
};

// One row of the unit evaluation table.
struct UnitReport {
  double abx = 0, bitrate = 0, rle_bitrate = 0;
  double segment_abx = 0, segment_bitrate = 0;
  std::size_t triples_used = 0, skipped = 0;
};

UnitReport evaluate_units(const std::vector<UnitSequence>& units, const Tensor<float>& table,
                          std::size_t num_units, const std::vector<TripleRecord>& triples,
                          const UnitAbxOptions& opt, bool with_segment = true);

double total_duration_s(const std::vector<UnitSequence>& units, double frame_rate);

}  // namespace rdvq
