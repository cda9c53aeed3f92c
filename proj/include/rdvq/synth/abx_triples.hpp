#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rdvq/common.hpp"
#include "rdvq/io/formats.hpp"
#include "rdvq/synth/corpus.hpp"

namespace rdvq {

enum class SpeakerMode { kWithin, kAcross };

SpeakerMode parse_speaker_mode(const std::string& s);

// What triple enumeration needs to know about an utterance.
struct AnnotatedUtterance {
  std::string id;
  std::string speaker;
  std::vector<TimedLabel> phones;
};

std::vector<AnnotatedUtterance> annotations(const std::vector<GroundedPair>& utts);

// One occurrence of a phone trigram, spanning three consecutive phones.
struct TriphoneToken {
  std::size_t utt = 0;
  std::size_t start = 0, end = 0;  // frames
  std::string left, center, right;
};

std::vector<TriphoneToken> triphone_tokens(const std::vector<AnnotatedUtterance>& utts);

struct AbxEnumeration {
  std::vector<TripleRecord> triples;
  std::size_t total_valid = 0;  // before the cap
  std::size_t warnings = 0;     // contexts with a single center phone
};

// A and X share a triphone, B differs from A only in the center phone.
// Across mode: A and B share a speaker and X's speaker differs. Within mode:
// all three share a speaker. When the number of valid triples exceeds
// max_triples, a uniform sample without replacement is returned, in
// enumeration order. The contrast id encodes the ABX cell.
AbxEnumeration enumerate_abx_triples(const std::vector<AnnotatedUtterance>& utts,
                                     std::size_t max_triples, SpeakerMode mode, Rng& rng);

// Independent check of the minimal-pair and speaker constraints against the
// phone alignments. Returns an empty string when valid.
std::string validate_triple(const std::vector<AnnotatedUtterance>& utts, const TripleRecord& t,
                            SpeakerMode mode);

}  // namespace rdvq
