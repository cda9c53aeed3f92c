#pragma once

// Toy grounded corpus generated directly in the log-Mel domain: a lexicon of
// phone strings, smooth per-phone spectral templates, speakers that warp
// gain and tempo, and image vectors built from per-word object vectors.

#include <cstddef>
#include <string>
#include <vector>

#include "rdvq/common.hpp"
#include "rdvq/diffcore/tensor.hpp"
#include "rdvq/io/config.hpp"
#include "rdvq/io/formats.hpp"

namespace rdvq {

struct SynthConfig {
  std::size_t phones = 12;
  std::size_t words = 40;
  std::size_t speakers = 20;
  std::size_t train_utts = 2000;
  std::size_t val_utts = 200;
  std::size_t bins = 40;
  std::size_t image_dim = 64;
  std::size_t min_words = 4, max_words = 8;
  std::size_t min_word_phones = 2, max_word_phones = 4;
  std::size_t min_phone_frames = 6, max_phone_frames = 12;
  double zipf = 1.0;
  std::size_t function_words = 4;
  double frame_noise = 0.5;
  double image_noise = 0.1;
  double template_margin = 3.0;
  uint64_t seed = 1;

  static SynthConfig from(const Config& cfg);
};

struct ToyLexicon {
  std::size_t num_phones = 0;
  std::vector<std::vector<int>> spellings;  // word -> phone ids

  std::string phone_name(int p) const;
  std::string word_name(int w) const;
};

struct PhoneTemplate {
  std::vector<float> mel_profile;
  std::size_t min_frames = 6, max_frames = 12;
};

struct SpeakerProfile {
  std::string id;
  std::vector<float> gain;  // positive, multiplies Mel power
  double tempo = 1.0;
  double noise = 0.5;       // frame noise standard deviation
};

// [start, end) in 10 ms frames.
struct TimedLabel {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string label;

  bool operator==(const TimedLabel&) const = default;
};

struct GroundedPair {
  std::string id;
  std::string speaker;
  Tensor<float> features;  // frames x bins, log Mel power
  std::vector<float> image;
  std::vector<TimedLabel> words;
  std::vector<TimedLabel> phones;

  std::size_t num_frames() const { return features.empty() ? 0 : features.dim(0); }
};

struct SynthCorpus {
  SynthConfig config;
  ToyLexicon lexicon;
  std::vector<PhoneTemplate> templates;
  std::vector<SpeakerProfile> speakers;
  std::vector<std::vector<float>> objects;  // empty for function words
  std::vector<double> word_probs;
  std::vector<GroundedPair> train;
  std::vector<GroundedPair> val;
};

ToyLexicon make_lexicon(std::size_t phones, std::size_t words, std::size_t min_len,
                        std::size_t max_len, Rng& rng);

SynthCorpus generate_corpus(const SynthConfig& cfg);

// Renders a phone sequence for one speaker; durations are template ranges
// scaled by tempo. `phone_track` receives the frame intervals.
Tensor<float> render_phones(const SynthCorpus& corpus, const std::vector<int>& phones,
                            const SpeakerProfile& speaker, Rng& rng,
                            std::vector<TimedLabel>* phone_track);

// Non-speech noise in the same log-Mel domain (smooth random spectral shape
// with per-frame fluctuation), for SNR mixing.
Tensor<float> noise_features(std::size_t frames, std::size_t bins, Rng& rng);

// Throws DataError unless the labels tile [0, frames) without gaps.
void check_tiling(const std::vector<TimedLabel>& track, std::size_t frames, const std::string& what);

// Alignment intervals in seconds for both tiers.
std::vector<AlignmentInterval> alignment_rows(const std::vector<GroundedPair>& utts);

// Converts parsed alignment rows for one tier back into frame tracks per utterance.
std::map<std::string, std::vector<TimedLabel>> tracks_from_alignments(
    const std::vector<AlignmentInterval>& rows, const std::string& tier);

// Directory layout:
//   feats/<utt>.vqgf  images.tsv  align.tsv  speakers.tsv  train.list  val.list
void write_corpus_dir(const std::string& dir, const SynthCorpus& corpus);

struct CorpusSplits {
  std::vector<GroundedPair> train;
  std::vector<GroundedPair> val;
};
CorpusSplits read_corpus_dir(const std::string& dir);

}  // namespace rdvq
