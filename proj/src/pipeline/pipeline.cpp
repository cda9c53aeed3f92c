#include "rdvq/pipeline/pipeline.hpp"

#include "rdvq/frontend/mixing.hpp"
#include "rdvq/simd/kernels.hpp"

namespace rdvq {

namespace {

std::size_t tap_block(const std::string& tap) {
  if (tap == "conv1") return 0;
  if (tap == "res1") return 1;
  if (tap == "res2" || tap == "vq2") return 2;
  if (tap == "res3" || tap == "vq3") return 3;
  if (tap == "res4") return 4;
  throw UsageError("unknown layer '" + tap + "' (choose conv1, res1, res2, vq2, res3, vq3 or res4)");
}

}  // namespace

double tap_frame_rate(const AudioBranchConfig& cfg, const std::string& tap) {
  double rate = kInputFrameRate;
  for (std::size_t b = 0; b < tap_block(tap); ++b) rate /= double(cfg.strides[b]);
  return rate;
}

int vq_layer_of(const std::string& tap) {
  tap_block(tap);
  if (tap == "vq2") return 2;
  if (tap == "vq3") return 3;
  return 0;
}

std::vector<NamedFeatures> named_features(const std::vector<GroundedPair>& utts) {
  std::vector<NamedFeatures> out;
  for (const auto& g : utts) out.push_back({g.id, &g.features});
  return out;
}

std::vector<UnitSequence> encode_units(ModelState& state, const std::vector<NamedFeatures>& utts, int layer) {
  const Codebook<float>& cb = state.codebook(layer);
  if (!cb.enabled || cb.needs_init)
    throw DataError(str_cat("VQ", layer, " is not enabled and trained in this checkpoint"));
  std::vector<UnitSequence> out;
  for (const auto& u : utts) {
    AudioEmbedding e = embed_audio(*u.features, state);
    out.push_back({u.id, e.codes.at(layer)});
  }
  return out;
}

FeatureSet encode_features(ModelState& state, const std::vector<NamedFeatures>& utts, const std::string& tap) {
  FeatureSet set;
  set.frame_rate = tap_frame_rate(state.config, tap);
  for (const auto& u : utts) {
    AudioEmbedding e = embed_audio(*u.features, state);
    const auto it = e.taps.find(tap);
    if (it == e.taps.end()) throw DataError("layer " + tap + " produced no output for " + u.id);
    const Tensor<float>& cf = it->second;
    Tensor<float> ft({cf.dim(1), cf.dim(0)});
    simd::transpose(cf.dim(0), cf.dim(1), cf.data(), ft.data());
    set.utts[u.id] = std::move(ft);
  }
  return set;
}

FeatureSet input_features(const std::vector<NamedFeatures>& utts) {
  FeatureSet set;
  for (const auto& u : utts) set.utts[u.id] = *u.features;
  return set;
}

AbxEnumeration make_triples(const std::vector<GroundedPair>& utts, std::size_t max_triples, SpeakerMode mode,
                            uint64_t seed) {
  Rng rng(fnv1a64(str_cat("triples/", seed)));
  return enumerate_abx_triples(annotations(utts), max_triples, mode, rng);
}

std::vector<GroundedPair> add_feature_noise(const std::vector<GroundedPair>& utts, double lo_db, double hi_db,
                                            uint64_t seed) {
  Rng rng(fnv1a64(str_cat("noise/", seed, "/", lo_db, "/", hi_db)));
  std::vector<GroundedPair> out = utts;
  for (auto& g : out) {
    const double snr = sample_snr(lo_db, hi_db, rng);
    Spectrogram noise(noise_features(g.num_frames(), g.features.dim(1), rng));
    g.features = mix_spectrogram_at_snr(Spectrogram(g.features), noise, snr).frames;
  }
  return out;
}

double total_duration_s(const std::vector<UnitSequence>& units, double frame_rate) {
  std::size_t frames = 0;
  for (const auto& u : units) frames += u.codes.size();
  return double(frames) / frame_rate;
}

UnitReport evaluate_units(const std::vector<UnitSequence>& units, const Tensor<float>& table,
                          std::size_t num_units, const std::vector<TripleRecord>& triples,
                          const UnitAbxOptions& opt, bool with_segment) {
  std::map<std::string, std::vector<int>> by_id;
  std::vector<std::vector<int>> corpus;
  for (const auto& u : units) {
    by_id[u.utt_id] = u.codes;
    corpus.push_back(u.codes);
  }
  const Tensor<float> none;
  const Tensor<float>& t = opt.one_hot ? none : table;
  UnitReport r;
  const AbxResult frame = abx_error(
      triples, unit_extractor(by_id, t, num_units, {opt.frame_rate, false}), opt.abx);
  r.abx = frame.error;
  r.triples_used = frame.triples_used;
  r.skipped = frame.skipped;
  const BitrateReport br = all_bitrates(corpus, total_duration_s(units, opt.frame_rate));
  r.bitrate = br.frame;
  r.rle_bitrate = br.rle;
  r.segment_bitrate = br.segment;
  if (with_segment)
    r.segment_abx = abx_error(triples, unit_extractor(by_id, t, num_units, {opt.frame_rate, true}), opt.abx).error;
  return r;
}

}  // namespace rdvq
