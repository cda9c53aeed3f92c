#pragma once

// Desk-scale ResDAVEnet-VQ: conv0 over the full Mel axis, four 1-D residual
// blocks with VQ insertion points after blocks 2 and 3, temporal mean
// pooling, and a linear image branch over precomputed feature vectors.

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rdvq/diffcore/ops.hpp"
#include "rdvq/io/config.hpp"
#include "rdvq/quantizer/codebook.hpp"

namespace rdvq {

struct AudioBranchConfig {
  std::size_t input_bins = 40;
  std::size_t conv0_width = 1;
  std::vector<std::size_t> widths{64, 128, 256, 256};
  std::vector<std::size_t> strides{1, 2, 2, 2};
  std::size_t convs_per_block = 2;
  std::size_t kernel_width = 9;
  bool batchnorm = true;
  std::size_t embed_dim = 256;
  std::size_t image_dim = 64;

  static AudioBranchConfig from(const Config& cfg);
  void validate() const;
  // Input frames needed for every block to produce at least one frame.
  std::size_t min_frames() const;
  // Frames at the output of block b (1-based) for an input of T frames.
  std::size_t frames_after_block(std::size_t T, std::size_t block) const;
};

inline constexpr std::array<int, 2> kVqLayers{2, 3};

struct ModelState {
  AudioBranchConfig config;
  QuantizerConfig quantizer;
  std::map<std::string, Parameter<float>> params;
  std::map<std::string, BatchNormStats<float>> bn;
  std::array<Codebook<float>, 2> vq;  // VQ2, VQ3
  uint64_t config_hash = 0;

  Codebook<float>& codebook(int layer);
  const Codebook<float>& codebook(int layer) const;
  std::set<int> enabled_layers() const;
  std::size_t parameter_count() const;
};

// Fresh weights from `seed`. Codebooks are allocated, disabled and awaiting init.
ModelState build_model(const AudioBranchConfig& cfg, const QuantizerConfig& qcfg, uint64_t seed,
                       uint64_t config_hash = 0);

// Enables exactly `layers` (subset of {2, 3}); layers never trained are
// marked for data-dependent init at the next training batch.
void enable_layers(ModelState& state, const std::set<int>& layers);

// Copies all weights, batch-norm statistics and trained codebooks from
// `source`. An untrained source codebook leaves the target's own codebook
// in place, whatever its size. Throws DataError listing every shape mismatch.
void warm_start(ModelState& state, const ModelState& source);

struct ForwardOptions {
  Mode mode = Mode::kEval;
  Rng* rng = nullptr;      // jitter and codebook init in train mode
  bool keep_taps = false;
};

struct AudioForward {
  Var<float> embeddings;  // embed_dim x B
  std::map<std::string, Var<float>> taps;
  // Per VQ layer (index 0 = VQ2): packed encoder outputs before quantization
  // and their codes, empty when the layer was bypassed.
  std::array<Tensor<float>, 2> pre_quant;
  std::array<std::vector<int>, 2> codes;
  std::array<std::vector<std::size_t>, 2> segments;
};

// specs are frames x bins. Codebooks awaiting init are seeded from this
// batch in train mode and bypassed in eval mode.
AudioForward audio_forward(Graph<float>& g, ModelState& state,
                           const std::vector<const Tensor<float>*>& specs, const ForwardOptions& opt);

// feats: image_dim x B.
Var<float> image_forward(Graph<float>& g, ModelState& state, const Tensor<float>& feats, Mode mode);

// S[j][k] = i_j . a_k; rows are images, columns audio.
Var<float> similarity_matrix(Var<float> image_emb, Var<float> audio_emb);
Tensor<float> similarity_matrix(const Tensor<float>& image_emb, const Tensor<float>& audio_emb);

struct AudioEmbedding {
  std::vector<float> embedding;
  std::map<std::string, Tensor<float>> taps;  // channels x frames at native rate
  std::map<int, std::vector<int>> codes;      // per enabled, initialized VQ layer
};

AudioEmbedding embed_audio(const Tensor<float>& spec, ModelState& state, Mode mode = Mode::kEval);
std::vector<float> embed_image(const std::vector<float>& feat, ModelState& state);

// Eval-mode embeddings of many inputs, processed in batches: embed_dim x N.
Tensor<float> embed_audio_batch(const std::vector<const Tensor<float>*>& specs, ModelState& state,
                                std::size_t batch = 64);
Tensor<float> embed_image_batch(const std::vector<const std::vector<float>*>& feats, ModelState& state);

// Names of the taps exposed by audio_forward in order.
std::vector<std::string> tap_names();

}  // namespace rdvq
