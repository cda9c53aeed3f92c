#pragma once

// Binary checkpoint, all little-endian:
//   "RDVQ" u32 version u64 config_hash
//   str stage  u32 epoch  f64 r10_a2i f64 r10_i2a f64 r10_avg
//   str config (canonical text of the model and quantizer sections)
//   u32 n_tensors, then per tensor sorted by name: str name, u32 rank, u32 dims..., f32 values
//   per VQ layer 2, 3: u8 enabled u8 needs_init, tensors E, ema_count, ema_sum
// where str is u32 length + bytes. Loading then saving reproduces the bytes.

#include <string>

#include "rdvq/groundnet/model.hpp"

namespace rdvq {

inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::string stage = "";
  uint32_t epoch = 0;
  double r10_a2i = 0, r10_i2a = 0, r10_avg = 0;

  bool operator==(const CheckpointMeta&) const = default;
};

// The model and quantizer sections of a config, in canonical form.
std::string model_config_text(const AudioBranchConfig& a, const QuantizerConfig& q);
void apply_model_config_text(const std::string& text, AudioBranchConfig& a, QuantizerConfig& q);

std::string encode_checkpoint(const ModelState& state, const CheckpointMeta& meta);
ModelState decode_checkpoint(const std::string& bytes, CheckpointMeta* meta = nullptr,
                             const std::string& source = "<bytes>");

void save_checkpoint(const std::string& path, const ModelState& state, const CheckpointMeta& meta);
ModelState load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

}  // namespace rdvq
