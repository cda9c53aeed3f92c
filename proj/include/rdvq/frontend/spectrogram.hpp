#pragma once

#include <cstddef>

#include "rdvq/diffcore/tensor.hpp"

namespace rdvq {

inline constexpr std::size_t kMelBins = 40;
inline constexpr double kFrameShiftS = 0.010;
inline constexpr double kFrameLenS = 0.025;

// Time-major log-Mel energies: frames x bins.
struct Spectrogram {
  Tensor<float> frames;
  double frame_shift_s = kFrameShiftS;
  double frame_len_s = kFrameLenS;

  Spectrogram() = default;
  explicit Spectrogram(Tensor<float> f) : frames(std::move(f)) {}

  std::size_t num_frames() const { return frames.rank() == 2 ? frames.dim(0) : 0; }
  std::size_t num_bins() const { return frames.rank() == 2 ? frames.dim(1) : 0; }
  double duration_s() const { return static_cast<double>(num_frames()) * frame_shift_s; }
};

}  // namespace rdvq
