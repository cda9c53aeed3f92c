#pragma once

#include <vector>

#include "rdvq/frontend/spectrogram.hpp"
#include "rdvq/frontend/wav.hpp"

namespace rdvq {

struct LogMelOptions {
  std::size_t n_mels = kMelBins;
  double window_s = kFrameLenS;
  double shift_s = kFrameShiftS;
  // Energies are floored at (utterance max) - floor_db, and never below
  // min_energy so digital silence stays finite.
  double floor_db = 80.0;
  double min_energy = 1e-10;
  // Per-utterance mean/variance normalization of each bin.
  bool normalize = false;
};

// Hamming-windowed power spectrum -> HTK triangular Mel filters spanning
// 0 Hz to Nyquist -> natural log. T = 1 + floor((N - window) / shift).
Spectrogram logmel(const Waveform& wave, const LogMelOptions& opts = {});
// The same log energies at double precision, before normalization.
Tensor<double> logmel_energies(const Waveform& wave, const LogMelOptions& opts = {});

std::size_t logmel_frame_count(std::size_t num_samples, std::size_t window, std::size_t shift);

double hz_to_mel(double hz);
double mel_to_hz(double mel);
// Peak frequencies of the n_mels filters for a given Nyquist frequency.
std::vector<double> mel_center_frequencies(std::size_t n_mels, double nyquist_hz);

}  // namespace rdvq
