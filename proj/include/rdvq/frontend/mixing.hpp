#pragma once

#include "rdvq/common.hpp"
#include "rdvq/frontend/spectrogram.hpp"
#include "rdvq/frontend/wav.hpp"

namespace rdvq {

double mean_power(const std::vector<double>& x);

// signal + alpha * noise with alpha = sqrt(Ps / (Pn * 10^(snr/10))), P the
// mean squared amplitude. Lengths and rates must match; silent noise throws.
Waveform mix_at_snr(const Waveform& signal, const Waveform& noise, double snr_db);

// 10 log10(P(signal) / P(mixed - signal)).
double measured_snr_db(const Waveform& signal, const Waveform& mixed);

// Uniform in [lo_db, hi_db].
double sample_snr(double lo_db, double hi_db, Rng& rng);

// The same linear mixing rule applied to log-Mel features: both inputs are
// mapped back to Mel power, mixed with P the mean power over all cells,
// and logged again. Used where no waveform exists (synthetic corpora).
Spectrogram mix_spectrogram_at_snr(const Spectrogram& signal, const Spectrogram& noise,
                                   double snr_db);

}  // namespace rdvq
