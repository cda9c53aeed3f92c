#include "rdvq/frontend/mixing.hpp"

#include <cmath>
#include <stdexcept>

namespace rdvq {

double mean_power(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

Waveform mix_at_snr(const Waveform& signal, const Waveform& noise, double snr_db) {
  if (signal.samples.size() != noise.samples.size())
    throw std::invalid_argument(str_cat("mix_at_snr: length mismatch (signal ",
                                        signal.samples.size(), ", noise ", noise.samples.size(),
                                        ")"));
  if (signal.sample_rate != noise.sample_rate)
    throw std::invalid_argument("mix_at_snr: sample rate mismatch");
  const double ps = mean_power(signal.samples), pn = mean_power(noise.samples);
  if (!(pn > 0.0)) throw std::invalid_argument("mix_at_snr: noise has zero power");
  const double alpha = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  Waveform out = signal;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += alpha * noise.samples[i];
  return out;
}

double measured_snr_db(const Waveform& signal, const Waveform& mixed) {
  std::vector<double> diff(signal.samples.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = mixed.samples.at(i) - signal.samples[i];
  return 10.0 * std::log10(mean_power(signal.samples) / mean_power(diff));
}

double sample_snr(double lo_db, double hi_db, Rng& rng) {
  if (lo_db > hi_db) throw std::invalid_argument("sample_snr: lo > hi");
  if (lo_db == hi_db) return lo_db;
  std::uniform_real_distribution<double> u(lo_db, hi_db);
  return u(rng);
}

Spectrogram mix_spectrogram_at_snr(const Spectrogram& signal, const Spectrogram& noise,
                                   double snr_db) {
  if (signal.frames.shape() != noise.frames.shape())
    throw std::invalid_argument("mix_spectrogram_at_snr: shape mismatch " +
                                shape_str(signal.frames.shape()) + " vs " +
                                shape_str(noise.frames.shape()));
  const std::size_t n = signal.frames.size();
  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ps += std::exp(static_cast<double>(signal.frames[i]));
    pn += std::exp(static_cast<double>(noise.frames[i]));
  }
  if (!(pn > 0.0)) throw std::invalid_argument("mix_spectrogram_at_snr: noise has zero power");
  const double gain = ps / (pn * std::pow(10.0, snr_db / 10.0));  // alpha^2 on power
  Spectrogram out = signal;
  for (std::size_t i = 0; i < n; ++i)
    out.frames[i] = static_cast<float>(std::log(std::exp(static_cast<double>(signal.frames[i])) +
                                                gain * std::exp(static_cast<double>(noise.frames[i]))));
  return out;
}

}  // namespace rdvq
