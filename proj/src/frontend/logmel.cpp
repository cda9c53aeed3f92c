#include "rdvq/frontend/logmel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "rdvq/common.hpp"

namespace rdvq {

namespace {

// FFTW planning is not thread safe.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_center_frequencies(std::size_t n_mels, double nyquist_hz) {
  const double top = hz_to_mel(nyquist_hz);
  std::vector<double> centers(n_mels);
  for (std::size_t b = 0; b < n_mels; ++b)
    centers[b] = mel_to_hz(top * static_cast<double>(b + 1) / static_cast<double>(n_mels + 1));
  return centers;
}

std::size_t logmel_frame_count(std::size_t num_samples, std::size_t window, std::size_t shift) {
  if (num_samples < window) return 0;
  return 1 + (num_samples - window) / shift;
}

Tensor<double> logmel_energies(const Waveform& wave, const LogMelOptions& opts) {
  if (!(wave.sample_rate > 0)) throw std::invalid_argument("logmel: sample rate must be positive");
  const std::size_t window = static_cast<std::size_t>(std::lround(opts.window_s * wave.sample_rate));
  const std::size_t shift = static_cast<std::size_t>(std::lround(opts.shift_s * wave.sample_rate));
  if (window == 0 || shift == 0) throw std::invalid_argument("logmel: window/shift round to zero");
  if (wave.samples.size() < window)
    throw std::invalid_argument(str_cat("logmel: waveform of ", wave.samples.size(),
                                        " samples is shorter than one ", window,
                                        "-sample window"));
  for (double s : wave.samples)
    if (!std::isfinite(s)) throw std::invalid_argument("logmel: non-finite sample");

  const std::size_t frames = logmel_frame_count(wave.samples.size(), window, shift);
  const std::size_t nfft = next_pow2(window), nbins = nfft / 2 + 1, nmel = opts.n_mels;
  const double nyquist = wave.sample_rate / 2.0;

  // Triangular filters on the FFT bin grid.
  const double mel_top = hz_to_mel(nyquist);
  std::vector<double> edges(nmel + 2);
  for (std::size_t i = 0; i < nmel + 2; ++i)
    edges[i] = mel_top * static_cast<double>(i) / static_cast<double>(nmel + 1);
  std::vector<double> weights(nmel * nbins, 0.0);
  for (std::size_t k = 0; k < nbins; ++k) {
    const double mel = hz_to_mel(static_cast<double>(k) * wave.sample_rate / static_cast<double>(nfft));
    for (std::size_t b = 0; b < nmel; ++b) {
      const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
      double w = 0.0;
      if (mel > lo && mel <= mid) w = (mel - lo) / (mid - lo);
      else if (mel > mid && mel < hi) w = (hi - mel) / (hi - mid);
      weights[b * nbins + k] = w;
    }
  }

  std::vector<double> hamming(window);
  for (std::size_t n = 0; n < window; ++n)
    hamming[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                        static_cast<double>(window - 1));

  double* buf = fftw_alloc_real(nfft);
  fftw_complex* spec = fftw_alloc_complex(nbins);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), buf, spec, FFTW_ESTIMATE);
  }

  std::vector<double> energy(frames * nmel);
  std::vector<double> power(nbins);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = wave.samples.data() + f * shift;
    for (std::size_t n = 0; n < window; ++n) buf[n] = src[n] * hamming[n];
    for (std::size_t n = window; n < nfft; ++n) buf[n] = 0.0;
    fftw_execute(plan);
    for (std::size_t k = 0; k < nbins; ++k) power[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    for (std::size_t b = 0; b < nmel; ++b) {
      double e = 0.0;
      const double* w = weights.data() + b * nbins;
      for (std::size_t k = 0; k < nbins; ++k) e += w[k] * power[k];
      energy[f * nmel + b] = e;
    }
  }
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  fftw_free(spec);

  const double emax = *std::max_element(energy.begin(), energy.end());
  const double floor_e = std::max(emax * std::pow(10.0, -opts.floor_db / 10.0), opts.min_energy);
  Tensor<double> out({frames, nmel});
  for (std::size_t i = 0; i < energy.size(); ++i) out[i] = std::log(std::max(energy[i], floor_e));
  return out;
}

Spectrogram logmel(const Waveform& wave, const LogMelOptions& opts) {
  Tensor<float> out = logmel_energies(wave, opts).cast<float>();
  const std::size_t frames = out.dim(0), nmel = out.dim(1);

  if (opts.normalize) {
    for (std::size_t b = 0; b < nmel; ++b) {
      double s = 0, ss = 0;
      for (std::size_t f = 0; f < frames; ++f) s += out(f, b);
      const double m = s / static_cast<double>(frames);
      for (std::size_t f = 0; f < frames; ++f) ss += (out(f, b) - m) * (out(f, b) - m);
      const double sd = std::sqrt(ss / static_cast<double>(frames));
      for (std::size_t f = 0; f < frames; ++f)
        out(f, b) = static_cast<float>((out(f, b) - m) / std::max(sd, 1e-8));
    }
  }
  Spectrogram result(std::move(out));
  result.frame_shift_s = std::round(opts.shift_s * wave.sample_rate) / wave.sample_rate;
  result.frame_len_s = std::round(opts.window_s * wave.sample_rate) / wave.sample_rate;
  return result;
}

}  // namespace rdvq
