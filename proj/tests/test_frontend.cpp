#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "rdvq/frontend/logmel.hpp"
#include "rdvq/frontend/mixing.hpp"

using namespace rdvq;

namespace {

Waveform tone(double hz, double seconds, double amp = 0.5) {
  Waveform w;
  const std::size_t n = std::size_t(seconds * w.sample_rate);
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(amp * std::sin(2 * std::numbers::pi * hz * double(i) / w.sample_rate));
  return w;
}

Waveform white(std::size_t n, uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> g(0, sd);
  Waveform w;
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(g(rng));
  return w;
}

}  // namespace

TEST_CASE("one second of 16 kHz audio gives 98 frames") {
  CHECK(logmel_frame_count(16000, 400, 160) == 98);
  const Spectrogram s = logmel(tone(440, 1.0));
  CHECK(s.num_frames() == 98);
  CHECK(s.num_bins() == 40);
}

TEST_CASE("digital silence sits at the floor everywhere") {
  Waveform w;
  w.samples.assign(4000, 0.0);
  const Spectrogram s = logmel(w);
  const float floor = float(std::log(1e-10));
  for (float v : s.frames.values()) CHECK(v == floor);
}

TEST_CASE("a tone at a filter's center frequency peaks in that filter") {
  const auto centers = mel_center_frequencies(40, 8000.0);
  REQUIRE(centers.size() == 40);
  for (std::size_t b = 4; b < 36; b += 3) {
    const Spectrogram s = logmel(tone(centers[b], 0.3));
    const std::size_t mid = s.num_frames() / 2;
    std::size_t arg = 0;
    for (std::size_t k = 1; k < 40; ++k)
      if (s.frames(mid, k) > s.frames(mid, arg)) arg = k;
    CHECK_MESSAGE(arg == b, "bin ", b, " at ", centers[b], " Hz");
  }
}

TEST_CASE("mel scale round trip and monotonic centers") {
  for (double hz : {0.0, 100.0, 1000.0, 7999.0}) CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz));
  CHECK(hz_to_mel(1000.0) == doctest::Approx(1000.0).epsilon(1e-3));
  const auto c = mel_center_frequencies(40, 8000.0);
  for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i] > c[i - 1]);
}

TEST_CASE("too short, non-finite or zero-rate waveforms are rejected") {
  Waveform w;
  w.samples.assign(100, 0.1);
  CHECK_THROWS(logmel(w));
  w.samples.assign(1000, 0.1);
  w.samples[10] = std::nan("");
  CHECK_THROWS(logmel(w));
  w.samples.assign(1000, 0.1);
  w.sample_rate = 0;
  CHECK_THROWS(logmel(w));
}

TEST_CASE("normalized features have zero mean and unit variance per bin") {
  LogMelOptions opt;
  opt.normalize = true;
  const Spectrogram s = logmel(white(8000, 3), opt);
  for (std::size_t k = 0; k < s.num_bins(); k += 7) {
    double m = 0, v = 0;
    for (std::size_t t = 0; t < s.num_frames(); ++t) m += s.frames(t, k);
    m /= double(s.num_frames());
    for (std::size_t t = 0; t < s.num_frames(); ++t) v += (s.frames(t, k) - m) * (s.frames(t, k) - m);
    v /= double(s.num_frames());
    CHECK(std::abs(m) < 1e-4);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("logmel at double precision agrees with the float output") {
  const Waveform w = white(3200, 9, 0.1);
  const Spectrogram s = logmel(w);
  const Tensor<double> e = logmel_energies(w);
  REQUIRE(e.shape() == s.frames.shape());
  for (std::size_t i = 0; i < e.size(); ++i) CHECK(float(e[i]) == s.frames[i]);
}

TEST_CASE("wav write and read round trip") {
  const auto path = (std::filesystem::temp_directory_path() / "rdvq_test_tone.wav").string();
  const Waveform w = tone(300, 0.05);
  write_wav(path, w);
  const Waveform r = read_wav(path);
  REQUIRE(r.samples.size() == w.samples.size());
  CHECK(r.sample_rate == 16000.0);
  for (std::size_t i = 0; i < w.samples.size(); ++i) CHECK(std::abs(r.samples[i] - w.samples[i]) <= 1.0 / 32768);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_wav(path), DataError);
}

TEST_CASE("mixing at an SNR") {
  Waveform s, n;
  s.samples = {1, -1, 1, -1};
  n.samples = {2, 2, -2, -2};  // P_s = 1, P_n = 4
  const Waveform m = mix_at_snr(s, n, 10.0);
  const double alpha = std::sqrt(1.0 / 40.0);
  CHECK(alpha == doctest::Approx(0.1581).epsilon(1e-3));
  for (std::size_t i = 0; i < 4; ++i) CHECK(m.samples[i] == doctest::Approx(s.samples[i] + alpha * n.samples[i]));
  CHECK(measured_snr_db(s, m) == doctest::Approx(10.0).epsilon(1e-12));

  const Waveform sig = tone(500, 0.2), noise = white(sig.samples.size(), 4);
  const Waveform zero = mix_at_snr(sig, noise, 0.0);
  std::vector<double> diff(sig.samples.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = zero.samples[i] - sig.samples[i];
  CHECK(mean_power(diff) == doctest::Approx(mean_power(sig.samples)).epsilon(1e-12));

  const Waveform clean = mix_at_snr(sig, noise, 100.0);
  double err = 0;
  for (std::size_t i = 0; i < diff.size(); ++i) err += std::pow(clean.samples[i] - sig.samples[i], 2);
  CHECK(std::sqrt(err / mean_power(sig.samples) / double(diff.size())) < 1e-4);

  Waveform silent;
  silent.samples.assign(sig.samples.size(), 0.0);
  CHECK_THROWS(mix_at_snr(sig, silent, 5.0));
  Waveform shorter = noise;
  shorter.samples.pop_back();
  CHECK_THROWS(mix_at_snr(sig, shorter, 5.0));
}

TEST_CASE("snr sampling") {
  Rng a(5), b(5);
  CHECK(sample_snr(5, 5, a) == 5.0);
  CHECK(sample_snr(0, 30, a) == sample_snr(0, 30, b));
  Rng r(6);
  double m = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double v = sample_snr(0, 10, r);
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 10.0);
    m += v / n;
  }
  CHECK(std::abs(m - 5.0) < 0.1);
  CHECK_THROWS(sample_snr(3, 1, r));
}

TEST_CASE("spectrogram mixing follows the same power rule") {
  Spectrogram s(Tensor<float>({2, 2}, std::vector<float>{0, 0, 0, 0}));             // power 1
  Spectrogram n(Tensor<float>({2, 2}, std::vector<float>(4, float(std::log(4.0)))));  // power 4
  const Spectrogram m = mix_spectrogram_at_snr(s, n, 10.0);
  for (float v : m.frames.values()) CHECK(v == doctest::Approx(std::log(1.0 + 4.0 / 40.0)).epsilon(1e-6));
}
