#include <cmath>
#include <map>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "rdvq/common.hpp"
#include "rdvq/zeroeval/abx.hpp"
#include "rdvq/zeroeval/bitrate.hpp"
#include "rdvq/zeroeval/dtw.hpp"
#include "test_util.hpp"

using namespace rdvq;

namespace {

template <typename T>
std::vector<double> to_double(const Tensor<T>& t) {
  return {t.values().begin(), t.values().end()};
}

TripleRecord triple(const std::string& a, const std::string& b, const std::string& x, const std::string& cell) {
  return {SegmentRef::parse(a), SegmentRef::parse(b), SegmentRef::parse(x), cell};
}

// Cells averaged, then averaged across cells, with DTW by path enumeration.
double brute_abx(const std::vector<TripleRecord>& triples, const FeatureSet& fs, bool cosine, bool cells) {
  auto seg = [&](const SegmentRef& s) {
    const Tensor<float>& f = fs.utts.at(s.utt_id);
    Tensor<float> out({s.end - s.start, f.dim(1)});
    for (std::size_t t = s.start; t < s.end; ++t)
      for (std::size_t d = 0; d < f.dim(1); ++d) out(t - s.start, d) = f(t, d);
    return out;
  };
  std::map<std::string, std::pair<double, double>> acc;
  double flat = 0;
  for (const auto& t : triples) {
    const Tensor<float> a = seg(t.a), b = seg(t.b), x = seg(t.x);
    const std::size_t D = a.dim(1);
    const double dax = oracle::dtw_paths(to_double(a), a.dim(0), to_double(x), x.dim(0), D, cosine);
    const double dbx = oracle::dtw_paths(to_double(b), b.dim(0), to_double(x), x.dim(0), D, cosine);
    const double s = oracle::abx_score(dax, dbx);
    acc[t.contrast].first += s;
    acc[t.contrast].second += 1;
    flat += s;
  }
  if (!cells) return flat / double(triples.size());
  double m = 0;
  for (const auto& [c, v] : acc) m += v.first / v.second;
  return m / double(acc.size());
}

}  // namespace

TEST_CASE("frame distances") {
  const std::vector<double> u{1, 0}, v{1, 1}, w{0, 1}, z{0, 0};
  CHECK(frame_distance(u.data(), u.data(), 2, FrameMetric::kCosine) == 0.0);
  CHECK(frame_distance(u.data(), w.data(), 2, FrameMetric::kCosine) == 1.0);
  CHECK(frame_distance(u.data(), v.data(), 2, FrameMetric::kCosine) == doctest::Approx(1 - 1 / std::sqrt(2.0)));
  CHECK(std::isfinite(frame_distance(z.data(), u.data(), 2, FrameMetric::kCosine)));
  CHECK(frame_distance(u.data(), w.data(), 2, FrameMetric::kEuclidean) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS(parse_frame_metric("manhattan"));
}

TEST_CASE("dtw matches exhaustive path enumeration") {
  const Tensor<double> a({1, 2}, std::vector<double>{1, 0}), b({1, 2}, std::vector<double>{0, 1});
  CHECK(dtw_distance(a, b, FrameMetric::kCosine) == 1.0);
  std::mt19937_64 rng(1);
  const Tensor<double> f = testutil::random_tensor<double>({5, 3}, rng);
  CHECK(dtw_distance(f, f, FrameMetric::kCosine) == doctest::Approx(0.0).epsilon(1e-15));
  std::uniform_int_distribution<std::size_t> len(1, 6);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t na = len(rng), nb = len(rng), D = 1 + rep % 3;
    const Tensor<double> x = testutil::random_tensor<double>({na, D}, rng), y = testutil::random_tensor<double>({nb, D}, rng);
    for (bool cosine : {true, false}) {
      const FrameMetric m = cosine ? FrameMetric::kCosine : FrameMetric::kEuclidean;
      const double want = oracle::dtw_paths(to_double(x), na, to_double(y), nb, D, cosine);
      CHECK(std::abs(dtw_distance(x, y, m) - want) <= 1e-12);
      CHECK(dtw_distance(x, y, m) == doctest::Approx(dtw_distance(y, x, m)).epsilon(1e-12));
    }
  }
  CHECK_THROWS(dtw_distance(Tensor<double>({2, 2}), Tensor<double>({2, 3}), FrameMetric::kCosine));
}

TEST_CASE("segment frames at lower rates") {
  CHECK(frames_in_segment(10, 20, 100, 1000) == std::pair<std::size_t, std::size_t>{10, 20});
  CHECK(frames_in_segment(10, 20, 50, 1000) == std::pair<std::size_t, std::size_t>{5, 10});
  CHECK(frames_in_segment(10, 11, 25, 1000) == std::pair<std::size_t, std::size_t>{2, 3});
  CHECK(frames_in_segment(10, 20, 50, 7) == std::pair<std::size_t, std::size_t>{5, 7});
}

TEST_CASE("abx scoring rules and the brute-force scorer") {
  FeatureSet fs;
  std::mt19937_64 rng(2);
  fs.utts["u"] = Tensor<float>({6, 2}, std::vector<float>{1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0});
  // A = X exactly, B orthogonal.
  auto ex = feature_extractor(fs);
  const auto r0 = abx_error({triple("u:0:2", "u:2:4", "u:4:6", "c")}, ex, {});
  CHECK(r0.error == 0.0);
  CHECK(r0.triples_used == 1);
  // A and B identical: a tie.
  const auto r1 = abx_error({triple("u:0:2", "u:4:6", "u:1:3", "c")}, ex, {});
  CHECK(r1.error == 0.5);
  const auto r2 = abx_error({triple("u:2:4", "u:0:2", "u:4:6", "c")}, ex, {});
  CHECK(r2.error == 1.0);
  const auto missing = abx_error({triple("u:0:2", "v:2:4", "u:4:6", "c"), triple("u:0:2", "u:2:4", "u:4:6", "c")}, ex, {});
  CHECK(missing.skipped == 1);
  CHECK(missing.triples_used == 1);
  CHECK(std::isnan(missing.scores[0]));

  for (std::string u : {"a", "b", "c", "d"}) fs.utts[u] = testutil::random_tensor<float>({12, 3}, rng);
  const std::vector<TripleRecord> four{triple("a:0:4", "b:1:5", "c:2:6", "k1"), triple("b:3:8", "c:0:5", "d:6:9", "k2"),
                                       triple("d:0:3", "a:4:9", "b:2:6", "k3"), triple("c:5:11", "d:2:6", "a:0:5", "k4")};
  AbxOptions flat;
  flat.aggregation = Aggregation::kFlat;
  CHECK(abx_error(four, ex, flat).error == doctest::Approx(brute_abx(four, fs, true, false)).epsilon(1e-12));
  CHECK(abx_error(four, ex, {}).error == doctest::Approx(brute_abx(four, fs, true, false)).epsilon(1e-12));

  std::vector<TripleRecord> many;
  std::uniform_int_distribution<std::size_t> start(0, 7), l(1, 4), pick(0, 3), cell(0, 2);
  const std::vector<std::string> names{"a", "b", "c", "d"};
  auto rand_seg = [&] {
    const std::size_t s = start(rng);
    return names[pick(rng)] + ":" + std::to_string(s) + ":" + std::to_string(s + l(rng));
  };
  for (int i = 0; i < 60; ++i) many.push_back(triple(rand_seg(), rand_seg(), rand_seg(), "k" + std::to_string(cell(rng))));
  CHECK(abx_error(many, ex, {}).error == doctest::Approx(brute_abx(many, fs, true, true)).epsilon(1e-12));
  AbxOptions euc;
  euc.metric = FrameMetric::kEuclidean;
  CHECK(abx_error(many, ex, euc).error == doctest::Approx(brute_abx(many, fs, false, true)).epsilon(1e-12));

  AbxOptions threaded;
  threaded.threads = 4;
  const auto one = abx_error(many, ex, {}), four_t = abx_error(many, ex, threaded);
  CHECK(one.error == four_t.error);
  CHECK(one.cell_error == four_t.cell_error);
}

TEST_CASE("rle and segmentation") {
  CHECK(rle_encode({5, 5, 5, 2}) == std::vector<Run>{{5, 3}, {2, 1}});
  CHECK(rle_encode(std::vector<int>(9, 4)).size() == 1);
  CHECK(rle_encode({}).empty());
  CHECK(segmentize({5, 5, 5, 2}) == std::vector<int>{5, 2});
  CHECK(segmentize({7, 7, 7}) == std::vector<int>{7});
  CHECK(segmentize({1, 2, 1, 2}) == std::vector<int>{1, 2, 1, 2});
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<int> c(rng() % 30);
    for (auto& v : c) v = int(rng() % 3);
    CHECK(rle_decode(rle_encode(c)) == c);
    CHECK(segmentize(c).size() == rle_encode(c).size());
  }
}

TEST_CASE("rle round trip leaves abx unchanged") {
  std::mt19937_64 rng(4);
  std::map<std::string, std::vector<int>> units;
  for (std::string u : {"a", "b", "c"}) {
    std::vector<int> c(30);
    for (auto& v : c) v = int(rng() % 5);
    units[u] = c;
  }
  std::map<std::string, std::vector<int>> round;
  for (const auto& [u, c] : units) round[u] = rle_decode(rle_encode(c));
  const Tensor<float> table = testutil::random_tensor<float>({5, 3}, rng);
  std::vector<TripleRecord> t;
  for (int i = 0; i < 40; ++i) {
    const std::size_t s = std::size_t(i % 10) * 4;
    t.push_back(triple("a:" + std::to_string(s) + ":" + std::to_string(s + 12), "b:" + std::to_string(s) + ":" + std::to_string(s + 8),
                       "c:" + std::to_string(s + 2) + ":" + std::to_string(s + 10), "k" + std::to_string(i % 3)));
  }
  for (bool segment : {false, true}) {
    UnitFeatureOptions o;
    o.frame_rate = 50;
    o.segment = segment;
    const double e1 = abx_error(t, unit_extractor(units, table, 5, o), {}).error;
    const double e2 = abx_error(t, unit_extractor(round, table, 5, o), {}).error;
    CHECK(e1 == e2);
    const double h1 = abx_error(t, unit_extractor(units, Tensor<float>(), 5, o), {}).error;
    const double h2 = abx_error(t, unit_extractor(round, Tensor<float>(), 5, o), {}).error;
    CHECK(h1 == h2);
  }
  units["a"][0] = 9;
  UnitFeatureOptions o;
  CHECK_THROWS_AS(abx_error(t, unit_extractor(units, Tensor<float>(), 5, o), {}), DataError);
}

TEST_CASE("bitrates") {
  std::vector<int> half(100);
  for (std::size_t i = 0; i < 100; ++i) half[i] = int(i % 2);
  CHECK(bitrate({half}, 10.0, BitrateMode::kFrame) == 10.0);
  const std::vector<std::vector<int>> one{std::vector<int>(50, 3)}, equal(4, std::vector<int>(20, 3));
  for (BitrateMode m : {BitrateMode::kFrame, BitrateMode::kRle, BitrateMode::kSegment}) {
    CHECK(bitrate(one, 1.4, m) == 0.0);
    CHECK(bitrate(equal, 1.4, m) == 0.0);
  }
  // Runs of different lengths are distinct RLE symbols.
  const std::vector<std::vector<int>> uneven{std::vector<int>(50, 3), std::vector<int>(20, 3)};
  CHECK(bitrate(uneven, 1.4, BitrateMode::kFrame) == 0.0);
  CHECK(bitrate(uneven, 1.4, BitrateMode::kSegment) == 0.0);
  CHECK(bitrate(uneven, 1.4, BitrateMode::kRle) == doctest::Approx(2 / 1.4));
  CHECK_THROWS(bitrate({half}, 0.0, BitrateMode::kFrame));

  std::mt19937_64 rng(5);
  std::vector<std::vector<int>> corpus(6);
  for (auto& c : corpus) {
    c.resize(20 + rng() % 40);
    int v = 0;
    for (auto& x : c) {
      if (rng() % 3 == 0) v = int(rng() % 7);
      x = v;
    }
  }
  std::vector<int> perm{3, 6, 0, 5, 1, 2, 4};
  auto relabeled = corpus;
  for (auto& c : relabeled)
    for (auto& x : c) x = perm[std::size_t(x)];
  const BitrateReport r = all_bitrates(corpus, 12.5), p = all_bitrates(relabeled, 12.5);
  CHECK(r.frame == p.frame);
  CHECK(r.rle == p.rle);
  CHECK(r.segment == p.segment);

  std::vector<int> frames, segs;
  std::vector<std::pair<int, std::size_t>> runs;
  std::vector<std::size_t> lengths;
  for (const auto& c : corpus) {
    frames.insert(frames.end(), c.begin(), c.end());
    for (const auto& run : rle_encode(c)) {
      runs.push_back(run);
      segs.push_back(run.first);
      lengths.push_back(run.second);
    }
  }
  CHECK(r.frame == doctest::Approx(frames.size() / 12.5 * oracle::entropy_bits(frames)).epsilon(1e-12));
  CHECK(r.rle == doctest::Approx(runs.size() / 12.5 * oracle::entropy_bits(runs)).epsilon(1e-12));
  CHECK(r.segment == doctest::Approx(segs.size() / 12.5 * oracle::entropy_bits(segs)).epsilon(1e-12));
  CHECK(r.runs == runs.size());
  CHECK(oracle::entropy_bits(segs) <= oracle::entropy_bits(runs) + 1e-12);
  CHECK(oracle::entropy_bits(runs) <= oracle::entropy_bits(segs) + oracle::entropy_bits(lengths) + 1e-12);
  CHECK(entropy_bits({1, 1, 2}) == doctest::Approx(1.5));
}
