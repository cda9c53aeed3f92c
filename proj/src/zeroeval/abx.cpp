#include "rdvq/zeroeval/abx.hpp"

#include <cmath>
#include <limits>
#include <thread>

#include "rdvq/common.hpp"
#include "rdvq/zeroeval/bitrate.hpp"

namespace rdvq {

Aggregation parse_aggregation(const std::string& s) {
  if (s == "cell") return Aggregation::kCell;
  if (s == "flat") return Aggregation::kFlat;
  throw UsageError("aggregation must be 'cell' or 'flat', got '" + s + "'");
}

std::pair<std::size_t, std::size_t> frames_in_segment(std::size_t start, std::size_t end, double rate,
                                                      std::size_t n_frames) {
  const double t0 = start / kInputFrameRate, t1 = end / kInputFrameRate;
  // Frame j is centered at (j + 0.5) / rate.
  auto first_at_or_after = [&](double t) {
    const double j = std::ceil(t * rate - 0.5 - 1e-9);
    return j < 0 ? std::size_t(0) : std::size_t(j);
  };
  std::size_t a = first_at_or_after(t0), b = first_at_or_after(t1);
  a = std::min(a, n_frames);
  b = std::min(b, n_frames);
  if (b <= a) {
    const std::size_t mid = std::size_t(std::floor(0.5 * (t0 + t1) * rate));
    if (mid >= n_frames) return {n_frames, n_frames};
    return {mid, mid + 1};
  }
  return {a, b};
}

SegmentExtractor feature_extractor(const FeatureSet& set) {
  return [&set](const SegmentRef& s) -> std::optional<Tensor<float>> {
    auto it = set.utts.find(s.utt_id);
    if (it == set.utts.end()) return std::nullopt;
    const Tensor<float>& f = it->second;
    const auto [a, b] = frames_in_segment(s.start, s.end, set.frame_rate, f.dim(0));
    if (b <= a) return std::nullopt;
    const std::size_t D = f.dim(1);
    Tensor<float> out({b - a, D});
    std::copy(f.data() + a * D, f.data() + b * D, out.data());
    return out;
  };
}

SegmentExtractor unit_extractor(const std::map<std::string, std::vector<int>>& units,
                                const Tensor<float>& table, std::size_t num_units,
                                const UnitFeatureOptions& opt) {
  return [&units, &table, num_units, opt](const SegmentRef& s) -> std::optional<Tensor<float>> {
    auto it = units.find(s.utt_id);
    if (it == units.end()) return std::nullopt;
    const auto& codes = it->second;
    const auto [a, b] = frames_in_segment(s.start, s.end, opt.frame_rate, codes.size());
    if (b <= a) return std::nullopt;
    std::vector<int> seg(codes.begin() + a, codes.begin() + b);
    if (opt.segment) seg = segmentize(seg);
    const std::size_t D = table.empty() ? num_units : table.dim(1);
    Tensor<float> out({seg.size(), D});
    for (std::size_t t = 0; t < seg.size(); ++t) {
      const std::size_t c = std::size_t(seg[t]);
      if (table.empty()) {
        if (c >= num_units) throw DataError(str_cat("unit ", c, " outside inventory of ", num_units));
        out(t, c) = 1.0f;
      } else {
        if (c >= table.dim(0)) throw DataError(str_cat("unit ", c, " outside codebook of ", table.dim(0)));
        std::copy(table.data() + c * D, table.data() + (c + 1) * D, out.data() + t * D);
      }
    }
    return out;
  };
}

AbxResult abx_error(const std::vector<TripleRecord>& triples, const SegmentExtractor& extract,
                    const AbxOptions& opt) {
  AbxResult res;
  res.scores.assign(triples.size(), std::numeric_limits<double>::quiet_NaN());
  auto score_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto a = extract(triples[i].a), b = extract(triples[i].b), x = extract(triples[i].x);
      if (!a || !b || !x) continue;
      const double dax = dtw_distance(*a, *x, opt.metric), dbx = dtw_distance(*b, *x, opt.metric);
      res.scores[i] = dax > dbx ? 1.0 : (dax == dbx ? 0.5 : 0.0);
    }
  };
  const std::size_t n = triples.size();
  const std::size_t workers = std::max<std::size_t>(1, std::min(opt.threads, n));
  if (workers == 1) {
    score_range(0, n);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back(score_range, n * w / workers, n * (w + 1) / workers);
    for (auto& t : pool) t.join();
  }

  // Fixed-order reduction.
  std::map<std::string, std::pair<double, std::size_t>> cells;
  double flat = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(res.scores[i])) {
      ++res.skipped;
      continue;
    }
    ++res.triples_used;
    flat += res.scores[i];
    auto& c = cells[triples[i].contrast];
    c.first += res.scores[i];
    ++c.second;
  }
  if (res.skipped) log_warn(str_cat("abx: skipped ", res.skipped, " triples with unresolved segments"));
  if (res.triples_used == 0) return res;
  double cell_sum = 0;
  for (const auto& [id, c] : cells) {
    res.cell_error[id] = c.first / double(c.second);
    cell_sum += res.cell_error[id];
  }
  res.error = opt.aggregation == Aggregation::kFlat ? flat / double(res.triples_used)
                                                    : cell_sum / double(cells.size());
  return res;
}

}  // namespace rdvq
