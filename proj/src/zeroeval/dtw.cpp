#include "rdvq/zeroeval/dtw.hpp"

#include <cmath>
#include <vector>

#include "rdvq/common.hpp"

namespace rdvq {

FrameMetric parse_frame_metric(const std::string& s) {
  if (s == "cosine") return FrameMetric::kCosine;
  if (s == "euclidean" || s == "euclid") return FrameMetric::kEuclidean;
  throw UsageError("frame metric must be 'cosine' or 'euclidean', got '" + s + "'");
}

template <typename T>
double frame_distance(const T* u, const T* v, std::size_t dim, FrameMetric metric) {
  if (metric == FrameMetric::kEuclidean) {
    double s = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = double(u[i]) - double(v[i]);
      s += d * d;
    }
    return std::sqrt(s);
  }
  double uv = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    uv += double(u[i]) * double(v[i]);
    uu += double(u[i]) * double(u[i]);
    vv += double(v[i]) * double(v[i]);
  }
  const double d = 1.0 - uv / (std::max(std::sqrt(uu), kNormFloor) * std::max(std::sqrt(vv), kNormFloor));
  return d > 0 ? d : 0.0;
}

template <typename T>
double dtw_distance(const T* a, std::size_t na, const T* b, std::size_t nb, std::size_t dim,
                    FrameMetric metric) {
  if (na == 0 || nb == 0) throw std::invalid_argument("dtw_distance: empty sequence");
  struct Cell {
    double cost;
    std::size_t len;
  };
  auto better = [](const Cell& x, const Cell& y) { return x.cost < y.cost || (x.cost == y.cost && x.len < y.len); };
  std::vector<Cell> prev(nb), cur(nb);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const double d = frame_distance(a + i * dim, b + j * dim, dim, metric);
      Cell best{0.0, 0};
      if (i == 0 && j == 0) {
        best = {0.0, 0};
      } else {
        bool have = false;
        auto offer = [&](const Cell& c) {
          if (!have || better(c, best)) best = c;
          have = true;
        };
        if (i > 0 && j > 0) offer(prev[j - 1]);
        if (i > 0) offer(prev[j]);
        if (j > 0) offer(cur[j - 1]);
      }
      cur[j] = {best.cost + d, best.len + 1};
    }
    std::swap(prev, cur);
  }
  const Cell& end = prev[nb - 1];
  return end.cost / double(end.len);
}

template double frame_distance<float>(const float*, const float*, std::size_t, FrameMetric);
template double frame_distance<double>(const double*, const double*, std::size_t, FrameMetric);
template double dtw_distance<float>(const float*, std::size_t, const float*, std::size_t, std::size_t,
                                    FrameMetric);
template double dtw_distance<double>(const double*, std::size_t, const double*, std::size_t, std::size_t,
                                     FrameMetric);

}  // namespace rdvq
