#pragma once

#include <cstddef>
#include <string>

#include "rdvq/diffcore/tensor.hpp"

namespace rdvq {

enum class FrameMetric { kCosine, kEuclidean };

FrameMetric parse_frame_metric(const std::string& s);

inline constexpr double kNormFloor = 1e-12;

// Cosine distance 1 - u.v / (|u| |v|) with norms floored at 1e-12, or
// Euclidean distance.
template <typename T>
double frame_distance(const T* u, const T* v, std::size_t dim, FrameMetric metric);

// Sequences are frames x dim. Steps (1,0), (0,1), (1,1); the optimal path
// minimizes accumulated frame distance, with the shorter path winning ties,
// and the result is that cost divided by the number of cells on the path.
template <typename T>
double dtw_distance(const T* a, std::size_t na, const T* b, std::size_t nb, std::size_t dim,
                    FrameMetric metric);

template <typename T>
double dtw_distance(const Tensor<T>& a, const Tensor<T>& b, FrameMetric metric) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw std::invalid_argument("dtw_distance: sequences need the same frame dimension");
  return dtw_distance(a.data(), a.dim(0), b.data(), b.dim(0), a.dim(1), metric);
}

}  // namespace rdvq
