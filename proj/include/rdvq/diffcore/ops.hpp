#pragma once

// The fixed operation set of the grounding network. Sequence tensors are
// channels x frames; several sequences may be packed side by side along the
// frame axis, in which case Var::segments() lists their lengths and every
// op respects the boundaries (convolution padding, pooling, batch stats).

#include <cstddef>
#include <optional>
#include <vector>

#include "rdvq/diffcore/graph.hpp"

namespace rdvq {

enum class Mode { kTrain, kEval };

template <typename T>
struct BatchNormStats {
  Tensor<T> running_mean;
  Tensor<T> running_var;

  explicit BatchNormStats(std::size_t channels = 0)
      : running_mean({channels}, T(0)), running_var({channels}, T(1)) {}
};

// Output frames of a 1-D convolution over `length` input frames.
std::size_t conv_output_length(std::size_t length, std::size_t width, std::size_t stride,
                               std::size_t pad);

// Cross-correlation with symmetric zero padding, applied per segment.
// x: [C_in x T], kernel: [C_out x C_in x W], bias: [C_out].
template <typename T>
Var<T> conv1d(Var<T> x, Var<T> kernel, std::optional<Var<T>> bias, std::size_t stride,
              std::size_t pad);

template <typename T>
Var<T> relu(Var<T> x);

template <typename T>
Var<T> hinge(Var<T> x) {
  return relu(x);
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b);

template <typename T>
Var<T> scale(Var<T> x, T factor);

// Normalizes each row (channel) over all columns. Train mode uses the batch
// statistics and updates `stats`; eval mode uses the running statistics.
template <typename T>
Var<T> batchnorm(Var<T> x, Var<T> gamma, Var<T> beta, BatchNormStats<T>& stats, Mode mode,
                 T momentum = T(0.1), T eps = T(1e-5));

// Temporal mean of each segment: [C x T] -> [C x B].
template <typename T>
Var<T> mean_pool_time(Var<T> x);

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);

template <typename T>
Var<T> transpose(Var<T> x);

// Scalar inner product of two equally sized tensors.
template <typename T>
Var<T> dot(Var<T> u, Var<T> v);

template <typename T>
Var<T> sum(Var<T> x);

// x: [R x C], bias: [R], added to every column.
template <typename T>
Var<T> add_col_bias(Var<T> x, Var<T> bias);

// out[:, t] = x[:, index[t]]; keeps the segment layout of x.
template <typename T>
Var<T> gather_columns(Var<T> x, const std::vector<std::size_t>& index);

// Forward value `replacement`, backward identity onto x.
template <typename T>
Var<T> straight_through(Var<T> x, Tensor<T> replacement);

// Copies of the column ranges of each segment, without gradients.
template <typename T>
std::vector<Tensor<T>> split_segments(const Tensor<T>& packed, const std::vector<std::size_t>& lengths);

}  // namespace rdvq
