#pragma once

// Vector-quantization layer with EMA codebook learning. Sequences are
// D x T (one column per frame), matching the audio branch layout.

#include <cstddef>
#include <vector>

#include "rdvq/common.hpp"
#include "rdvq/diffcore/graph.hpp"
#include "rdvq/io/config.hpp"

namespace rdvq {

struct QuantizerConfig {
  std::size_t codebook_size = 1024;
  double gamma = 0.99;
  double jitter = 0.12;
  double eps_smooth = 1e-5;
  bool reinit_dead_codes = false;

  static QuantizerConfig from(const Config& cfg);
  void validate() const;
};

template <typename T>
struct Codebook {
  Tensor<T> E;          // K x D
  Tensor<T> ema_count;  // K
  Tensor<T> ema_sum;    // K x D
  bool enabled = false;
  // Set when the layer is enabled without trained codes; the next training
  // batch seeds E from its encoder outputs.
  bool needs_init = true;

  Codebook() = default;
  Codebook(std::size_t K, std::size_t D)
      : E({K, D}), ema_count({K}, T(1)), ema_sum({K, D}) {}

  std::size_t size() const { return E.empty() ? 0 : E.dim(0); }
  std::size_t dim() const { return E.empty() ? 0 : E.dim(1); }
  bool operator==(const Codebook&) const = default;
};

// Nearest code in Euclidean distance, lowest index on ties.
template <typename T>
std::size_t assign(const T* x, const Codebook<T>& cb);

// Codes for every column of x (D x T).
template <typename T>
std::vector<int> assign_columns(const Tensor<T>& x, const Codebook<T>& cb);

// Codebook rows for the given codes, laid out D x T.
template <typename T>
Tensor<T> lookup(const std::vector<int>& codes, const Codebook<T>& cb);

template <typename T>
struct Quantized {
  Var<T> q;
  std::vector<int> codes;
};

// Forward Q_t = E[code_t]; backward passes the gradient at Q to x unchanged.
template <typename T>
Quantized<T> quantize_sequence(Var<T> x, const Codebook<T>& cb);

// Disabled layer: the input node itself.
template <typename T>
Var<T> bypass(Var<T> x) {
  return x;
}

// Seeds E with K columns of x, sampled without replacement when x has at
// least K columns and with replacement otherwise. N = 1, m = E.
template <typename T>
void init_from_batch(Codebook<T>& cb, const Tensor<T>& x, Rng& rng);

// One EMA step from a batch x (D x T) and its codes:
//   N <- gamma N + (1 - gamma) n,  m <- gamma m + (1 - gamma) sum x,  E = m / (N + eps)
template <typename T>
void ema_update(Codebook<T>& cb, const Tensor<T>& x, const std::vector<int>& codes, double gamma,
                double eps_smooth);

// Re-seeds codes whose EMA count fell below `threshold` from random batch columns.
template <typename T>
std::size_t reinit_dead_codes(Codebook<T>& cb, const Tensor<T>& x, Rng& rng, double threshold = 1e-3);

// Source frame for every output frame after jitter. Within each segment a
// frame takes its left neighbor with probability p, its right neighbor with
// probability p, and is kept otherwise; at an end the only valid neighbor
// is used. p must lie in [0, 0.5].
std::vector<std::size_t> jitter_index(const std::vector<std::size_t>& segments, double p, Rng& rng);

std::vector<int> apply_index(const std::vector<int>& codes, const std::vector<std::size_t>& index);

// exp(entropy) of the code histogram; 0 for an empty histogram.
double code_perplexity(const std::vector<std::size_t>& histogram);

}  // namespace rdvq
