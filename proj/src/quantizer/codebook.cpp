#include "rdvq/quantizer/codebook.hpp"

#include <cmath>
#include <numeric>

#include "rdvq/diffcore/ops.hpp"
#include "rdvq/simd/kernels.hpp"

namespace rdvq {

QuantizerConfig QuantizerConfig::from(const Config& cfg) {
  QuantizerConfig q;
  q.codebook_size = cfg.get_int("quantizer", "codebook_size");
  q.gamma = cfg.get_double("quantizer", "gamma");
  q.jitter = cfg.get_double("quantizer", "jitter");
  q.eps_smooth = cfg.get_double("quantizer", "eps_smooth");
  q.reinit_dead_codes = cfg.get_bool("quantizer", "reinit_dead_codes");
  q.validate();
  return q;
}

void QuantizerConfig::validate() const {
  if (codebook_size == 0) throw DataError("quantizer.codebook_size must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DataError("quantizer.gamma must lie in [0, 1)");
  if (!(jitter >= 0.0 && jitter <= 0.5)) throw DataError("quantizer.jitter must lie in [0, 0.5]");
  if (!(eps_smooth > 0.0)) throw DataError("quantizer.eps_smooth must be positive");
}

template <typename T>
std::size_t assign(const T* x, const Codebook<T>& cb) {
  const std::size_t D = cb.dim();
  for (std::size_t d = 0; d < D; ++d)
    if (!std::isfinite(x[d])) throw std::invalid_argument("assign: non-finite input");
  return simd::nearest_row(x, cb.E.data(), cb.size(), D).first;
}

template <typename T>
std::vector<int> assign_columns(const Tensor<T>& x, const Codebook<T>& cb) {
  if (x.rank() != 2 || x.dim(0) != cb.dim())
    throw std::invalid_argument("assign: input " + shape_str(x.shape()) + " does not match code dim " +
                                std::to_string(cb.dim()));
  const std::size_t D = x.dim(0), n = x.dim(1);
  Tensor<T> cols({n, D});
  simd::transpose(D, n, x.data(), cols.data());
  std::vector<int> codes(n);
  for (std::size_t t = 0; t < n; ++t) codes[t] = static_cast<int>(assign(cols.data() + t * D, cb));
  return codes;
}

template <typename T>
Tensor<T> lookup(const std::vector<int>& codes, const Codebook<T>& cb) {
  const std::size_t D = cb.dim(), n = codes.size();
  Tensor<T> q({D, n});
  for (std::size_t t = 0; t < n; ++t) {
    const T* row = cb.E.data() + static_cast<std::size_t>(codes[t]) * D;
    for (std::size_t d = 0; d < D; ++d) q(d, t) = row[d];
  }
  return q;
}

template <typename T>
Quantized<T> quantize_sequence(Var<T> x, const Codebook<T>& cb) {
  if (!cb.enabled) throw std::logic_error("quantize_sequence: codebook is disabled, use bypass");
  Quantized<T> out;
  out.codes = assign_columns(x.value(), cb);
  out.q = straight_through(x, lookup(out.codes, cb));
  return out;
}

template <typename T>
void init_from_batch(Codebook<T>& cb, const Tensor<T>& x, Rng& rng) {
  const std::size_t K = cb.size(), D = cb.dim(), n = x.dim(1);
  if (x.dim(0) != D || n == 0) throw std::invalid_argument("init_from_batch: bad batch shape");
  std::vector<std::size_t> pick(K);
  if (n >= K) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < K; ++i) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(i, n - 1)(rng);
      std::swap(all[i], all[j]);
      pick[i] = all[i];
    }
  } else {
    for (auto& p : pick) p = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  }
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t d = 0; d < D; ++d) cb.E(k, d) = x(d, pick[k]);
  cb.ema_sum = cb.E;
  cb.ema_count.fill(T(1));
  cb.needs_init = false;
}

template <typename T>
void ema_update(Codebook<T>& cb, const Tensor<T>& x, const std::vector<int>& codes, double gamma,
                double eps_smooth) {
  const std::size_t K = cb.size(), D = cb.dim(), n = codes.size();
  if (x.dim(0) != D || x.dim(1) != n) throw std::invalid_argument("ema_update: batch/codes mismatch");
  std::vector<T> counts(K, T(0));
  Tensor<T> sums({K, D});
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t k = static_cast<std::size_t>(codes[t]);
    counts[k] += T(1);
    for (std::size_t d = 0; d < D; ++d) sums(k, d) += x(d, t);
  }
  const T g = T(gamma), h = T(1) - T(gamma), e = T(eps_smooth);
  for (std::size_t k = 0; k < K; ++k) {
    cb.ema_count[k] = g * cb.ema_count[k] + h * counts[k];
    const T denom = cb.ema_count[k] + e;
    for (std::size_t d = 0; d < D; ++d) {
      cb.ema_sum(k, d) = g * cb.ema_sum(k, d) + h * sums(k, d);
      cb.E(k, d) = cb.ema_sum(k, d) / denom;
    }
  }
}

template <typename T>
std::size_t reinit_dead_codes(Codebook<T>& cb, const Tensor<T>& x, Rng& rng, double threshold) {
  const std::size_t n = x.dim(1), D = cb.dim();
  std::size_t replaced = 0;
  for (std::size_t k = 0; k < cb.size(); ++k) {
    if (cb.ema_count[k] >= T(threshold)) continue;
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    for (std::size_t d = 0; d < D; ++d) cb.E(k, d) = cb.ema_sum(k, d) = x(d, t);
    cb.ema_count[k] = T(1);
    ++replaced;
  }
  return replaced;
}

std::vector<std::size_t> jitter_index(const std::vector<std::size_t>& segments, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 0.5)) throw std::invalid_argument("jitter: p must lie in [0, 0.5]");
  std::vector<std::size_t> index;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t base = 0;
  for (std::size_t len : segments) {
    for (std::size_t t = 0; t < len; ++t) {
      std::size_t src = t;
      if (p > 0.0 && len > 1) {
        const double r = u(rng);
        if (r < p) src = t == 0 ? 1 : t - 1;
        else if (r < 2 * p) src = t + 1 == len ? t - 1 : t + 1;
      }
      index.push_back(base + src);
    }
    base += len;
  }
  return index;
}

std::vector<int> apply_index(const std::vector<int>& codes, const std::vector<std::size_t>& index) {
  std::vector<int> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) out[i] = codes.at(index[i]);
  return out;
}

double code_perplexity(const std::vector<std::size_t>& histogram) {
  const double total = std::accumulate(histogram.begin(), histogram.end(), 0.0);
  if (total <= 0) return 0.0;
  double h = 0.0;
  for (std::size_t c : histogram)
    if (c) {
      const double p = c / total;
      h -= p * std::log(p);
    }
  return std::exp(h);
}

#define RDVQ_INSTANTIATE_VQ(T)                                                                   \
  template std::size_t assign<T>(const T*, const Codebook<T>&);                                  \
  template std::vector<int> assign_columns<T>(const Tensor<T>&, const Codebook<T>&);             \
  template Tensor<T> lookup<T>(const std::vector<int>&, const Codebook<T>&);                     \
  template Quantized<T> quantize_sequence<T>(Var<T>, const Codebook<T>&);                        \
  template void init_from_batch<T>(Codebook<T>&, const Tensor<T>&, Rng&);                        \
  template void ema_update<T>(Codebook<T>&, const Tensor<T>&, const std::vector<int>&, double,   \
                              double);                                                           \
  template std::size_t reinit_dead_codes<T>(Codebook<T>&, const Tensor<T>&, Rng&, double);

RDVQ_INSTANTIATE_VQ(float)
RDVQ_INSTANTIATE_VQ(double)

}  // namespace rdvq
