#include "rdvq/objective/triplet.hpp"

#include <stdexcept>

namespace rdvq {

namespace {

template <typename T>
void require_square(const Tensor<T>& S, const char* op) {
  if (S.rank() != 2 || S.dim(0) != S.dim(1))
    throw std::invalid_argument(std::string(op) + ": similarity table must be square, got " +
                                shape_str(S.shape()));
}

template <typename T>
double hinge(T impostor, T positive) {
  const double v = double(impostor) - double(positive) + kTripletMargin;
  return v > 0 ? v : 0.0;
}

}  // namespace

Impostors sample_impostors(std::size_t B, Rng& rng) {
  if (B < 2) throw std::invalid_argument("sampled triplet loss needs a batch of at least 2");
  Impostors imp;
  std::uniform_int_distribution<std::size_t> pick(0, B - 2);
  for (std::size_t j = 0; j < B; ++j) {
    std::size_t a = pick(rng);
    imp.audio.push_back(a >= j ? a + 1 : a);
  }
  for (std::size_t j = 0; j < B; ++j) {
    std::size_t i = pick(rng);
    imp.image.push_back(i >= j ? i + 1 : i);
  }
  return imp;
}

template <typename T>
double sampled_triplet_loss(const Tensor<T>& S, const Impostors& imp) {
  require_square(S, "sampled_triplet_loss");
  const std::size_t B = S.dim(0);
  if (B < 2) throw std::invalid_argument("sampled triplet loss needs a batch of at least 2");
  if (imp.audio.size() != B || imp.image.size() != B)
    throw std::invalid_argument("sampled_triplet_loss: one impostor per example is required");
  double loss = 0;
  for (std::size_t j = 0; j < B; ++j) {
    if (imp.audio[j] == j || imp.image[j] == j || imp.audio[j] >= B || imp.image[j] >= B)
      throw std::invalid_argument("sampled_triplet_loss: impostor must be another batch item");
    loss += hinge(S(j, imp.audio[j]), S(j, j)) + hinge(S(imp.image[j], j), S(j, j));
  }
  return loss;
}

template <typename T>
std::vector<long> semihard_audio(const Tensor<T>& S) {
  require_square(S, "semihard");
  const std::size_t B = S.dim(0);
  std::vector<long> out(B, -1);
  for (std::size_t j = 0; j < B; ++j)
    for (std::size_t k = 0; k < B; ++k)
      if (S(j, k) < S(j, j) && (out[j] < 0 || S(j, k) > S(j, std::size_t(out[j])))) out[j] = long(k);
  return out;
}

template <typename T>
std::vector<long> semihard_image(const Tensor<T>& S) {
  require_square(S, "semihard");
  const std::size_t B = S.dim(0);
  std::vector<long> out(B, -1);
  for (std::size_t j = 0; j < B; ++j)
    for (std::size_t k = 0; k < B; ++k)
      if (S(k, j) < S(j, j) && (out[j] < 0 || S(k, j) > S(std::size_t(out[j]), j))) out[j] = long(k);
  return out;
}

template <typename T>
double semihard_loss(const Tensor<T>& S) {
  const auto ha = semihard_audio(S), hi = semihard_image(S);
  double loss = 0;
  for (std::size_t j = 0; j < S.dim(0); ++j) {
    if (ha[j] >= 0) loss += hinge(S(j, std::size_t(ha[j])), S(j, j));
    if (hi[j] >= 0) loss += hinge(S(std::size_t(hi[j]), j), S(j, j));
  }
  return loss;
}

template <typename T>
Var<T> triplet_loss(Var<T> S, const Impostors& imp, LossBreakdown* breakdown) {
  const Tensor<T>& s = S.value();
  const double ls = sampled_triplet_loss(s, imp);
  const double lh = semihard_loss(s);
  const std::size_t B = s.dim(0);

  // Sub-gradient: each active hinge adds +1 at the impostor entry and -1 at the diagonal.
  Tensor<T> dS({B, B});
  std::size_t active = 0;
  auto credit = [&](std::size_t r, std::size_t c, std::size_t j) {
    if (hinge(s(r, c), s(j, j)) > 0) {
      dS(r, c) += T(1);
      dS(j, j) -= T(1);
      ++active;
    }
  };
  const auto ha = semihard_audio(s), hi = semihard_image(s);
  for (std::size_t j = 0; j < B; ++j) {
    credit(j, imp.audio[j], j);
    credit(imp.image[j], j, j);
    if (ha[j] >= 0) credit(j, std::size_t(ha[j]), j);
    if (hi[j] >= 0) credit(std::size_t(hi[j]), j, j);
  }
  if (breakdown) *breakdown = {ls, lh, ls + lh, active};

  const std::size_t sid = S.id();
  auto fn = [sid, dS = std::move(dS)](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& gs = g.accumulate_grad(sid);
    const T scale = go[0];
    for (std::size_t i = 0; i < gs.size(); ++i) gs[i] += scale * dS[i];
  };
  return S.graph()->record(Tensor<T>({1}, std::vector<T>{T(ls + lh)}), {S}, fn);
}

#define RDVQ_INSTANTIATE_TRIPLET(T)                                             \
  template double sampled_triplet_loss<T>(const Tensor<T>&, const Impostors&); \
  template double semihard_loss<T>(const Tensor<T>&);                          \
  template std::vector<long> semihard_audio<T>(const Tensor<T>&);              \
  template std::vector<long> semihard_image<T>(const Tensor<T>&);              \
  template Var<T> triplet_loss<T>(Var<T>, const Impostors&, LossBreakdown*);

RDVQ_INSTANTIATE_TRIPLET(float)
RDVQ_INSTANTIATE_TRIPLET(double)

}  // namespace rdvq
