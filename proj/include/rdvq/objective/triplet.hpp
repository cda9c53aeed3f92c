#pragma once

// Triplet losses over a similarity table S (rows images, columns audio,
// S[j][k] = i_j . a_k). Both losses sum over the batch with margin 1.

#include <cstddef>
#include <vector>

#include "rdvq/common.hpp"
#include "rdvq/diffcore/graph.hpp"

namespace rdvq {

inline constexpr double kTripletMargin = 1.0;

struct LossBreakdown {
  double sampled = 0;   // L_s
  double semihard = 0;  // L_h
  double total = 0;     // L_s + L_h
  std::size_t violations = 0;  // active hinge terms
};

struct Impostors {
  std::vector<std::size_t> audio;  // audio impostor for image j
  std::vector<std::size_t> image;  // image impostor for audio j
};

// One uniform draw per direction over the other B - 1 items.
Impostors sample_impostors(std::size_t B, Rng& rng);

template <typename T>
double sampled_triplet_loss(const Tensor<T>& S, const Impostors& imp);

template <typename T>
double semihard_loss(const Tensor<T>& S);

// Hardest candidate strictly less similar than the true pair, per query;
// -1 when the candidate set is empty. Row direction: audio candidates for
// image j; column direction: image candidates for audio j.
template <typename T>
std::vector<long> semihard_audio(const Tensor<T>& S);
template <typename T>
std::vector<long> semihard_image(const Tensor<T>& S);

// L_s + L_h as one graph node with its gradient with respect to S.
template <typename T>
Var<T> triplet_loss(Var<T> S, const Impostors& imp, LossBreakdown* breakdown = nullptr);

}  // namespace rdvq
