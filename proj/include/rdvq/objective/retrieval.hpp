#pragma once

#include <cstddef>

#include "rdvq/diffcore/tensor.hpp"

namespace rdvq {

struct Recall {
  double audio_to_image = 0;
  double image_to_audio = 0;
  double average = 0;
};

// S: N x N, rows images, columns audio, pair k on the diagonal. A query
// retrieves its pair when fewer than n items rank above it; items rank
// above on higher similarity, and on equal similarity when their index is lower.
Recall recall_at_n(const Tensor<float>& S, std::size_t n);

}  // namespace rdvq
