#include "rdvq/objective/retrieval.hpp"

#include <stdexcept>
#include <string>

namespace rdvq {

Recall recall_at_n(const Tensor<float>& S, std::size_t n) {
  if (S.rank() != 2 || S.dim(0) != S.dim(1) || S.dim(0) == 0)
    throw std::invalid_argument("recall_at_n: similarity table must be square and non-empty");
  const std::size_t N = S.dim(0);
  if (n == 0 || n > N)
    throw std::invalid_argument("recall_at_n: n must lie in [1, " + std::to_string(N) + "]");
  std::size_t a2i = 0, i2a = 0;
  for (std::size_t q = 0; q < N; ++q) {
    const float truth = S(q, q);
    std::size_t above_col = 0, above_row = 0;
    for (std::size_t o = 0; o < N; ++o) {
      if (o == q) continue;
      // Audio query q ranks images by column q; image query q ranks audio by row q.
      if (S(o, q) > truth || (S(o, q) == truth && o < q)) ++above_col;
      if (S(q, o) > truth || (S(q, o) == truth && o < q)) ++above_row;
    }
    a2i += above_col < n;
    i2a += above_row < n;
  }
  Recall r;
  r.audio_to_image = double(a2i) / N;
  r.image_to_audio = double(i2a) / N;
  r.average = 0.5 * (r.audio_to_image + r.image_to_audio);
  return r;
}

}  // namespace rdvq
