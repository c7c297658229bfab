#pragma once

#include <span>
#include <vector>

#include "opal/embedding.hpp"
#include "opal/linalg.hpp"

namespace opal {

// Per-step activations kept for backprop.
struct GruStep {
  Vec z, r, htilde, h_prev;
};

struct GruCache {
  std::vector<int> items;  // input item ids, in order
  std::vector<GruStep> steps;
  Vec h_final;             // zero vector for an empty input
};

// Gate equations:
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   h~ = tanh(Wh x + Uh (r .* h) + bh)
//   h' = (1 - z) .* h~ + z .* h
// started from a zero hidden state.
GruCache gru_forward(const GruParams& p, const EmbeddingStore& store,
                     std::span<const int> items);

struct GruGrads {
  Mat dWz, dWr, dWh, dUz, dUr, dUh;
  Vec dbz, dbr, dbh;

  explicit GruGrads(int d)
      : dWz(d, d), dWr(d, d), dWh(d, d), dUz(d, d), dUr(d, d), dUh(d, d),
        dbz(d, 0.0), dbr(d, 0.0), dbh(d, 0.0) {}
  void zero();
};

// Backprop through time from a gradient on the final hidden state.
// Accumulates into the parameter grads and the input item embedding grads.
void gru_backward(const GruParams& p, const EmbeddingStore& store,
                  const GruCache& cache, std::span<const double> d_h_final,
                  GruGrads& dp, RowGrads& dV);

}  // namespace opal
