#pragma once

#include <optional>
#include <span>
#include <vector>

#include "opal/data.hpp"
#include "opal/embedding.hpp"
#include "opal/gru.hpp"
#include "opal/interest.hpp"
#include "opal/losses.hpp"

namespace opal {

struct BatchGrads {
  RowGrads dV;
  Mat dG;
  std::optional<GruGrads> d_gru;  // engaged in fine-tune

  BatchGrads(int d, int k) : dV(d), dG(k, d) {}
};

struct BatchResult {
  LossBreakdown losses;
  BatchGrads grads;
};

// One full training step's forward and hand-derived backward:
//   main: sampled softmax over {positive} + shared negatives, max-over-
//         interest scores; negatives colliding with an instance's own
//         positive are masked out of its denominator
//   orth: hyper-category orthogonality penalty
//   unif: coefficient of variation of the batch assignment mass
//   unique (fine-tune): assignment sharpness penalty
// Gradients are for the weighted total.
BatchResult batch_forward_backward(const EmbeddingStore& store,
                                   const GruParams& gru,
                                   std::span<const TrainInstance> instances,
                                   std::span<const int> shared_negatives,
                                   const LossWeights& weights, double epsilon,
                                   Stage stage);

// Serving-side interest computation: history truncated to the most recent
// l_max items, fused according to the checkpoint stage.
Mat user_interests(const EmbeddingStore& store, const GruParams& gru,
                   std::span<const int> history, double epsilon, Stage stage,
                   int l_max);

}  // namespace opal
