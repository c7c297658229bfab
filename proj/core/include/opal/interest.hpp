#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "opal/embedding.hpp"
#include "opal/gru.hpp"
#include "opal/linalg.hpp"

namespace opal {

// Row-stochastic assignment of each sequence item to the k hyper-categories.
// coords holds the raw inner products g_j . v_l, probs the sharpened softmax.
struct SoftAssignment {
  Mat coords;  // |s| x k, clamped to [-1, 1]
  Mat probs;   // |s| x k, rows sum to 1
  double epsilon = 0.1;
  std::vector<std::uint8_t> clamped;  // |s| * k flags, gradient blocked where set
};

SoftAssignment assign_soft(const EmbeddingStore& store,
                           std::span<const int> items, double epsilon);

// p_j = sum_l a_lj v_l; intensity_j = sum_l a_lj.
void soft_interests(const SoftAssignment& assign, const EmbeddingStore& store,
                    std::span<const int> items, Mat& p, Vec& intensity);

// argmax_j a_lj per row, ties to the lowest category index.
std::vector<int> assign_hard(const SoftAssignment& assign);

// Order-preserving split of the sequence into k label groups.
std::vector<std::vector<int>> split_sequence(std::span<const int> items,
                                             std::span<const int> labels,
                                             int k);

struct HardInterests {
  Mat q;                              // k x d, rows defined where valid
  std::vector<std::uint8_t> valid;    // non-empty subsequence flags
  std::vector<GruCache> caches;       // one per category, for backprop
};

// GRU final state per non-empty subsequence.
HardInterests hard_interests(const EmbeddingStore& store, const GruParams& gru,
                             const std::vector<std::vector<int>>& subseqs);

// Pre-train: u = p. Fine-tune: u_j = (p_j + q_j) / 2 where q_j is valid,
// u_j = p_j otherwise.
Mat fuse(const Mat& p, const Mat& q, const std::vector<std::uint8_t>& valid,
         Stage stage);

// ---- backward helpers (chain rule pieces used by the trainer and tests) ----

// d(loss)/d(probs) -> accumulates d(loss)/dV rows and d(loss)/dG through the
// sharpened softmax over clamped inner products.
void assign_backward(const SoftAssignment& assign, const EmbeddingStore& store,
                     std::span<const int> items, const Mat& d_probs,
                     RowGrads& dV, Mat& dG);

// d(loss)/dp (and optionally d(loss)/d intensity) -> accumulates into
// d(loss)/d(probs) and d(loss)/dV.
void soft_interests_backward(const SoftAssignment& assign,
                             const EmbeddingStore& store,
                             std::span<const int> items, const Mat& dP,
                             const Vec* d_intensity, Mat& d_probs,
                             RowGrads& dV);

// Full per-user interest computation, including the hard path in fine-tune.
struct InterestForward {
  std::vector<int> items;
  SoftAssignment assign;
  Mat p;
  Vec intensity;
  std::vector<int> labels;                  // fine-tune only
  std::vector<std::vector<int>> subseqs;    // fine-tune only
  HardInterests hard;                       // fine-tune only
  Mat u;                                    // k x d fused interests
  Stage stage = Stage::pretrain;
};

InterestForward interest_forward(const EmbeddingStore& store,
                                 const GruParams& gru,
                                 std::span<const int> items, double epsilon,
                                 Stage stage);

// Backward through fuse -> (GRU, soft interests). Extra gradient on the
// assignment probabilities (from the unique/uniformity losses) is passed in
// via d_probs_extra and folded into the same softmax backward.
void interest_backward(const InterestForward& fwd, const EmbeddingStore& store,
                       const GruParams& gru, const Mat& dU,
                       const Mat* d_probs_extra, RowGrads& dV, Mat& dG,
                       GruGrads* d_gru);

}  // namespace opal
