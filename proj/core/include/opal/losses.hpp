#pragma once

#include <span>
#include <vector>

#include "opal/embedding.hpp"
#include "opal/linalg.hpp"

namespace opal {

struct LossWeights {
  double lambda_o = 10.0;
  double lambda_f = 1.0;
  double lambda_q = 1.0;
  // Internal knob for gradient isolation in tests; the trainer keeps it at 1.
  double main_weight = 1.0;
};

struct LossBreakdown {
  double main = 0.0;
  double orth = 0.0;
  double unif = 0.0;
  double unique = 0.0;
  double total = 0.0;
  LossWeights weights;
};

// Sum over ordered pairs i != j of (g_i . g_j)^2, so each unordered pair
// counts twice. Zero exactly when rows are pairwise orthogonal.
struct OrthLoss {
  double value = 0.0;
  Mat dG;
};
OrthLoss loss_orth(const Mat& G);

// Coefficient of variation sigma_w / mu_w of the per-category assignment
// mass, with the population standard deviation (so k = 1 gives 0).
struct UnifLoss {
  double value = 0.0;
  Vec dW;
};
UnifLoss loss_unif(std::span<const double> w);

// Mean over rows of -ln(max_j a_lj / sum_j a_lj). Rows are softmax outputs,
// so the value equals mean(-ln max a), but the written ratio is what is
// computed and differentiated.
struct UniqueLoss {
  double value = 0.0;
  Mat d_probs;
};
UniqueLoss loss_unique(const Mat& probs);

// Sampled-softmax cross entropy over {positive} + negatives, where each
// candidate is scored max_j (v . u_j) / epsilon. The gradient routes through
// the argmax interest only (lowest index on ties).
struct MainLoss {
  double value = 0.0;
  Mat dU;      // k x d
  Mat dCand;   // (1 + #negatives) x d; row 0 is the positive
  std::vector<int> argmax_interest;  // per candidate
};
MainLoss loss_main(const Mat& u, std::span<const double> positive,
                   std::span<const std::span<const double>> negatives,
                   double epsilon);

// Weighted total per stage; pre-train drops the unique term entirely.
LossBreakdown total_loss(double main, double orth, double unif, double unique,
                         const LossWeights& w, Stage stage);

}  // namespace opal
