#include "opal/losses.hpp"

#include <algorithm>
#include <cmath>

#include "opal/error.hpp"

namespace opal {

OrthLoss loss_orth(const Mat& G) {
  const int k = G.rows;
  OrthLoss out;
  out.dG = Mat(k, G.cols);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      const double c = dot(G.row_span(i), G.row_span(j));
      out.value += c * c;
      // Both ordered pairs (i,j) and (j,i) hit this row; 2c each.
      axpy(2.0 * c, G.row_span(j), out.dG.row_span(i));
      axpy(2.0 * c, G.row_span(i), out.dG.row_span(j));
    }
  }
  return out;
}

UnifLoss loss_unif(std::span<const double> w) {
  const int k = static_cast<int>(w.size());
  double mu = 0.0;
  for (double x : w) mu += x;
  mu /= k;
  if (!(mu > 0.0)) throw DivergenceError("degenerate batch: zero assignment mass");

  double var = 0.0;
  for (double x : w) var += (x - mu) * (x - mu);
  var /= k;
  const double sigma = std::sqrt(var);

  UnifLoss out;
  out.value = sigma / mu;
  out.dW.assign(w.size(), 0.0);
  if (sigma > 0.0) {
    // d(sigma/mu)/dw_j = (w_j - mu) / (k sigma mu) - sigma / (k mu^2)
    for (int j = 0; j < k; ++j) {
      out.dW[j] = (w[j] - mu) / (k * sigma * mu) - sigma / (k * mu * mu);
    }
  }
  // sigma == 0 is the minimum; subgradient 0.
  return out;
}

UniqueLoss loss_unique(const Mat& probs) {
  const int n = probs.rows;
  const int k = probs.cols;
  UniqueLoss out;
  out.d_probs = Mat(n, k);
  if (n == 0) return out;

  const double inv_n = 1.0 / n;
  for (int l = 0; l < n; ++l) {
    const double* a = probs.row(l);
    int m = 0;
    double sum = a[0];
    for (int j = 1; j < k; ++j) {
      if (a[j] > a[m]) m = j;
      sum += a[j];
    }
    out.value += -std::log(a[m] / sum) * inv_n;
    double* da = out.d_probs.row(l);
    for (int j = 0; j < k; ++j) da[j] = inv_n / sum;
    da[m] -= inv_n / a[m];
  }
  return out;
}

MainLoss loss_main(const Mat& u, std::span<const double> positive,
                   std::span<const std::span<const double>> negatives,
                   double epsilon) {
  if (epsilon <= 0.0) throw ConfigError("epsilon must be positive");
  const int k = u.rows;
  const int d = u.cols;
  const int n_cand = 1 + static_cast<int>(negatives.size());
  if (n_cand < 2) throw ConfigError("need at least one negative candidate");

  MainLoss out;
  out.dU = Mat(k, d);
  out.dCand = Mat(n_cand, d);
  out.argmax_interest.resize(n_cand);

  auto candidate = [&](int c) -> std::span<const double> {
    return c == 0 ? positive : negatives[c - 1];
  };

  std::vector<double> scores(n_cand);
  for (int c = 0; c < n_cand; ++c) {
    const auto v = candidate(c);
    int best = 0;
    double best_score = dot(v, u.row_span(0)) / epsilon;
    for (int j = 1; j < k; ++j) {
      const double s = dot(v, u.row_span(j)) / epsilon;
      if (s > best_score) {
        best_score = s;
        best = j;
      }
    }
    scores[c] = best_score;
    out.argmax_interest[c] = best;
  }

  const double zmax = *std::max_element(scores.begin(), scores.end());
  double lse = 0.0;
  for (double s : scores) lse += std::exp(s - zmax);
  lse = zmax + std::log(lse);
  out.value = lse - scores[0];

  // d(loss)/d(score_c) = softmax_c - [c == positive]
  for (int c = 0; c < n_cand; ++c) {
    const double g = std::exp(scores[c] - lse) - (c == 0 ? 1.0 : 0.0);
    const auto v = candidate(c);
    const int j = out.argmax_interest[c];
    axpy(g / epsilon, v, out.dU.row_span(j));
    axpy(g / epsilon, u.row_span(j), out.dCand.row_span(c));
  }
  return out;
}

LossBreakdown total_loss(double main, double orth, double unif, double unique,
                         const LossWeights& w, Stage stage) {
  LossBreakdown b;
  b.main = main;
  b.orth = orth;
  b.unif = unif;
  b.unique = stage == Stage::pretrain ? 0.0 : unique;
  b.weights = w;
  const double lq = stage == Stage::pretrain ? 0.0 : w.lambda_q;
  b.total = w.main_weight * main + w.lambda_o * orth + w.lambda_f * unif +
            lq * b.unique;
  return b;
}

}  // namespace opal
