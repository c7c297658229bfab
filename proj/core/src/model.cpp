#include "opal/model.hpp"

#include <algorithm>

#include "opal/error.hpp"

namespace opal {

BatchResult batch_forward_backward(const EmbeddingStore& store,
                                   const GruParams& gru,
                                   std::span<const TrainInstance> instances,
                                   std::span<const int> shared_negatives,
                                   const LossWeights& weights, double epsilon,
                                   Stage stage) {
  if (instances.empty()) throw ConfigError("empty batch");
  if (instances.size() != shared_negatives.size()) {
    throw ConfigError("need exactly one shared negative per instance");
  }
  const int k = store.k;
  const int batch = static_cast<int>(instances.size());
  const double inv_b = 1.0 / batch;

  BatchResult result{LossBreakdown{}, BatchGrads(store.d, k)};
  if (stage == Stage::finetune) result.grads.d_gru.emplace(store.d);

  // Forward over every instance; batch assignment mass for the uniformity term.
  std::vector<InterestForward> fwds;
  fwds.reserve(instances.size());
  Vec w(static_cast<std::size_t>(k), 0.0);
  for (const auto& inst : instances) {
    fwds.push_back(interest_forward(store, gru, inst.history, epsilon, stage));
    const auto& fwd = fwds.back();
    for (int j = 0; j < k; ++j) w[j] += fwd.intensity[j];
  }

  const UnifLoss unif = loss_unif(w);
  const OrthLoss orth = loss_orth(store.G);

  double main_sum = 0.0;
  double unique_sum = 0.0;

  for (int i = 0; i < batch; ++i) {
    const auto& inst = instances[i];
    const auto& fwd = fwds[i];

    // Candidate set: own positive plus shared negatives, masking any negative
    // equal to this instance's positive.
    std::vector<int> kept;
    kept.reserve(shared_negatives.size());
    for (int neg : shared_negatives) {
      if (neg != inst.positive) kept.push_back(neg);
    }
    if (kept.empty()) {
      throw DivergenceError("all shared negatives collide with a positive");
    }
    std::vector<std::span<const double>> neg_embs;
    neg_embs.reserve(kept.size());
    for (int neg : kept) neg_embs.push_back(store.item(neg));

    const MainLoss main =
        loss_main(fwd.u, store.item(inst.positive), neg_embs, epsilon);
    main_sum += main.value;

    // d(total)/dU for this instance.
    Mat dU(k, store.d);
    const double mw = weights.main_weight * inv_b;
    for (std::size_t c = 0; c < dU.a.size(); ++c) dU.a[c] = mw * main.dU.a[c];

    result.grads.dV.add_scaled(inst.positive, mw, main.dCand.row_span(0));
    for (std::size_t c = 0; c < kept.size(); ++c) {
      result.grads.dV.add_scaled(kept[c], mw,
                                 main.dCand.row_span(static_cast<int>(c) + 1));
    }

    // Extra gradient on the assignment probabilities: uniformity (through the
    // batch mass) and, in fine-tune, the unique loss.
    Mat d_probs(fwd.assign.probs.rows, k);
    for (int l = 0; l < d_probs.rows; ++l) {
      for (int j = 0; j < k; ++j) {
        d_probs.at(l, j) = weights.lambda_f * unif.dW[j];
      }
    }
    if (stage == Stage::finetune && weights.lambda_q != 0.0) {
      const UniqueLoss uniq = loss_unique(fwd.assign.probs);
      unique_sum += uniq.value;
      const double qw = weights.lambda_q * inv_b;
      for (std::size_t c = 0; c < d_probs.a.size(); ++c) {
        d_probs.a[c] += qw * uniq.d_probs.a[c];
      }
    } else if (stage == Stage::finetune) {
      unique_sum += loss_unique(fwd.assign.probs).value;
    }

    interest_backward(fwd, store, gru, dU, &d_probs, result.grads.dV,
                      result.grads.dG,
                      result.grads.d_gru ? &*result.grads.d_gru : nullptr);
  }

  for (std::size_t c = 0; c < result.grads.dG.a.size(); ++c) {
    result.grads.dG.a[c] += weights.lambda_o * orth.dG.a[c];
  }

  result.losses = total_loss(main_sum * inv_b, orth.value, unif.value,
                             unique_sum * inv_b, weights, stage);
  return result;
}

Mat user_interests(const EmbeddingStore& store, const GruParams& gru,
                   std::span<const int> history, double epsilon, Stage stage,
                   int l_max) {
  std::span<const int> tail = history;
  if (l_max > 0 && static_cast<int>(history.size()) > l_max) {
    tail = history.subspan(history.size() - static_cast<std::size_t>(l_max));
  }
  return interest_forward(store, gru, tail, epsilon, stage).u;
}

}  // namespace opal
