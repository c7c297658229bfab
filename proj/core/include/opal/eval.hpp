#pragma once

#include <span>
#include <unordered_set>
#include <vector>

#include "opal/data.hpp"
#include "opal/embedding.hpp"
#include "opal/linalg.hpp"
#include "opal/retrieval.hpp"

namespace opal {

// |top-K(recommended) intersect truth| / |truth|.
double recall_at_k(std::span<const int> recommended,
                   const std::unordered_set<int>& truth, int K);

// Fraction of users with at least one hit in their top-K.
double hitrate_at_k(std::span<const std::uint8_t> user_has_hit);

struct EvalReport {
  std::vector<int> ks;
  std::vector<double> recall;   // parallel to ks
  std::vector<double> hitrate;  // parallel to ks
  int users = 0;
  std::vector<long long> interest_attribution;  // at the largest K, summed
};

// Retrieval + metrics over a set of evaluation records. Histories are
// truncated to l_max before interest extraction, matching training.
EvalReport evaluate_records(const EmbeddingStore& store, const GruParams& gru,
                            std::span<const EvalRecord> records,
                            std::span<const int> ks, double epsilon,
                            Stage stage, int l_max);

// Shifted positive PMI over user-level co-occurrence in the train split:
//   count(i,j) = users whose train sequence holds both, D = user count,
//   SPPMI = max(ln(count(i,j) D / (count(i) count(j))) - ln(shift), 0).
// Rows/cols follow `subset`; the diagonal is zeroed.
struct SppmiMatrix {
  std::vector<int> items;  // the subset, in given order
  Mat values;
  double shift = 1.0;
};

SppmiMatrix sppmi(std::span<const Sequence> train, std::span<const int> subset,
                  double shift);

// Off-diagonal means split by whether the pair was recalled by the same
// interest. `interests` is parallel to the matrix items.
struct SppmiSummary {
  double within_interest_mean = 0.0;
  double cross_interest_mean = 0.0;
  double overall_mean = 0.0;
};

SppmiSummary summarize_sppmi(const SppmiMatrix& m,
                             std::span<const int> interests);

// Agreement between two labelings of the same items.
struct RecoveryScore {
  double ami = 0.0;                // adjusted mutual information
  double matched_accuracy = 0.0;   // accuracy under the best label matching
};

RecoveryScore category_recovery(std::span<const int> planted,
                                std::span<const int> learned);

// Minimum-cost assignment (square cost matrix); returns column per row.
std::vector<int> hungarian(const Mat& cost);

}  // namespace opal
