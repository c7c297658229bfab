#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "opal/embedding.hpp"
#include "opal/linalg.hpp"

namespace opal {

struct RetrievalResult {
  std::vector<int> items;       // ranked, best first
  std::vector<double> scores;   // max-over-interests inner products
  std::vector<int> interests;   // argmax interest per returned item
  std::vector<int> per_interest_counts;  // length k
  bool truncated = false;       // fewer than K items were available
};

// Scores every non-history catalog item as max_j (v . u_j) and returns the
// top K. Ties break toward the lower item index.
RetrievalResult retrieve(const EmbeddingStore& store, const Mat& u,
                         std::span<const int> history, int K);

// Maximum-inner-product index over a frozen catalog. The default
// implementation is an exact scan; approximate backends have to document
// their recall against it.
class MipsIndex {
 public:
  virtual ~MipsIndex() = default;
  virtual int dim() const = 0;
  virtual int size() const = 0;
  // Top-k by inner product with q, skipping items flagged in `exclude`
  // (which may be empty). Ordering: score desc, then item index asc.
  virtual std::vector<std::pair<int, double>> top(
      std::span<const double> q, int k,
      const std::vector<std::uint8_t>& exclude) const = 0;
};

class ExactScanIndex final : public MipsIndex {
 public:
  explicit ExactScanIndex(const EmbeddingStore& store);
  int dim() const override { return d_; }
  int size() const override { return static_cast<int>(v_.rows); }
  std::vector<std::pair<int, double>> top(
      std::span<const double> q, int k,
      const std::vector<std::uint8_t>& exclude) const override;

 private:
  int d_;
  Mat v_;  // snapshot of the item embeddings
};

std::unique_ptr<MipsIndex> build_index(const EmbeddingStore& store);

// Per-interest candidate fetch (k' per interest) followed by a max-score
// merge and re-rank. With the exact index and k' >= K this reproduces
// retrieve() exactly.
RetrievalResult index_retrieve(const MipsIndex& index, const Mat& u,
                               std::span<const int> history, int K,
                               int k_prime = 0 /* 0 = K */);

}  // namespace opal
