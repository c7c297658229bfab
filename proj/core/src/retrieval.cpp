#include "opal/retrieval.hpp"

#include <algorithm>
#include <map>

#include "opal/error.hpp"

namespace opal {

namespace {

struct Scored {
  double score;
  int item;
  int interest;
};

inline bool better(const Scored& a, const Scored& b) {
  return a.score != b.score ? a.score > b.score : a.item < b.item;
}

RetrievalResult rank_top(std::vector<Scored>& pool, int K, int k) {
  const int take = std::min<int>(K, static_cast<int>(pool.size()));
  std::partial_sort(pool.begin(), pool.begin() + take, pool.end(), better);

  RetrievalResult out;
  out.truncated = take < K;
  out.items.reserve(take);
  out.scores.reserve(take);
  out.interests.reserve(take);
  out.per_interest_counts.assign(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < take; ++i) {
    out.items.push_back(pool[i].item);
    out.scores.push_back(pool[i].score);
    out.interests.push_back(pool[i].interest);
    ++out.per_interest_counts[pool[i].interest];
  }
  return out;
}

}  // namespace

RetrievalResult retrieve(const EmbeddingStore& store, const Mat& u,
                         std::span<const int> history, int K) {
  if (K < 1) throw ConfigError("K must be >= 1");
  if (u.cols != store.d) throw DimensionError("interest/store dim mismatch");
  if (u.rows < 1) throw ConfigError("need at least one interest");

  std::vector<std::uint8_t> excluded(store.catalog_size, 0);
  for (int h : history) excluded.at(h) = 1;

  std::vector<Scored> pool;
  pool.reserve(store.catalog_size);
  for (int v = 0; v < store.catalog_size; ++v) {
    if (excluded[v]) continue;
    const auto emb = store.item(v);
    double best = dot(emb, u.row_span(0));
    int best_j = 0;
    for (int j = 1; j < u.rows; ++j) {
      const double s = dot(emb, u.row_span(j));
      if (s > best) {
        best = s;
        best_j = j;
      }
    }
    pool.push_back({best, v, best_j});
  }
  return rank_top(pool, K, u.rows);
}

ExactScanIndex::ExactScanIndex(const EmbeddingStore& store)
    : d_(store.d), v_(store.V) {}

std::vector<std::pair<int, double>> ExactScanIndex::top(
    std::span<const double> q, int k,
    const std::vector<std::uint8_t>& exclude) const {
  if (static_cast<int>(q.size()) != d_) {
    throw DimensionError("query dimension " + std::to_string(q.size()) +
                         " does not match index dimension " +
                         std::to_string(d_));
  }
  std::vector<Scored> pool;
  pool.reserve(v_.rows);
  for (int v = 0; v < v_.rows; ++v) {
    if (!exclude.empty() && exclude[v]) continue;
    pool.push_back({dot(v_.row_span(v), q), v, 0});
  }
  const int take = std::min<int>(k, static_cast<int>(pool.size()));
  std::partial_sort(pool.begin(), pool.begin() + take, pool.end(), better);
  std::vector<std::pair<int, double>> out;
  out.reserve(take);
  for (int i = 0; i < take; ++i) out.emplace_back(pool[i].item, pool[i].score);
  return out;
}

std::unique_ptr<MipsIndex> build_index(const EmbeddingStore& store) {
  return std::make_unique<ExactScanIndex>(store);
}

RetrievalResult index_retrieve(const MipsIndex& index, const Mat& u,
                               std::span<const int> history, int K,
                               int k_prime) {
  if (K < 1) throw ConfigError("K must be >= 1");
  if (u.cols != index.dim()) {
    throw DimensionError("interest dimension " + std::to_string(u.cols) +
                         " does not match index dimension " +
                         std::to_string(index.dim()));
  }
  if (k_prime <= 0) k_prime = K;

  std::vector<std::uint8_t> excluded(index.size(), 0);
  for (int h : history) excluded.at(h) = 1;

  // Merge per-interest pools by max score; remember the winning interest.
  std::map<int, std::pair<double, int>> merged;  // item -> (score, interest)
  for (int j = 0; j < u.rows; ++j) {
    for (const auto& [item, score] : index.top(u.row_span(j), k_prime, excluded)) {
      auto it = merged.find(item);
      if (it == merged.end()) {
        merged.emplace(item, std::make_pair(score, j));
      } else if (score > it->second.first) {
        it->second = {score, j};
      }
    }
  }

  std::vector<Scored> pool;
  pool.reserve(merged.size());
  for (const auto& [item, sj] : merged) {
    pool.push_back({sj.first, item, sj.second});
  }
  return rank_top(pool, K, u.rows);
}

}  // namespace opal
