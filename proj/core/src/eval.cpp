#include "opal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "opal/error.hpp"
#include "opal/model.hpp"

namespace opal {

double recall_at_k(std::span<const int> recommended,
                   const std::unordered_set<int>& truth, int K) {
  if (truth.empty()) throw ConfigError("recall needs a non-empty truth set");
  const int top = std::min<int>(K, static_cast<int>(recommended.size()));
  int hits = 0;
  for (int i = 0; i < top; ++i) {
    if (truth.count(recommended[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double hitrate_at_k(std::span<const std::uint8_t> user_has_hit) {
  if (user_has_hit.empty()) throw ConfigError("hitrate needs >= 1 user");
  double hits = 0.0;
  for (auto h : user_has_hit) hits += h ? 1.0 : 0.0;
  return hits / static_cast<double>(user_has_hit.size());
}

EvalReport evaluate_records(const EmbeddingStore& store, const GruParams& gru,
                            std::span<const EvalRecord> records,
                            std::span<const int> ks, double epsilon,
                            Stage stage, int l_max) {
  EvalReport report;
  report.ks.assign(ks.begin(), ks.end());
  report.recall.assign(ks.size(), 0.0);
  report.hitrate.assign(ks.size(), 0.0);
  report.interest_attribution.assign(static_cast<std::size_t>(store.k), 0);
  if (records.empty()) return report;

  const int k_max = *std::max_element(ks.begin(), ks.end());
  std::vector<std::vector<std::uint8_t>> hits(ks.size());

  for (const auto& rec : records) {
    if (rec.truth.empty()) continue;
    const Mat u =
        user_interests(store, gru, rec.history, epsilon, stage, l_max);
    const RetrievalResult res = retrieve(store, u, rec.history, k_max);
    const std::unordered_set<int> truth(rec.truth.begin(), rec.truth.end());

    for (std::size_t i = 0; i < report.ks.size(); ++i) {
      const double r = recall_at_k(res.items, truth, report.ks[i]);
      report.recall[i] += r;
      hits[i].push_back(r > 0.0 ? 1 : 0);
    }
    for (int j = 0; j < store.k; ++j) {
      report.interest_attribution[j] += res.per_interest_counts[j];
    }
    ++report.users;
  }

  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    if (report.users > 0) report.recall[i] /= report.users;
    report.hitrate[i] = hits[i].empty() ? 0.0 : hitrate_at_k(hits[i]);
  }
  return report;
}

SppmiMatrix sppmi(std::span<const Sequence> train, std::span<const int> subset,
                  double shift) {
  if (shift <= 0.0) throw ConfigError("sppmi shift must be positive");
  const int m = static_cast<int>(subset.size());

  SppmiMatrix out;
  out.items.assign(subset.begin(), subset.end());
  out.values = Mat(m, m);
  out.shift = shift;

  std::unordered_map<int, int> local;
  local.reserve(subset.size());
  for (int i = 0; i < m; ++i) local.emplace(subset[i], i);

  std::vector<long long> count(m, 0);
  Mat co(m, m);
  std::vector<int> present;
  for (const auto& seq : train) {
    present.clear();
    std::unordered_set<int> seen;
    for (int item : seq.items) {
      auto it = local.find(item);
      if (it != local.end() && seen.insert(it->second).second) {
        present.push_back(it->second);
      }
    }
    for (std::size_t a = 0; a < present.size(); ++a) {
      ++count[present[a]];
      for (std::size_t b = a + 1; b < present.size(); ++b) {
        co.at(present[a], present[b]) += 1.0;
        co.at(present[b], present[a]) += 1.0;
      }
    }
  }

  const double users = static_cast<double>(train.size());
  const double log_shift = std::log(shift);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i == j || co.at(i, j) == 0.0 || count[i] == 0 || count[j] == 0) {
        continue;
      }
      const double pmi = std::log(co.at(i, j) * users /
                                  (static_cast<double>(count[i]) *
                                   static_cast<double>(count[j])));
      out.values.at(i, j) = std::max(pmi - log_shift, 0.0);
    }
  }
  return out;
}

SppmiSummary summarize_sppmi(const SppmiMatrix& m,
                             std::span<const int> interests) {
  if (interests.size() != m.items.size()) {
    throw ConfigError("interest attribution must match the matrix items");
  }
  SppmiSummary s;
  double within = 0.0, cross = 0.0, all = 0.0;
  long long n_within = 0, n_cross = 0, n_all = 0;
  for (int i = 0; i < m.values.rows; ++i) {
    for (int j = 0; j < m.values.cols; ++j) {
      if (i == j) continue;
      const double v = m.values.at(i, j);
      all += v;
      ++n_all;
      if (interests[i] == interests[j]) {
        within += v;
        ++n_within;
      } else {
        cross += v;
        ++n_cross;
      }
    }
  }
  s.overall_mean = n_all ? all / n_all : 0.0;
  s.within_interest_mean = n_within ? within / n_within : 0.0;
  s.cross_interest_mean = n_cross ? cross / n_cross : 0.0;
  return s;
}

std::vector<int> hungarian(const Mat& cost) {
  if (cost.rows != cost.cols) throw ConfigError("hungarian needs a square matrix");
  const int n = cost.rows;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost.at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> match(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) match[p[j] - 1] = j - 1;
  }
  return match;
}

namespace {

// Expected mutual information under the fixed-marginals permutation model.
double expected_mi(const std::vector<long long>& a,
                   const std::vector<long long>& b, long long n) {
  const double log_n = std::log(static_cast<double>(n));
  double emi = 0.0;
  for (long long ai : a) {
    for (long long bj : b) {
      const long long lo = std::max<long long>(1, ai + bj - n);
      const long long hi = std::min(ai, bj);
      for (long long nij = lo; nij <= hi; ++nij) {
        const double t1 = static_cast<double>(nij) / n;
        const double t2 = std::log(static_cast<double>(nij)) + log_n -
                          std::log(static_cast<double>(ai)) -
                          std::log(static_cast<double>(bj));
        const double log_term =
            std::lgamma(ai + 1) + std::lgamma(bj + 1) +
            std::lgamma(n - ai + 1) + std::lgamma(n - bj + 1) -
            std::lgamma(n + 1) - std::lgamma(nij + 1) -
            std::lgamma(ai - nij + 1) - std::lgamma(bj - nij + 1) -
            std::lgamma(n - ai - bj + nij + 1);
        emi += t1 * t2 * std::exp(log_term);
      }
    }
  }
  return emi;
}

double entropy(const std::vector<long long>& counts, long long n) {
  double h = 0.0;
  for (long long c : counts) {
    if (c > 0) {
      const double p = static_cast<double>(c) / n;
      h -= p * std::log(p);
    }
  }
  return h;
}

}  // namespace

RecoveryScore category_recovery(std::span<const int> planted,
                                std::span<const int> learned) {
  if (planted.size() != learned.size() || planted.empty()) {
    throw ConfigError("label sequences must be non-empty and equal length");
  }
  const long long n = static_cast<long long>(planted.size());
  int kp = 0, kl = 0;
  for (int x : planted) kp = std::max(kp, x + 1);
  for (int x : learned) kl = std::max(kl, x + 1);

  std::vector<std::vector<long long>> table(
      kp, std::vector<long long>(kl, 0));
  for (std::size_t i = 0; i < planted.size(); ++i) {
    ++table[planted[i]][learned[i]];
  }
  std::vector<long long> a(kp, 0), b(kl, 0);
  for (int i = 0; i < kp; ++i) {
    for (int j = 0; j < kl; ++j) {
      a[i] += table[i][j];
      b[j] += table[i][j];
    }
  }

  double mi = 0.0;
  for (int i = 0; i < kp; ++i) {
    for (int j = 0; j < kl; ++j) {
      if (table[i][j] == 0) continue;
      const double pij = static_cast<double>(table[i][j]) / n;
      mi += pij * std::log(static_cast<double>(table[i][j]) * n /
                           (static_cast<double>(a[i]) *
                            static_cast<double>(b[j])));
    }
  }

  RecoveryScore score;
  const double hu = entropy(a, n);
  const double hv = entropy(b, n);
  if (kp == 1 && kl == 1) {
    score.ami = 1.0;  // identical trivial partitions
  } else {
    const double emi = expected_mi(a, b, n);
    double denom = 0.5 * (hu + hv) - emi;
    const double tiny = std::numeric_limits<double>::epsilon();
    denom = denom < 0 ? std::min(denom, -tiny) : std::max(denom, tiny);
    score.ami = (mi - emi) / denom;
  }

  // Best one-to-one matching of learned to planted labels.
  const int m = std::max(kp, kl);
  Mat cost(m, m);
  for (int i = 0; i < kp; ++i) {
    for (int j = 0; j < kl; ++j) {
      cost.at(i, j) = -static_cast<double>(table[i][j]);
    }
  }
  const auto match = hungarian(cost);
  long long agree = 0;
  for (int i = 0; i < kp; ++i) {
    if (match[i] < kl) agree += table[i][match[i]];
  }
  score.matched_accuracy = static_cast<double>(agree) / n;
  return score;
}

}  // namespace opal
