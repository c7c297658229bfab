#include "opal/interest.hpp"

#include <algorithm>
#include <cmath>

#include "opal/error.hpp"

namespace opal {

SoftAssignment assign_soft(const EmbeddingStore& store,
                           std::span<const int> items, double epsilon) {
  if (epsilon <= 0.0) throw ConfigError("epsilon must be positive");
  const int n = static_cast<int>(items.size());
  const int k = store.k;

  SoftAssignment out;
  out.epsilon = epsilon;
  out.coords = Mat(n, k);
  out.probs = Mat(n, k);
  out.clamped.assign(static_cast<std::size_t>(n) * k, 0);

  for (int l = 0; l < n; ++l) {
    const auto v = store.item(items[l]);
    double* coord = out.coords.row(l);
    for (int j = 0; j < k; ++j) {
      double r = dot(store.category(j), v);
      // Unit rows keep |r| <= 1 up to float error; clamp the overshoot.
      if (r > 1.0) {
        r = 1.0;
        out.clamped[static_cast<std::size_t>(l) * k + j] = 1;
      } else if (r < -1.0) {
        r = -1.0;
        out.clamped[static_cast<std::size_t>(l) * k + j] = 1;
      }
      coord[j] = r;
    }

    // Sharpened softmax with max subtraction.
    double zmax = coord[0] / epsilon;
    for (int j = 1; j < k; ++j) zmax = std::max(zmax, coord[j] / epsilon);
    double* a = out.probs.row(l);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      a[j] = std::exp(coord[j] / epsilon - zmax);
      sum += a[j];
    }
    for (int j = 0; j < k; ++j) a[j] /= sum;
  }
  return out;
}

void soft_interests(const SoftAssignment& assign, const EmbeddingStore& store,
                    std::span<const int> items, Mat& p, Vec& intensity) {
  const int k = store.k;
  p = Mat(k, store.d);
  intensity.assign(static_cast<std::size_t>(k), 0.0);
  for (int l = 0; l < static_cast<int>(items.size()); ++l) {
    const auto v = store.item(items[l]);
    const double* a = assign.probs.row(l);
    for (int j = 0; j < k; ++j) {
      axpy(a[j], v, p.row_span(j));
      intensity[j] += a[j];
    }
  }
}

std::vector<int> assign_hard(const SoftAssignment& assign) {
  std::vector<int> labels(assign.probs.rows);
  for (int l = 0; l < assign.probs.rows; ++l) {
    const double* a = assign.probs.row(l);
    int best = 0;
    for (int j = 1; j < assign.probs.cols; ++j) {
      if (a[j] > a[best]) best = j;
    }
    labels[l] = best;
  }
  return labels;
}

std::vector<std::vector<int>> split_sequence(std::span<const int> items,
                                             std::span<const int> labels,
                                             int k) {
  std::vector<std::vector<int>> subseqs(static_cast<std::size_t>(k));
  for (std::size_t l = 0; l < items.size(); ++l) {
    subseqs.at(labels[l]).push_back(items[l]);
  }
  return subseqs;
}

HardInterests hard_interests(const EmbeddingStore& store, const GruParams& gru,
                             const std::vector<std::vector<int>>& subseqs) {
  const int k = static_cast<int>(subseqs.size());
  HardInterests out;
  out.q = Mat(k, store.d);
  out.valid.assign(static_cast<std::size_t>(k), 0);
  out.caches.resize(k);
  for (int j = 0; j < k; ++j) {
    if (subseqs[j].empty()) continue;
    out.caches[j] = gru_forward(gru, store, subseqs[j]);
    std::copy(out.caches[j].h_final.begin(), out.caches[j].h_final.end(),
              out.q.row(j));
    out.valid[j] = 1;
  }
  return out;
}

Mat fuse(const Mat& p, const Mat& q, const std::vector<std::uint8_t>& valid,
         Stage stage) {
  Mat u = p;
  if (stage == Stage::pretrain) return u;
  for (int j = 0; j < p.rows; ++j) {
    if (!valid[j]) continue;
    for (int c = 0; c < p.cols; ++c) {
      u.at(j, c) = 0.5 * (p.at(j, c) + q.at(j, c));
    }
  }
  return u;
}

void assign_backward(const SoftAssignment& assign, const EmbeddingStore& store,
                     std::span<const int> items, const Mat& d_probs,
                     RowGrads& dV, Mat& dG) {
  const int k = assign.probs.cols;
  const double inv_eps = 1.0 / assign.epsilon;
  Vec dcoord(static_cast<std::size_t>(k));

  for (int l = 0; l < assign.probs.rows; ++l) {
    const double* a = assign.probs.row(l);
    const double* da = d_probs.row(l);

    double inner = 0.0;  // sum_j da_j a_j
    for (int j = 0; j < k; ++j) inner += da[j] * a[j];
    for (int j = 0; j < k; ++j) {
      double dz = a[j] * (da[j] - inner);
      dcoord[j] =
          assign.clamped[static_cast<std::size_t>(l) * k + j] ? 0.0 : dz * inv_eps;
    }

    const auto v = store.item(items[l]);
    auto dv = dV.row(items[l]);
    for (int j = 0; j < k; ++j) {
      if (dcoord[j] == 0.0) continue;
      axpy(dcoord[j], store.category(j), dv);
      axpy(dcoord[j], v, dG.row_span(j));
    }
  }
}

void soft_interests_backward(const SoftAssignment& assign,
                             const EmbeddingStore& store,
                             std::span<const int> items, const Mat& dP,
                             const Vec* d_intensity, Mat& d_probs,
                             RowGrads& dV) {
  const int k = dP.rows;
  for (int l = 0; l < static_cast<int>(items.size()); ++l) {
    const auto v = store.item(items[l]);
    const double* a = assign.probs.row(l);
    auto dv = dV.row(items[l]);
    double* da = d_probs.row(l);
    for (int j = 0; j < k; ++j) {
      da[j] += dot(dP.row_span(j), v);
      if (d_intensity) da[j] += (*d_intensity)[j];
      axpy(a[j], dP.row_span(j), dv);
    }
  }
}

InterestForward interest_forward(const EmbeddingStore& store,
                                 const GruParams& gru,
                                 std::span<const int> items, double epsilon,
                                 Stage stage) {
  InterestForward fwd;
  fwd.items.assign(items.begin(), items.end());
  fwd.stage = stage;
  fwd.assign = assign_soft(store, items, epsilon);
  soft_interests(fwd.assign, store, items, fwd.p, fwd.intensity);
  if (stage == Stage::finetune) {
    fwd.labels = assign_hard(fwd.assign);
    fwd.subseqs = split_sequence(items, fwd.labels, store.k);
    fwd.hard = hard_interests(store, gru, fwd.subseqs);
    fwd.u = fuse(fwd.p, fwd.hard.q, fwd.hard.valid, stage);
  } else {
    fwd.u = fwd.p;
  }
  return fwd;
}

void interest_backward(const InterestForward& fwd, const EmbeddingStore& store,
                       const GruParams& gru, const Mat& dU,
                       const Mat* d_probs_extra, RowGrads& dV, Mat& dG,
                       GruGrads* d_gru) {
  const int k = store.k;
  Mat dP(k, store.d);

  if (fwd.stage == Stage::finetune) {
    Vec dq(static_cast<std::size_t>(store.d));
    for (int j = 0; j < k; ++j) {
      if (fwd.hard.valid[j]) {
        for (int c = 0; c < store.d; ++c) {
          dP.at(j, c) = 0.5 * dU.at(j, c);
          dq[c] = 0.5 * dU.at(j, c);
        }
        if (!d_gru) throw ConfigError("fine-tune backward needs GRU grads");
        gru_backward(gru, store, fwd.hard.caches[j], dq, *d_gru, dV);
      } else {
        for (int c = 0; c < store.d; ++c) dP.at(j, c) = dU.at(j, c);
      }
    }
  } else {
    dP = dU;
  }

  Mat d_probs(fwd.assign.probs.rows, k);
  if (d_probs_extra) d_probs = *d_probs_extra;
  soft_interests_backward(fwd.assign, store, fwd.items, dP, nullptr, d_probs,
                          dV);
  assign_backward(fwd.assign, store, fwd.items, d_probs, dV, dG);
}

}  // namespace opal
