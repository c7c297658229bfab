#include "opal/gru.hpp"

#include <cmath>

namespace opal {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

GruCache gru_forward(const GruParams& p, const EmbeddingStore& store,
                     std::span<const int> items) {
  const int d = p.d;
  GruCache cache;
  cache.items.assign(items.begin(), items.end());
  cache.h_final.assign(static_cast<std::size_t>(d), 0.0);
  if (items.empty()) return cache;

  Vec h(static_cast<std::size_t>(d), 0.0);
  Vec az(d), ar(d), ah(d), rh(d);
  cache.steps.reserve(items.size());

  for (int item : items) {
    const auto x = store.item(item);
    GruStep step;
    step.h_prev = h;

    matvec(p.Wz, x, az);
    for (int i = 0; i < d; ++i) az[i] += dot(p.Uz.row_span(i), h) + p.bz[i];
    matvec(p.Wr, x, ar);
    for (int i = 0; i < d; ++i) ar[i] += dot(p.Ur.row_span(i), h) + p.br[i];

    step.z.resize(d);
    step.r.resize(d);
    for (int i = 0; i < d; ++i) {
      step.z[i] = sigmoid(az[i]);
      step.r[i] = sigmoid(ar[i]);
    }

    for (int i = 0; i < d; ++i) rh[i] = step.r[i] * h[i];
    matvec(p.Wh, x, ah);
    for (int i = 0; i < d; ++i) ah[i] += dot(p.Uh.row_span(i), rh) + p.bh[i];

    step.htilde.resize(d);
    for (int i = 0; i < d; ++i) step.htilde[i] = std::tanh(ah[i]);

    for (int i = 0; i < d; ++i) {
      h[i] = (1.0 - step.z[i]) * step.htilde[i] + step.z[i] * step.h_prev[i];
    }
    cache.steps.push_back(std::move(step));
  }
  cache.h_final = std::move(h);
  return cache;
}

void GruGrads::zero() {
  dWz.zero();
  dWr.zero();
  dWh.zero();
  dUz.zero();
  dUr.zero();
  dUh.zero();
  std::fill(dbz.begin(), dbz.end(), 0.0);
  std::fill(dbr.begin(), dbr.end(), 0.0);
  std::fill(dbh.begin(), dbh.end(), 0.0);
}

void gru_backward(const GruParams& p, const EmbeddingStore& store,
                  const GruCache& cache, std::span<const double> d_h_final,
                  GruGrads& dp, RowGrads& dV) {
  const int d = p.d;
  if (cache.steps.empty()) return;

  Vec dh(d_h_final.begin(), d_h_final.end());
  Vec dhtilde(d), dz(d), dr(d), da_h(d), da_z(d), da_r(d), drh(d), dx(d),
      dh_prev(d), rh(d);

  for (int t = static_cast<int>(cache.steps.size()) - 1; t >= 0; --t) {
    const GruStep& s = cache.steps[t];
    const auto x = store.item(cache.items[t]);

    for (int i = 0; i < d; ++i) {
      dhtilde[i] = dh[i] * (1.0 - s.z[i]);
      dz[i] = dh[i] * (s.h_prev[i] - s.htilde[i]);
      dh_prev[i] = dh[i] * s.z[i];
      rh[i] = s.r[i] * s.h_prev[i];
    }

    // candidate gate
    for (int i = 0; i < d; ++i) {
      da_h[i] = dhtilde[i] * (1.0 - s.htilde[i] * s.htilde[i]);
    }
    outer_add(dp.dWh, 1.0, da_h, x);
    outer_add(dp.dUh, 1.0, da_h, rh);
    axpy(1.0, da_h, dp.dbh);
    std::fill(dx.begin(), dx.end(), 0.0);
    matvec_t_add(p.Wh, da_h, dx);
    std::fill(drh.begin(), drh.end(), 0.0);
    matvec_t_add(p.Uh, da_h, drh);
    for (int i = 0; i < d; ++i) {
      dr[i] = drh[i] * s.h_prev[i];
      dh_prev[i] += drh[i] * s.r[i];
    }

    // update gate
    for (int i = 0; i < d; ++i) da_z[i] = dz[i] * s.z[i] * (1.0 - s.z[i]);
    outer_add(dp.dWz, 1.0, da_z, x);
    outer_add(dp.dUz, 1.0, da_z, s.h_prev);
    axpy(1.0, da_z, dp.dbz);
    matvec_t_add(p.Wz, da_z, dx);
    matvec_t_add(p.Uz, da_z, dh_prev);

    // reset gate
    for (int i = 0; i < d; ++i) da_r[i] = dr[i] * s.r[i] * (1.0 - s.r[i]);
    outer_add(dp.dWr, 1.0, da_r, x);
    outer_add(dp.dUr, 1.0, da_r, s.h_prev);
    axpy(1.0, da_r, dp.dbr);
    matvec_t_add(p.Wr, da_r, dx);
    matvec_t_add(p.Ur, da_r, dh_prev);

    dV.add(cache.items[t], dx);
    dh = dh_prev;
  }
}

}  // namespace opal
