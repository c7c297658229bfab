#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

namespace opal {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Small and transparent on purpose: the
// model is hand-differentiated, so everything stays plain loops over rows.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const {
    return a.data() + static_cast<std::size_t>(i) * cols;
  }
  std::span<double> row_span(int i) { return {row(i), static_cast<std::size_t>(cols)}; }
  std::span<const double> row_span(int i) const {
    return {row(i), static_cast<std::size_t>(cols)};
  }
  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const {
    return a[static_cast<std::size_t>(i) * cols + j];
  }
  void zero() { std::fill(a.begin(), a.end(), 0.0); }
};

inline double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(double alpha, std::span<double> x) {
  for (auto& v : x) v *= alpha;
}

inline double nrm2(std::span<const double> x) {
  return std::sqrt(dot(x, x));
}

// y = M x (M row-major r x c, x length c, y length r)
inline void matvec(const Mat& m, std::span<const double> x, std::span<double> y) {
  assert(static_cast<int>(x.size()) == m.cols &&
         static_cast<int>(y.size()) == m.rows);
  for (int i = 0; i < m.rows; ++i) y[i] = dot(m.row_span(i), x);
}

// y += M^T x (x length r, y length c)
inline void matvec_t_add(const Mat& m, std::span<const double> x,
                         std::span<double> y) {
  assert(static_cast<int>(x.size()) == m.rows &&
         static_cast<int>(y.size()) == m.cols);
  for (int i = 0; i < m.rows; ++i) axpy(x[i], m.row_span(i), y);
}

// M += alpha * u v^T (outer product accumulate)
inline void outer_add(Mat& m, double alpha, std::span<const double> u,
                      std::span<const double> v) {
  assert(static_cast<int>(u.size()) == m.rows &&
         static_cast<int>(v.size()) == m.cols);
  for (int i = 0; i < m.rows; ++i) axpy(alpha * u[i], v, m.row_span(i));
}

// Gradient accumulator for a sparsely-touched row matrix (item embeddings).
// Iteration is over sorted row ids so downstream updates are deterministic.
class RowGrads {
 public:
  explicit RowGrads(int cols) : cols_(cols) {}

  std::span<double> row(int id) {
    auto [it, inserted] = rows_.try_emplace(id);
    if (inserted) it->second.assign(static_cast<std::size_t>(cols_), 0.0);
    return {it->second.data(), it->second.size()};
  }
  void add(int id, std::span<const double> g) { axpy(1.0, g, row(id)); }
  void add_scaled(int id, double alpha, std::span<const double> g) {
    axpy(alpha, g, row(id));
  }

  bool contains(int id) const { return rows_.count(id) > 0; }
  std::size_t size() const { return rows_.size(); }
  int cols() const { return cols_; }

  const std::map<int, std::vector<double>>& items() const { return rows_; }

 private:
  int cols_;
  std::map<int, std::vector<double>> rows_;
};

}  // namespace opal
