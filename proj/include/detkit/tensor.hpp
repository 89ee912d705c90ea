#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "detkit/errors.hpp"

namespace detkit {

/// Dense row-major tensor. No strided views, no broadcasting; every
/// reduction in this library runs in ascending index order so that
/// identical inputs always produce identical bytes.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(checked_numel(shape_), T{0}) {}

  Tensor(std::vector<std::size_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_numel(shape_) != data_.size())
      throw dimension_error("tensor: shape/data length mismatch");
  }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = T{1};
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t flat) { return data_[flat]; }
  const T& operator[](std::size_t flat) const { return data_[flat]; }

  // 2-D accessors; the matrix case dominates this codebase.
  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }

  Tensor reshaped(std::vector<std::size_t> shape) const {
    if (checked_numel(shape) != data_.size())
      throw dimension_error("reshape: element count mismatch");
    return Tensor(std::move(shape), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i)
      out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

 private:
  static std::size_t checked_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
      if (e == 0) throw dimension_error("tensor: zero extent");
      n *= e;
    }
    return n;
  }

  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

/// Exact row-major matrix product; the inner accumulation walks k in
/// ascending order with no reassociation.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw dimension_error("matmul: rank-2 operands required");
  if (a.extent(1) != b.extent(0))
    throw dimension_error("matmul: inner dimensions disagree");
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor<T> c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T acc{0};
      for (std::size_t p = 0; p < k; ++p) acc += a.at(i, p) * b.at(p, j);
      c.at(i, j) = acc;
    }
  return c;
}

template <typename T>
Tensor<T> transposed(const Tensor<T>& a) {
  if (a.rank() != 2) throw dimension_error("transpose: rank-2 required");
  Tensor<T> t({a.extent(1), a.extent(0)});
  for (std::size_t i = 0; i < a.extent(0); ++i)
    for (std::size_t j = 0; j < a.extent(1); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

struct SvdResult {
  Tensor<double> u;        // orthonormal columns, m x r
  std::vector<double> s;   // descending, nonnegative
  Tensor<double> v;        // orthonormal columns, n x r
};

namespace detail {

// One-sided Jacobi on the columns of a (m x n, m >= n assumed by caller).
// Cyclic (p,q) sweep order, p < q ascending; a rotation is skipped once
// |a_p . a_q| <= tol * |a_p| |a_q|.
inline void jacobi_columns(Tensor<double>& a, Tensor<double>& v) {
  const std::size_t m = a.extent(0), n = a.extent(1);
  const double tol = 1e-14;
  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0, beta = 0, gamma = 0;
        for (std::size_t i = 0; i < m; ++i) {
          const double ap = a.at(i, p), aq = a.at(i, q);
          alpha += ap * ap;
          beta += aq * aq;
          gamma += ap * aq;
        }
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha) * std::sqrt(beta))
          continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double ap = a.at(i, p), aq = a.at(i, q);
          a.at(i, p) = c * ap - s * aq;
          a.at(i, q) = s * ap + c * aq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v.at(i, p), vq = v.at(i, q);
          v.at(i, p) = c * vp - s * vq;
          v.at(i, q) = s * vp + c * vq;
        }
        rotated = true;
      }
    if (!rotated) break;
  }
}

// Deterministic orthonormal completion for zero singular directions:
// walk the standard basis and Gram-Schmidt against accepted columns.
inline void complete_column(Tensor<double>& u, std::size_t col,
                            std::size_t m) {
  // Among the standard basis vectors, the largest residual after
  // projecting out the accepted columns (ties -> lowest index). A second
  // projection pass keeps the result orthogonal to working precision.
  std::vector<double> best(m, 0.0);
  double best_norm = 0.0;
  std::size_t best_cand = m;
  for (std::size_t cand = 0; cand < m; ++cand) {
    std::vector<double> w(m, 0.0);
    w[cand] = 1.0;
    for (std::size_t c = 0; c < col; ++c) {
      double dot = 0;
      for (std::size_t i = 0; i < m; ++i) dot += u.at(i, c) * w[i];
      for (std::size_t i = 0; i < m; ++i) w[i] -= dot * u.at(i, c);
    }
    double nrm = 0;
    for (double x : w) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm > best_norm) {
      best_norm = nrm;
      best = std::move(w);
      best_cand = cand;
    }
  }
  if (best_cand == m || best_norm <= 1e-8)
    throw numeric_error("svd: orthonormal completion failed");
  for (std::size_t c = 0; c < col; ++c) {
    double dot = 0;
    for (std::size_t i = 0; i < m; ++i) dot += u.at(i, c) * best[i];
    for (std::size_t i = 0; i < m; ++i) best[i] -= dot * u.at(i, c);
  }
  double nrm = 0;
  for (double x : best) nrm += x * x;
  nrm = std::sqrt(nrm);
  if (nrm <= 1e-10) throw numeric_error("svd: orthonormal completion failed");
  for (std::size_t i = 0; i < m; ++i) u.at(i, col) = best[i] / nrm;
}

}  // namespace detail

/// SVD of a small (extents <= 1024) f64 matrix via cyclic one-sided
/// Jacobi. Returns the full decomposition with r = min(m, n) columns;
/// singular values are sorted descending with stable tie order.
inline SvdResult svd_small(const Tensor<double>& input) {
  if (input.rank() != 2) throw dimension_error("svd: rank-2 required");
  if (input.extent(0) > 1024 || input.extent(1) > 1024)
    throw dimension_error("svd: extents must be <= 1024");
  if (!input.all_finite()) throw numeric_error("svd: non-finite input");

  const bool wide = input.extent(0) < input.extent(1);
  Tensor<double> a = wide ? transposed(input) : input;
  const std::size_t m = a.extent(0), n = a.extent(1);

  Tensor<double> v = Tensor<double>::identity(n);
  detail::jacobi_columns(a, v);

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0;
    for (std::size_t i = 0; i < m; ++i) acc += a.at(i, j) * a.at(i, j);
    norms[j] = std::sqrt(acc);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return norms[x] > norms[y];
  });

  const double smax = norms.empty() ? 0.0 : norms[order[0]];
  const double rank_tol = smax * 1e-13;

  Tensor<double> u({m, n});
  Tensor<double> vs({n, n});
  std::vector<double> s(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    s[j] = norms[src];
    for (std::size_t i = 0; i < n; ++i) vs.at(i, j) = v.at(i, src);
    if (norms[src] > rank_tol && norms[src] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) u.at(i, j) = a.at(i, src) / norms[src];
    } else {
      s[j] = 0.0;
      detail::complete_column(u, j, m);
    }
  }

  if (wide) return SvdResult{std::move(vs), std::move(s), std::move(u)};
  return SvdResult{std::move(u), std::move(s), std::move(vs)};
}

}  // namespace detkit
