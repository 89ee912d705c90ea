#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <string>
#include <tuple>

#include "detkit/errors.hpp"
#include "detkit/tensor.hpp"

namespace detkit {

enum class BasisKind { dct2, hadamard, hartley, dst2 };

inline const char* basis_name(BasisKind k) {
  switch (k) {
    case BasisKind::dct2: return "dct2";
    case BasisKind::hadamard: return "hadamard";
    case BasisKind::hartley: return "hartley";
    case BasisKind::dst2: return "dst2";
  }
  return "?";
}

inline BasisKind basis_from_name(const std::string& s) {
  if (s == "dct2" || s == "dct") return BasisKind::dct2;
  if (s == "hadamard") return BasisKind::hadamard;
  if (s == "hartley") return BasisKind::hartley;
  if (s == "dst2" || s == "dst" || s == "sinusoidal") return BasisKind::dst2;
  throw spec_error("unknown basis kind: " + s);
}

struct BasisMatrix {
  BasisKind kind;
  bool normalized;
  Tensor<double> rows;  // n_rows x n_cols, f64
};

namespace detail {

constexpr double kPi = 3.14159265358979323846;

inline std::size_t hadamard_order(std::size_t n) {
  std::size_t order = 1;
  while (order < n) order *= 2;
  return order;
}

// Sylvester entry without materializing the full matrix: sign is
// (-1)^{popcount(i & j)}.
inline double hadamard_entry(std::size_t i, std::size_t j) {
  return (__builtin_popcountll(i & j) & 1) ? -1.0 : 1.0;
}

inline Tensor<double> generate_basis(BasisKind kind, std::size_t n_rows,
                                     std::size_t n_cols, bool normalized) {
  Tensor<double> b({n_rows, n_cols});
  const double n = static_cast<double>(n_cols);

  // Number of distinct basis vectors available in n_cols dimensions;
  // rows beyond it repeat modulo that count. Sylvester matrices are
  // built large enough to cover every requested row directly.
  const std::size_t unique =
      (kind == BasisKind::hadamard)
          ? hadamard_order(std::max(n_rows, n_cols))
          : n_cols;

  for (std::size_t i = 0; i < n_rows; ++i) {
    const std::size_t k = i % unique;
    for (std::size_t j = 0; j < n_cols; ++j) {
      double v = 0.0;
      switch (kind) {
        case BasisKind::dct2:
          v = std::cos(kPi * static_cast<double>(k) *
                       (2.0 * static_cast<double>(j) + 1.0) / (2.0 * n));
          if (normalized) v *= (k == 0) ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
          break;
        case BasisKind::dst2:
          v = std::sin(kPi * (static_cast<double>(k) + 1.0) *
                       (2.0 * static_cast<double>(j) + 1.0) / (2.0 * n));
          break;
        case BasisKind::hartley: {
          const double theta =
              2.0 * kPi * static_cast<double>(k) * static_cast<double>(j) / n;
          v = std::cos(theta) + std::sin(theta);
          if (normalized) v /= std::sqrt(n);
          break;
        }
        case BasisKind::hadamard:
          v = hadamard_entry(k, j);
          if (normalized) v /= std::sqrt(n);
          break;
      }
      b.at(i, j) = v;
    }
  }

  // DST-II carries no standard alpha_k in this form; normalization
  // rescales each row to unit norm, which restores exact orthonormality
  // at square sizes (the rows are mutually orthogonal by construction).
  if (normalized && kind == BasisKind::dst2) {
    for (std::size_t i = 0; i < n_rows; ++i) {
      double nrm = 0;
      for (std::size_t j = 0; j < n_cols; ++j) nrm += b.at(i, j) * b.at(i, j);
      nrm = std::sqrt(nrm);
      if (nrm == 0.0) throw degenerate_error("dst2: zero row");
      for (std::size_t j = 0; j < n_cols; ++j) b.at(i, j) /= nrm;
    }
  }
  return b;
}

}  // namespace detail

/// Analytic basis generation, f64 throughout, cached by
/// (kind, n_rows, n_cols, normalized). Cache hits return the same bytes
/// as a fresh computation.
inline BasisMatrix basis_matrix(BasisKind kind, std::size_t n_rows,
                                std::size_t n_cols, bool normalized) {
  if (n_rows == 0 || n_cols == 0)
    throw dimension_error("basis_matrix: zero dimension");

  using Key = std::tuple<int, std::size_t, std::size_t, bool>;
  static std::map<Key, Tensor<double>> cache;
  static std::mutex mu;

  const Key key{static_cast<int>(kind), n_rows, n_cols, normalized};
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return BasisMatrix{kind, normalized, it->second};
  }
  Tensor<double> rows = detail::generate_basis(kind, n_rows, n_cols, normalized);
  std::lock_guard<std::mutex> lock(mu);
  auto [it, inserted] = cache.emplace(key, std::move(rows));
  (void)inserted;
  return BasisMatrix{kind, normalized, it->second};
}

/// Max over distinct row pairs of |cos(r_i, r_j)|. With
/// global_mean_subtract the single scalar mean of all entries is removed
/// first (the raw DCT row 0 is all-ones; subtracting the global mean is
/// what makes the remaining rows comparable).
inline double max_pairwise_cosine(const BasisMatrix& b,
                                  bool global_mean_subtract) {
  const Tensor<double>& m = b.rows;
  const std::size_t r = m.extent(0), c = m.extent(1);
  if (r < 2) throw dimension_error("max_pairwise_cosine: need >= 2 rows");

  Tensor<double> w = m;
  if (global_mean_subtract) {
    double mean = 0;
    for (std::size_t i = 0; i < w.numel(); ++i) mean += w[i];
    mean /= static_cast<double>(w.numel());
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] -= mean;
  }

  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0;
    for (std::size_t j = 0; j < c; ++j) acc += w.at(i, j) * w.at(i, j);
    norms[i] = std::sqrt(acc);
    if (norms[i] == 0.0)
      throw degenerate_error("max_pairwise_cosine: zero-norm row");
  }

  double best = 0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i + 1; j < r; ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < c; ++k) dot += w.at(i, k) * w.at(j, k);
      best = std::max(best, std::abs(dot) / (norms[i] * norms[j]));
    }
  return best;
}

}  // namespace detkit
