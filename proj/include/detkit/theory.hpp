#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "detkit/bases.hpp"
#include "detkit/rng.hpp"
#include "detkit/tensor.hpp"

namespace detkit {

// ---------------------------------------------------------------------------
// Numerical checks for the orthogonal-basis claims: energy preservation,
// conditioning, band-limited capture, Toeplitz near-diagonalization, and
// Gaussian mutual information. Everything here runs in f64.

struct TheoryReport {
  std::string check_name;
  std::vector<double> computed;
  std::vector<double> predicted;
  double tolerance = 0.0;
  bool pass = false;

  void judge() {
    pass = computed.size() == predicted.size();
    for (std::size_t i = 0; pass && i < computed.size(); ++i)
      pass = std::isfinite(computed[i]) &&
             std::fabs(computed[i] - predicted[i]) <= tolerance;
  }
};

// ---------------------------------------------------------------------------
// Energy preservation.

/// ||W_K x||^2 / ||x||^2 with W_K the first K orthonormal DCT rows.
inline double energy_ratio_truncated(const Tensor<double>& x, std::size_t k) {
  const std::size_t n = x.numel();
  if (k < 1 || k > n) throw dimension_error("energy_ratio: 1 <= K <= N required");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += x[i] * x[i];
  if (total == 0.0) throw degenerate_error("energy_ratio: zero input vector");

  const BasisMatrix b = basis_matrix(BasisKind::dct2, k, n, true);
  double captured = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    double c = 0.0;
    for (std::size_t j = 0; j < n; ++j) c += b.rows.at(r, j) * x[j];
    captured += c * c;
  }
  return captured / total;
}

/// Monte-Carlo energy ratio for W with i.i.d. N(0, 2/N) entries and a
/// fixed unit input. Returns (mean, population variance) over trials.
inline std::pair<double, double> kaiming_energy_ratio_mc(std::size_t n,
                                                         std::size_t k,
                                                         std::size_t trials,
                                                         std::uint64_t seed) {
  if (trials < 1000) throw spec_error("kaiming mc: trials >= 1000 required");
  Xoshiro256StarStar rng(seed);
  const double scale = std::sqrt(2.0 / static_cast<double>(n));
  // With unit x, each row contributes (w . x)^2 where w . x ~ N(0, 2/N);
  // the input direction is irrelevant, so draw the K projections directly.
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    double r = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double g = scale * rng.gaussian();
      r += g * g;
    }
    sum += r;
    sum_sq += r * r;
  }
  const double mean = sum / static_cast<double>(trials);
  const double var = sum_sq / static_cast<double>(trials) - mean * mean;
  return {mean, var};
}

// ---------------------------------------------------------------------------
// Conditioning.

inline double condition_number(const Tensor<double>& m) {
  const SvdResult svd = svd_small(m);
  const double smax = svd.s.front();
  const double smin = svd.s.back();
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

// ---------------------------------------------------------------------------
// Band-limited capture: deterministic mixture of cosines with frequency
// content below B * Nyquist, measured against K = ceil(B*N) DCT rows.

inline double bandlimited_capture(double band, std::size_t n) {
  if (!(band > 0.0) || band > 1.0)
    throw spec_error("bandlimited_capture: 0 < B <= 1 required");
  const std::size_t k = static_cast<std::size_t>(
      std::ceil(band * static_cast<double>(n)));
  const std::size_t band_top =
      std::max<std::size_t>(1, static_cast<std::size_t>(
                                   band * static_cast<double>(n - 1)));
  const double pi = 3.14159265358979323846;
  Tensor<double> x({n});
  for (std::size_t f = 0; f < band_top; ++f) {
    const double amp = 1.0 / (1.0 + static_cast<double>(f));
    for (std::size_t t = 0; t < n; ++t)
      x[t] += amp * std::cos(pi * static_cast<double>(f) *
                             (2.0 * static_cast<double>(t) + 1.0) /
                             (2.0 * static_cast<double>(n)));
  }
  return energy_ratio_truncated(x, std::min(k, n));
}

// ---------------------------------------------------------------------------
// Toeplitz near-diagonalization: off-diagonal Frobenius energy fraction
// of C Sigma C^T for Sigma_ij = rho^|i-j| and C the orthonormal DCT.

inline double toeplitz_diag_energy(std::size_t n, double rho) {
  if (!(std::fabs(rho) < 1.0))
    throw spec_error("toeplitz_diag_energy: |rho| < 1 required");
  const BasisMatrix c = basis_matrix(BasisKind::dct2, n, n, true);
  Tensor<double> sigma({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      sigma.at(i, j) = std::pow(rho, std::fabs(static_cast<double>(i) -
                                               static_cast<double>(j)));
  const Tensor<double> t = matmul(matmul(c.rows, sigma), transposed(c.rows));
  double total = 0.0, diag = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double v = t.at(i, j);
      total += v * v;
      if (i == j) diag += v * v;
    }
  if (total == 0.0) return 0.0;
  return (total - diag) / total;
}

// ---------------------------------------------------------------------------
// Gaussian mutual information I(x; Wx + noise) with white output noise:
// I = 1/2 log2 det(I_M + snr * (W Sigma_x W^T) (W W^T)^{-1}), snr linear
// from dB. Scale-invariant in W, which puts unit-norm DCT rows and
// natural-scale Kaiming rows on equal footing.

namespace detail {

struct LuFactors {
  Tensor<double> lu;
  std::vector<std::size_t> perm;
  double sign = 1.0;
};

inline LuFactors lu_decompose(Tensor<double> a) {
  const std::size_t n = a.extent(0);
  if (a.extent(1) != n) throw dimension_error("lu: square matrix required");
  LuFactors f;
  f.perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    double best = std::fabs(a.at(col, col));
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a.at(r, col)) > best) {
        best = std::fabs(a.at(r, col));
        pivot = r;
      }
    if (best == 0.0)
      throw degenerate_error("lu: singular matrix");
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j)
        std::swap(a.at(col, j), a.at(pivot, j));
      std::swap(f.perm[col], f.perm[pivot]);
      f.sign = -f.sign;
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double m = a.at(r, col) / a.at(col, col);
      a.at(r, col) = m;
      for (std::size_t j = col + 1; j < n; ++j)
        a.at(r, j) -= m * a.at(col, j);
    }
  }
  f.lu = std::move(a);
  return f;
}

inline std::vector<double> lu_solve(const LuFactors& f,
                                    const std::vector<double>& b) {
  const std::size_t n = f.perm.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = b[f.perm[i]];
    for (std::size_t j = 0; j < i; ++j) v -= f.lu.at(i, j) * y[j];
    y[i] = v;
  }
  for (std::size_t i = n; i-- > 0;) {
    double v = y[i];
    for (std::size_t j = i + 1; j < n; ++j) v -= f.lu.at(i, j) * y[j];
    y[i] = v / f.lu.at(i, i);
  }
  return y;
}

inline double lu_log2_det(const LuFactors& f) {
  double sign = f.sign, acc = 0.0;
  const std::size_t n = f.perm.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = f.lu.at(i, i);
    if (d < 0.0) sign = -sign;
    acc += std::log2(std::fabs(d));
  }
  if (sign <= 0.0) throw numeric_error("log-det: non-positive determinant");
  return acc;
}

}  // namespace detail

inline double gaussian_mutual_information(const Tensor<double>& w,
                                          const Tensor<double>& sigma_x,
                                          double snr_db) {
  const std::size_t m = w.extent(0), n = w.extent(1);
  if (sigma_x.extent(0) != n || sigma_x.extent(1) != n)
    throw dimension_error("mutual information: Sigma_x must be N x N");
  const double snr = std::pow(10.0, snr_db / 10.0);

  const Tensor<double> wt = transposed(w);
  const Tensor<double> gram = matmul(w, wt);            // W W^T
  const Tensor<double> signal = matmul(matmul(w, sigma_x), wt);

  detail::LuFactors gram_lu;
  try {
    gram_lu = detail::lu_decompose(gram);
  } catch (const degenerate_error&) {
    throw degenerate_error("mutual information: W W^T is singular");
  }

  // M = I + snr * signal * gram^{-1}, built column by column.
  Tensor<double> mat({m, m});
  std::vector<double> col(m), sol(m);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) col[i] = (i == j) ? 1.0 : 0.0;
    sol = detail::lu_solve(gram_lu, col);               // gram^{-1} e_j
    for (std::size_t i = 0; i < m; ++i) {
      double acc = (i == j) ? 1.0 : 0.0;
      for (std::size_t t = 0; t < m; ++t) acc += snr * signal.at(i, t) * sol[t];
      mat.at(i, j) = acc;
    }
  }
  return 0.5 * detail::lu_log2_det(detail::lu_decompose(std::move(mat)));
}

// ---------------------------------------------------------------------------
// The bundled suite.

namespace detail {

inline Tensor<double> toeplitz_sigma(std::size_t n, double rho) {
  Tensor<double> s({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      s.at(i, j) = std::pow(rho, std::fabs(static_cast<double>(i) -
                                           static_cast<double>(j)));
  return s;
}

inline Tensor<double> gaussian_matrix(std::size_t rows, std::size_t cols,
                                      Xoshiro256StarStar& rng, double stddev) {
  Tensor<double> m({rows, cols});
  for (std::size_t i = 0; i < m.numel(); ++i) m[i] = stddev * rng.gaussian();
  return m;
}

}  // namespace detail

inline std::vector<TheoryReport> theory_suite(std::uint64_t seed = 2026) {
  std::vector<TheoryReport> out;
  Xoshiro256StarStar rng(seed);

  {
    TheoryReport r;
    r.check_name = "parseval_full_rank";
    // worst |ratio - 1| over random vectors at three sizes
    double worst = 0.0;
    for (std::size_t n : {std::size_t{16}, std::size_t{64}, std::size_t{256}})
      for (int rep = 0; rep < 20; ++rep) {
        Tensor<double> x({n});
        for (std::size_t i = 0; i < n; ++i) x[i] = rng.gaussian();
        worst = std::max(worst, std::fabs(energy_ratio_truncated(x, n) - 1.0));
      }
    r.computed = {worst};
    r.predicted = {0.0};
    r.tolerance = 1e-12;
    r.judge();
    out.push_back(r);
  }

  {
    const std::size_t n = 64, k = 16, trials = 100000;
    const auto [mean, var] = kaiming_energy_ratio_mc(n, k, trials, seed);
    const double pred_mean = 2.0 * static_cast<double>(k) / n;
    const double pred_var =
        8.0 * static_cast<double>(k) / (static_cast<double>(n) * n);
    TheoryReport rm;
    rm.check_name = "kaiming_mc_mean";
    rm.computed = {mean};
    rm.predicted = {pred_mean};
    rm.tolerance = 3.0 * std::sqrt(var / static_cast<double>(trials));
    rm.judge();
    out.push_back(rm);
    TheoryReport rv;
    rv.check_name = "kaiming_mc_var";
    rv.computed = {var};
    rv.predicted = {pred_var};
    rv.tolerance = 0.2 * pred_var;
    rv.judge();
    out.push_back(rv);
  }

  {
    TheoryReport r;
    r.check_name = "orthonormal_condition";
    for (BasisKind kind : {BasisKind::dct2, BasisKind::dst2, BasisKind::hartley,
                           BasisKind::hadamard}) {
      const BasisMatrix b = basis_matrix(kind, 64, 64, true);
      r.computed.push_back(condition_number(b.rows));
      r.predicted.push_back(1.0);
    }
    r.tolerance = 1e-8;
    r.judge();
    out.push_back(r);
  }

  {
    TheoryReport r;
    r.check_name = "marchenko_pastur_condition";
    const std::size_t rows = 512, cols = 128, draws = 20;
    double acc = 0.0;
    for (std::size_t d = 0; d < draws; ++d)
      acc += condition_number(detail::gaussian_matrix(rows, cols, rng, 1.0));
    const double gamma = static_cast<double>(cols) / rows;
    const double limit = (1.0 + std::sqrt(gamma)) / (1.0 - std::sqrt(gamma));
    r.computed = {acc / draws};
    r.predicted = {limit};
    r.tolerance = 0.25 * limit;
    r.judge();
    out.push_back(r);
  }

  {
    TheoryReport r;
    r.check_name = "bandlimited_capture";
    r.computed = {bandlimited_capture(0.8, 100)};
    r.predicted = {1.0};
    r.tolerance = 0.01;
    r.judge();
    out.push_back(r);
  }

  {
    TheoryReport r;
    r.check_name = "toeplitz_offdiag_fraction";
    r.computed = {toeplitz_diag_energy(64, 0.0), toeplitz_diag_energy(64, 0.9)};
    r.predicted = {0.0, 0.0};
    r.tolerance = 0.05;
    r.judge();
    out.push_back(r);
  }

  {
    TheoryReport r;
    r.check_name = "mi_isotropic_closed_form";
    const std::size_t m = 16, n = 64;
    const BasisMatrix w = basis_matrix(BasisKind::dct2, m, n, true);
    const double snr_db = 10.0;
    const double snr = std::pow(10.0, snr_db / 10.0);
    r.computed = {
        gaussian_mutual_information(w.rows, Tensor<double>::identity(n), snr_db)};
    r.predicted = {0.5 * static_cast<double>(m) * std::log2(1.0 + snr)};
    r.tolerance = 1e-9;
    r.judge();
    out.push_back(r);
  }

  {
    TheoryReport r;
    r.check_name = "mi_correlated_ordering";
    const std::size_t m = 16, n = 64, draws = 20;
    const Tensor<double> sigma = detail::toeplitz_sigma(n, 0.9);
    const BasisMatrix w = basis_matrix(BasisKind::dct2, m, n, true);
    const double mi_dct = gaussian_mutual_information(w.rows, sigma, 10.0);
    const double stddev = std::sqrt(2.0 / static_cast<double>(n));
    double acc = 0.0;
    for (std::size_t d = 0; d < draws; ++d)
      acc += gaussian_mutual_information(
          detail::gaussian_matrix(m, n, rng, stddev), sigma, 10.0);
    const double mi_kaiming = acc / draws;
    // violation amount: positive iff the random rows beat the DCT rows
    r.computed = {std::max(0.0, mi_kaiming - mi_dct)};
    r.predicted = {0.0};
    r.tolerance = 0.0;
    r.judge();
    out.push_back(r);
  }

  return out;
}

inline std::string theory_csv(const std::vector<TheoryReport>& reports) {
  std::ostringstream os;
  os << "check,index,computed,predicted,tolerance,pass\n";
  os.precision(17);
  for (const auto& r : reports)
    for (std::size_t i = 0; i < r.computed.size(); ++i)
      os << r.check_name << ',' << i << ',' << r.computed[i] << ','
         << r.predicted[i] << ',' << r.tolerance << ','
         << (r.pass ? "1" : "0") << '\n';
  return os.str();
}

inline std::string theory_text(const std::vector<TheoryReport>& reports) {
  std::ostringstream os;
  os.precision(10);
  for (const auto& r : reports) {
    os << (r.pass ? "[ok]   " : "[FAIL] ") << r.check_name << ": computed";
    for (double v : r.computed) os << ' ' << v;
    os << " vs predicted";
    for (double v : r.predicted) os << ' ' << v;
    os << " (tol " << r.tolerance << ")\n";
  }
  return os.str();
}

}  // namespace detkit
