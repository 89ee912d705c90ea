#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "detkit/errors.hpp"

namespace detkit {

/// Per-class ROC AUC via the Mann-Whitney rank statistic with average
/// ranks for ties. Classes with no positives or no negatives in the
/// split are excluded from the macro mean (AUC is undefined there);
/// excluded classes report NaN in per_class.
struct AucResult {
  double macro = 0.0;
  std::vector<double> per_class;
  std::size_t evaluated_classes = 0;
};

inline double binary_auc(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int l : labels) pos += (l != 0);
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nan("");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (labels[idx[k]] != 0) rank_sum_pos += avg_rank;
    i = j;
  }
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q);
}

/// scores: n x K row-major; labels: n x K in {0,1}.
inline AucResult macro_auc(const std::vector<double>& scores,
                           const std::vector<int>& labels, std::size_t n,
                           std::size_t k) {
  if (scores.size() != n * k || labels.size() != n * k)
    throw dimension_error("macro_auc: shape mismatch");
  AucResult res;
  res.per_class.resize(k);
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = scores[i * k + c];
      if (!std::isfinite(s[i])) throw numeric_error("macro_auc: non-finite score");
      l[i] = labels[i * k + c];
    }
    res.per_class[c] = binary_auc(s, l);
    if (!std::isnan(res.per_class[c])) {
      sum += res.per_class[c];
      ++res.evaluated_classes;
    }
  }
  if (res.evaluated_classes == 0)
    throw degenerate_error("macro_auc: no class with both positives and negatives");
  res.macro = sum / static_cast<double>(res.evaluated_classes);
  return res;
}

/// w_k = sqrt(N / N_k). Classes with zero positives get weight 1 (and
/// the caller is expected to warn): the weighting target is undefined
/// for them.
inline std::vector<double> sqrt_class_weights(
    const std::vector<std::size_t>& pos_counts, std::size_t total) {
  if (total < 1) throw spec_error("class weights: N >= 1 required");
  std::vector<double> w(pos_counts.size(), 1.0);
  for (std::size_t k = 0; k < pos_counts.size(); ++k)
    if (pos_counts[k] > 0)
      w[k] = std::sqrt(static_cast<double>(total) /
                       static_cast<double>(pos_counts[k]));
  return w;
}

// ---------------------------------------------------------------------------
// Sample statistics and Welch's t-test.

inline double sample_mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// n-1 divisor.
inline double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) throw spec_error("sample std: n >= 2 required");
  const double m = sample_mean(v);
  double acc = 0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

namespace detail {

// Regularized incomplete beta via Lentz's continued fraction.
inline double betacf(double a, double b, double x) {
  const double eps = 3e-12, fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

inline double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;  // two-sided
};

inline WelchResult welch_t_test(const std::vector<double>& a,
                                const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw spec_error("welch: n >= 2 per group required");
  const double ma = sample_mean(a), mb = sample_mean(b);
  const double sa = sample_std(a), sb = sample_std(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = sa * sa / na, vb = sb * sb / nb;

  WelchResult r;
  if (va + vb == 0.0) {
    r.t = 0.0;
    r.dof = na + nb - 2.0;
    r.p = 1.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(va + vb);
  r.dof = (va + vb) * (va + vb) /
          (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  // Two-sided p from the t CDF: p = I_{nu/(nu+t^2)}(nu/2, 1/2).
  r.p = detail::ibeta(r.dof / 2.0, 0.5, r.dof / (r.dof + r.t * r.t));
  return r;
}

}  // namespace detkit
