#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "detkit/errors.hpp"
#include "detkit/hash.hpp"
#include "detkit/rng.hpp"

namespace detkit {

/// Golden ratio conjugate (sqrt(5)-1)/2.
constexpr double kGoldenPhi = 0.6180339887498948482;

enum class OrderingStrategy { golden, seeded, sobol, class_guaranteed, content_hash };

inline const char* ordering_name(OrderingStrategy s) {
  switch (s) {
    case OrderingStrategy::golden: return "golden";
    case OrderingStrategy::seeded: return "seeded";
    case OrderingStrategy::sobol: return "sobol";
    case OrderingStrategy::class_guaranteed: return "class_guaranteed";
    case OrderingStrategy::content_hash: return "content_hash";
  }
  return "?";
}

/// Per-sample keys for data-dependent orderings. L1 norms are f32,
/// accumulated in index order (collisions happen at float32 precision,
/// which is exactly what the diagnostics measure).
struct SampleKeyTable {
  std::vector<float> l1_norms;
  std::optional<std::vector<std::vector<std::size_t>>> labels;  // class-index sets

  std::size_t n() const { return l1_norms.size(); }
};

struct PermutationSchedule {
  OrderingStrategy strategy;
  std::size_t epoch = 0;
  std::vector<std::size_t> perm;
};

namespace detail {

inline double fract(double x) { return x - std::floor(x); }

/// Stable ascending argsort of keys; ties keep index order.
inline std::vector<std::size_t> argsort_stable(const std::vector<double>& keys) {
  std::vector<std::size_t> idx(keys.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  return idx;
}

inline std::vector<double> golden_keys(const SampleKeyTable& table,
                                       std::size_t epoch) {
  std::vector<double> keys(table.n());
  const double shift = fract(static_cast<double>(epoch) * kGoldenPhi);
  for (std::size_t i = 0; i < table.n(); ++i) {
    const float norm = table.l1_norms[i];
    if (!std::isfinite(norm))
      throw numeric_error("golden ordering: non-finite L1 norm");
    const double hash = fract(static_cast<double>(norm) * kGoldenPhi);
    keys[i] = fract(hash + shift);
  }
  return keys;
}

/// Base-2 van der Corput radical inverse.
inline double van_der_corput2(std::uint64_t i) {
  double v = 0.0, base = 0.5;
  while (i) {
    if (i & 1) v += base;
    base *= 0.5;
    i >>= 1;
  }
  return v;
}

}  // namespace detail

/// key[i] = fract(fract(l1[i] * phi) + epoch * phi); no seed anywhere.
/// Equal-norm samples form collision groups with fixed index order.
inline PermutationSchedule golden_permutation(const SampleKeyTable& table,
                                              std::size_t epoch) {
  if (table.n() < 1) throw spec_error("golden ordering: empty table");
  return {OrderingStrategy::golden, epoch,
          detail::argsort_stable(detail::golden_keys(table, epoch))};
}

/// Fisher-Yates over 0..n-1 driven by xoshiro256** seeded from
/// splitmix64(seed ^ epoch * 0x9E3779B97F4A7C15).
inline PermutationSchedule seeded_permutation(std::size_t n, std::uint64_t seed,
                                              std::size_t epoch) {
  if (n < 1) throw spec_error("seeded ordering: n >= 1 required");
  Xoshiro256StarStar rng(seed ^ (static_cast<std::uint64_t>(epoch) *
                                 0x9E3779B97F4A7C15ULL));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n - 1; i >= 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next() % (i + 1));
    std::swap(perm[i], perm[j]);
  }
  return {OrderingStrategy::seeded, epoch, std::move(perm)};
}

/// Index i keyed by fract(vdc2(i) + epoch * phi); seed-free.
inline PermutationSchedule sobol_permutation(std::size_t n, std::size_t epoch) {
  if (n < 1) throw spec_error("sobol ordering: n >= 1 required");
  std::vector<double> keys(n);
  const double shift = detail::fract(static_cast<double>(epoch) * kGoldenPhi);
  for (std::size_t i = 0; i < n; ++i)
    keys[i] = detail::fract(detail::van_der_corput2(i) + shift);
  return {OrderingStrategy::sobol, epoch, detail::argsort_stable(keys)};
}

/// key[i] = fract(sha256(sample)[:8] / 2^64 + epoch * phi); seed-free.
inline PermutationSchedule content_hash_permutation(
    const std::vector<std::string>& raw_samples, std::size_t epoch) {
  if (raw_samples.empty()) throw spec_error("content ordering: empty input");
  std::vector<double> keys(raw_samples.size());
  const double shift = detail::fract(static_cast<double>(epoch) * kGoldenPhi);
  for (std::size_t i = 0; i < raw_samples.size(); ++i) {
    const double h =
        static_cast<double>(sha256_prefix_u64(raw_samples[i])) * 0x1.0p-64;
    keys[i] = detail::fract(h + shift);
  }
  return {OrderingStrategy::content_hash, epoch, detail::argsort_stable(keys)};
}

/// Batches that draw min_per_class samples from every non-exhausted
/// class first (round-robin, ascending class index), then fill from the
/// global golden order. Every sample appears exactly once per epoch.
inline std::vector<std::vector<std::size_t>> class_guaranteed_batches(
    const SampleKeyTable& table, std::size_t batch_size,
    std::size_t min_per_class, std::size_t epoch = 0) {
  if (!table.labels) throw spec_error("class-guaranteed ordering: labels required");
  if (batch_size < 1) throw spec_error("class-guaranteed: batch_size >= 1");
  const std::size_t n = table.n();

  const std::vector<double> keys = detail::golden_keys(table, epoch);
  const std::vector<std::size_t> global = detail::argsort_stable(keys);

  std::size_t num_classes = 0;
  for (const auto& ls : *table.labels)
    for (std::size_t c : ls) num_classes = std::max(num_classes, c + 1);

  std::vector<std::vector<std::size_t>> queues(num_classes);
  for (std::size_t pos = 0; pos < n; ++pos)
    for (std::size_t c : (*table.labels)[global[pos]])
      queues[c].push_back(global[pos]);

  std::vector<std::size_t> qp(num_classes, 0);
  std::vector<char> used(n, 0);
  std::size_t gp = 0, emitted = 0;

  auto pop_class = [&](std::size_t c) -> std::optional<std::size_t> {
    while (qp[c] < queues[c].size() && used[queues[c][qp[c]]]) ++qp[c];
    if (qp[c] >= queues[c].size()) return std::nullopt;
    return queues[c][qp[c]++];
  };

  std::vector<std::vector<std::size_t>> batches;
  while (emitted < n) {
    std::vector<std::size_t> batch;
    for (std::size_t round = 0; round < min_per_class && batch.size() < batch_size;
         ++round)
      for (std::size_t c = 0; c < num_classes && batch.size() < batch_size; ++c)
        if (auto s = pop_class(c)) {
          batch.push_back(*s);
          used[*s] = 1;
          ++emitted;
        }
    while (batch.size() < batch_size && emitted < n) {
      while (gp < n && used[global[gp]]) ++gp;
      if (gp >= n) break;
      batch.push_back(global[gp]);
      used[global[gp]] = 1;
      ++emitted;
    }
    if (!batch.empty()) batches.push_back(std::move(batch));
  }
  return batches;
}

// ---------------------------------------------------------------------------
// Diagnostics

struct DiagnosticsReport {
  std::vector<std::size_t> collision_group_sizes;  // groups with >= 2 members
  double entropy_loss = 0.0;       // sum log(g!) / log(n!)
  double star_discrepancy = 0.0;   // of the epoch-0 key sequence
  std::vector<double> epoch_distance;  // normalized Kendall tau, consecutive epochs
};

namespace detail {

// Inversion count via merge sort; O(n log n).
inline std::uint64_t count_inversions(std::vector<std::size_t>& v) {
  const std::size_t n = v.size();
  if (n < 2) return 0;
  std::vector<std::size_t> tmp(n);
  std::uint64_t inv = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo + width < n; lo += 2 * width) {
      const std::size_t mid = lo + width, hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[i] <= v[j]) tmp[k++] = v[i++];
        else {
          inv += mid - i;
          tmp[k++] = v[j++];
        }
      }
      while (i < mid) tmp[k++] = v[i++];
      while (j < hi) tmp[k++] = v[j++];
      std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo),
                tmp.begin() + static_cast<std::ptrdiff_t>(hi),
                v.begin() + static_cast<std::ptrdiff_t>(lo));
    }
  }
  return inv;
}

}  // namespace detail

/// Collision entropy loss, star discrepancy of the key sequence, and the
/// normalized Kendall-tau distance between consecutive epochs.
/// Entropy loss is our construction: with collision groups of sizes g the
/// achievable orderings shrink from n! to n!/prod(g!), so the lost
/// fraction of log-orderings is sum log(g!) / log(n!).
inline DiagnosticsReport permutation_diagnostics(
    const std::vector<PermutationSchedule>& sched_per_epoch,
    const SampleKeyTable& table) {
  if (sched_per_epoch.empty())
    throw spec_error("diagnostics: at least one epoch required");
  DiagnosticsReport rep;
  const std::size_t n = table.n();

  // Collision groups over exact f32 bit patterns.
  std::vector<float> sorted = table.l1_norms;
  std::sort(sorted.begin(), sorted.end());
  double log_lost = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const std::size_t g = j - i;
    if (g >= 2) {
      rep.collision_group_sizes.push_back(g);
      log_lost += std::lgamma(static_cast<double>(g) + 1.0);
    }
    i = j;
  }
  const double log_total = std::lgamma(static_cast<double>(n) + 1.0);
  rep.entropy_loss = (log_total > 0.0) ? log_lost / log_total : 0.0;

  // Star discrepancy of the epoch-0 golden keys.
  std::vector<double> keys =
      detail::golden_keys(table, sched_per_epoch.front().epoch);
  std::sort(keys.begin(), keys.end());
  double dstar = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = static_cast<double>(i) / static_cast<double>(n);
    const double hi = static_cast<double>(i + 1) / static_cast<double>(n);
    dstar = std::max(dstar, std::max(keys[i] - lo, hi - keys[i]));
  }
  rep.star_discrepancy = dstar;

  // Kendall tau between consecutive epochs, normalized by n(n-1)/2.
  for (std::size_t e = 1; e < sched_per_epoch.size(); ++e) {
    const auto& prev = sched_per_epoch[e - 1].perm;
    const auto& cur = sched_per_epoch[e].perm;
    std::vector<std::size_t> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[prev[i]] = i;
    std::vector<std::size_t> mapped(n);
    for (std::size_t i = 0; i < n; ++i) mapped[i] = pos[cur[i]];
    const double pairs = static_cast<double>(n) * (static_cast<double>(n) - 1.0) / 2.0;
    rep.epoch_distance.push_back(
        pairs > 0 ? static_cast<double>(detail::count_inversions(mapped)) / pairs
                  : 0.0);
  }
  return rep;
}

}  // namespace detkit
