#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "detkit/ordering.hpp"
#include "reference_hashes.hpp"

using detkit::OrderingStrategy;
using detkit::PermutationSchedule;
using detkit::SampleKeyTable;

namespace {

bool is_permutation_of_n(const std::vector<std::size_t>& perm, std::size_t n) {
  if (perm.size() != n) return false;
  std::vector<char> seen(n, 0);
  for (std::size_t i : perm) {
    if (i >= n || seen[i]) return false;
    seen[i] = 1;
  }
  return true;
}

SampleKeyTable table_with_norms(std::vector<float> norms) {
  SampleKeyTable t;
  t.l1_norms = std::move(norms);
  return t;
}

// independent reimplementation of the documented PRNG for the seeded
// shuffle oracle
struct RefSplitMix {
  std::uint64_t state;
  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

struct RefXoshiro {
  std::uint64_t s[4];
  explicit RefXoshiro(std::uint64_t seed) {
    RefSplitMix mix{seed};
    for (auto& w : s) w = mix.next();
  }
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t next() {
    const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }
};

}  // namespace

TEST_CASE("golden ordering: singleton is fixed at every epoch") {
  const SampleKeyTable t = table_with_norms({3.25f});
  for (std::size_t e : {0u, 1u, 17u})
    REQUIRE(detkit::golden_permutation(t, e).perm ==
            std::vector<std::size_t>{0});
}

TEST_CASE("golden ordering: equal norms keep index order at every epoch") {
  const SampleKeyTable t = table_with_norms({2.0f, 1.0f, 2.0f, 2.0f, 0.5f});
  for (std::size_t e = 0; e < 20; ++e) {
    const auto perm = detkit::golden_permutation(t, e).perm;
    std::vector<std::size_t> dup_positions;
    for (std::size_t i : perm)
      if (t.l1_norms[i] == 2.0f) dup_positions.push_back(i);
    REQUIRE(dup_positions == std::vector<std::size_t>{0, 2, 3});
  }
}

TEST_CASE("golden ordering matches a brute-force key oracle") {
  SampleKeyTable t;
  for (int i = 0; i < 8; ++i) t.l1_norms.push_back(static_cast<float>(i));
  for (std::size_t epoch : {0u, 3u}) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    std::vector<double> keys(8);
    for (std::size_t i = 0; i < 8; ++i) {
      const double shift_raw = static_cast<double>(epoch) * phi;
      const double shift = shift_raw - std::floor(shift_raw);
      const double h = static_cast<double>(t.l1_norms[i]) * phi;
      const double hash = h - std::floor(h);
      keys[i] = (hash + shift) - std::floor(hash + shift);
    }
    std::vector<std::size_t> expect(8);
    std::iota(expect.begin(), expect.end(), 0);
    std::stable_sort(expect.begin(), expect.end(),
                     [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    REQUIRE(detkit::golden_permutation(t, epoch).perm == expect);
  }
}

TEST_CASE("golden ordering rejects non-finite norms") {
  const SampleKeyTable t =
      table_with_norms({1.0f, std::numeric_limits<float>::infinity()});
  REQUIRE_THROWS_AS(detkit::golden_permutation(t, 0), detkit::numeric_error);
}

TEST_CASE("seeded shuffle is reproducible and matches a reference trace") {
  REQUIRE(detkit::seeded_permutation(1, 9, 4).perm ==
          std::vector<std::size_t>{0});
  REQUIRE(detkit::seeded_permutation(5, 42, 0).perm ==
          detkit::seeded_permutation(5, 42, 0).perm);

  // reference: splitmix64(seed ^ epoch*0x9E3779B97F4A7C15) seeds
  // xoshiro256**, then Fisher-Yates with j = next() % (i+1), i descending
  for (std::uint64_t seed : {42ull, 7ull}) {
    for (std::size_t epoch : {0u, 2u}) {
      const std::size_t n = 5;
      RefXoshiro rng(seed ^ (static_cast<std::uint64_t>(epoch) *
                             0x9E3779B97F4A7C15ULL));
      std::vector<std::size_t> expect(n);
      std::iota(expect.begin(), expect.end(), 0);
      for (std::size_t i = n - 1; i > 0; --i)
        std::swap(expect[i], expect[rng.next() % (i + 1)]);
      REQUIRE(detkit::seeded_permutation(n, seed, epoch).perm == expect);
    }
  }
}

TEST_CASE("van der Corput radical inverse base 2") {
  REQUIRE(detkit::detail::van_der_corput2(0) == 0.0);
  REQUIRE(detkit::detail::van_der_corput2(1) == 0.5);
  REQUIRE(detkit::detail::van_der_corput2(2) == 0.25);
  REQUIRE(detkit::detail::van_der_corput2(3) == 0.75);
}

TEST_CASE("sobol ordering sorts radical-inverse keys") {
  REQUIRE(detkit::sobol_permutation(4, 0).perm ==
          std::vector<std::size_t>{0, 2, 1, 3});
  REQUIRE(is_permutation_of_n(detkit::sobol_permutation(1000, 5).perm, 1000));
}

TEST_CASE("class-guaranteed batches cover every class while available") {
  SampleKeyTable t;
  std::vector<std::vector<std::size_t>> labels;
  for (int i = 0; i < 8; ++i) {
    t.l1_norms.push_back(static_cast<float>(i) * 1.7f);
    labels.push_back({static_cast<std::size_t>(i % 2)});
  }
  t.labels = labels;
  const auto batches = detkit::class_guaranteed_batches(t, 4, 1);
  REQUIRE(batches.size() == 2);
  for (const auto& b : batches) {
    std::set<std::size_t> classes;
    for (std::size_t i : b) classes.insert(labels[i][0]);
    REQUIRE(classes == std::set<std::size_t>{0, 1});
  }
}

TEST_CASE("class-guaranteed with min_per_class 0 equals golden batching") {
  SampleKeyTable t;
  std::vector<std::vector<std::size_t>> labels;
  for (int i = 0; i < 10; ++i) {
    t.l1_norms.push_back(static_cast<float>(i) * 0.9f + 0.1f);
    labels.push_back({static_cast<std::size_t>(i % 3)});
  }
  t.labels = labels;
  const auto batches = detkit::class_guaranteed_batches(t, 4, 0);
  const auto golden = detkit::golden_permutation(t, 0).perm;
  std::vector<std::size_t> flat;
  for (const auto& b : batches) flat.insert(flat.end(), b.begin(), b.end());
  REQUIRE(flat == golden);
}

TEST_CASE("class-guaranteed puts the rare class everywhere until exhausted") {
  SampleKeyTable t;
  std::vector<std::vector<std::size_t>> labels;
  for (int i = 0; i < 100; ++i) {
    t.l1_norms.push_back(static_cast<float>(i) * 0.31f);
    labels.push_back({i < 90 ? std::size_t{0} : std::size_t{1}});
  }
  t.labels = labels;
  const auto batches = detkit::class_guaranteed_batches(t, 10, 1);

  std::size_t rare_remaining = 10, covered = 0;
  std::vector<char> seen(100, 0);
  for (const auto& b : batches) {
    std::size_t rare_here = 0;
    for (std::size_t i : b) {
      REQUIRE_FALSE(seen[i]);
      seen[i] = 1;
      rare_here += labels[i][0] == 1;
    }
    if (rare_remaining > 0) {
      REQUIRE(rare_here >= 1);
      ++covered;
    }
    rare_remaining -= std::min(rare_remaining, rare_here);
  }
  REQUIRE(std::count(seen.begin(), seen.end(), 1) == 100);
  REQUIRE(covered >= 10);  // one rare sample per batch sustains 10 batches
}

TEST_CASE("class-guaranteed requires labels") {
  const SampleKeyTable t = table_with_norms({1.0f, 2.0f});
  REQUIRE_THROWS_AS(detkit::class_guaranteed_batches(t, 2, 1),
                    detkit::spec_error);
}

TEST_CASE("content-hash ordering ties break by index and match a second hasher") {
  const std::vector<std::string> same{"abc", "abc", "abc"};
  REQUIRE(detkit::content_hash_permutation(same, 0).perm ==
          std::vector<std::size_t>{0, 1, 2});
  REQUIRE(detkit::content_hash_permutation({"only"}, 7).perm ==
          std::vector<std::size_t>{0});

  const std::vector<std::string> samples{"alpha", "beta", "gamma"};
  std::vector<double> keys(3);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto d = refhash::sha256(samples[i]);
    std::uint64_t prefix = 0;
    for (int b = 0; b < 8; ++b) prefix = (prefix << 8) | d[b];
    keys[i] = static_cast<double>(prefix) * std::pow(2.0, -64);
  }
  std::vector<std::size_t> expect(3);
  std::iota(expect.begin(), expect.end(), 0);
  std::stable_sort(expect.begin(), expect.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  REQUIRE(detkit::content_hash_permutation(samples, 0).perm == expect);
}

TEST_CASE("every strategy emits a bijection across sizes") {
  for (std::size_t n : {1u, 2u, 10u, 1000u, 10000u}) {
    SampleKeyTable t;
    std::vector<std::vector<std::size_t>> labels;
    std::vector<std::string> raw;
    for (std::size_t i = 0; i < n; ++i) {
      t.l1_norms.push_back(static_cast<float>(i) * 0.173f + 0.01f);
      labels.push_back({i % 3});
      raw.push_back("s" + std::to_string(i));
    }
    t.labels = labels;
    REQUIRE(is_permutation_of_n(detkit::golden_permutation(t, 1).perm, n));
    REQUIRE(is_permutation_of_n(detkit::seeded_permutation(n, 7, 1).perm, n));
    REQUIRE(is_permutation_of_n(detkit::sobol_permutation(n, 1).perm, n));
    REQUIRE(is_permutation_of_n(detkit::content_hash_permutation(raw, 1).perm, n));
    std::vector<std::size_t> flat;
    for (const auto& b : detkit::class_guaranteed_batches(t, 32, 1))
      flat.insert(flat.end(), b.begin(), b.end());
    REQUIRE(is_permutation_of_n(flat, n));
  }
}

TEST_CASE("consecutive epochs produce different permutations almost always") {
  SampleKeyTable t;
  for (std::size_t i = 0; i < 64; ++i)
    t.l1_norms.push_back(static_cast<float>(i) * 0.377f + 0.2f);
  std::size_t changed = 0;
  for (std::size_t e = 0; e < 100; ++e)
    changed += detkit::golden_permutation(t, e).perm !=
               detkit::golden_permutation(t, e + 1).perm;
  REQUIRE(changed >= 95);
}

TEST_CASE("diagnostics: entropy loss spans the trivial extremes") {
  {
    SampleKeyTable t;
    for (int i = 0; i < 50; ++i) t.l1_norms.push_back(static_cast<float>(i));
    const auto rep = detkit::permutation_diagnostics(
        {detkit::golden_permutation(t, 0)}, t);
    REQUIRE(rep.entropy_loss == 0.0);
    REQUIRE(rep.collision_group_sizes.empty());
  }
  {
    const SampleKeyTable t = table_with_norms(std::vector<float>(50, 1.0f));
    const auto rep = detkit::permutation_diagnostics(
        {detkit::golden_permutation(t, 0)}, t);
    REQUIRE(rep.entropy_loss == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("diagnostics: 4% collisions in small groups lose under 0.2%") {
  // n = 10000 with 400 samples (4%) in collision groups of size 2
  SampleKeyTable t;
  for (int i = 0; i < 9600; ++i)
    t.l1_norms.push_back(static_cast<float>(i) * 0.713f + 0.001f);
  for (int g = 0; g < 200; ++g)  // two hundred duplicate pairs
    for (int k = 0; k < 2; ++k)
      t.l1_norms.push_back(50000.0f + static_cast<float>(g));
  REQUIRE(t.n() == 10000);

  const auto rep =
      detkit::permutation_diagnostics({detkit::golden_permutation(t, 0)}, t);

  // independent oracle: sum log(g!) / log(n!)
  const double lost = 200.0 * std::log(2.0);
  const double expect = lost / std::lgamma(10000.0 + 1.0);
  REQUIRE(rep.entropy_loss == Catch::Approx(expect).margin(1e-9));
  REQUIRE(rep.entropy_loss < 0.002);
}

TEST_CASE("diagnostics report epoch distance and discrepancy") {
  SampleKeyTable t;
  for (std::size_t i = 0; i < 128; ++i)
    t.l1_norms.push_back(static_cast<float>(i) * 1.31f + 0.7f);
  std::vector<PermutationSchedule> epochs;
  for (std::size_t e = 0; e < 4; ++e)
    epochs.push_back(detkit::golden_permutation(t, e));
  const auto rep = detkit::permutation_diagnostics(epochs, t);
  REQUIRE(rep.epoch_distance.size() == 3);
  for (double d : rep.epoch_distance) {
    REQUIRE(d >= 0.0);
    REQUIRE(d <= 1.0);
    REQUIRE(d > 0.0);  // irrational rotation reshuffles distinct keys
  }
  REQUIRE(rep.star_discrepancy > 0.0);
  REQUIRE(rep.star_discrepancy < 0.5);
}
