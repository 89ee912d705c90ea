#include <catch2/catch_amalgamated.hpp>

#include "detkit/bases.hpp"
#include "detkit/rng.hpp"
#include "detkit/tensor.hpp"

using detkit::Tensor;

namespace {

Tensor<double> random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  detkit::Xoshiro256StarStar rng(seed);
  Tensor<double> m({r, c});
  for (std::size_t i = 0; i < m.numel(); ++i) m[i] = rng.gaussian();
  return m;
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  REQUIRE(a.shape() == b.shape());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST_CASE("matmul identity returns the operand unchanged") {
  const Tensor<double> a = random_matrix(3, 4, 11);
  const Tensor<double> out = detkit::matmul(Tensor<double>::identity(3), a);
  for (std::size_t i = 0; i < a.numel(); ++i) REQUIRE(out[i] == a[i]);
}

TEST_CASE("matmul hand-checked 2x2 times 2x1") {
  Tensor<double> a({2, 2});
  a.at(0, 0) = 1; a.at(0, 1) = 2; a.at(1, 0) = 3; a.at(1, 1) = 4;
  Tensor<double> b({2, 1});
  b.at(0, 0) = 1; b.at(1, 0) = 1;
  const Tensor<double> c = detkit::matmul(a, b);
  REQUIRE(c.at(0, 0) == 3.0);
  REQUIRE(c.at(1, 0) == 7.0);
}

TEST_CASE("matmul matches a naive ascending-order triple loop bit-for-bit") {
  const Tensor<double> a = random_matrix(7, 5, 21);
  const Tensor<double> b = random_matrix(5, 3, 22);
  const Tensor<double> c = detkit::matmul(a, b);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 5; ++k) acc += a.at(i, k) * b.at(k, j);
      REQUIRE(c.at(i, j) == acc);
    }
}

TEST_CASE("matmul shape mismatch raises a dimension error") {
  REQUIRE_THROWS_AS(detkit::matmul(random_matrix(2, 3, 1), random_matrix(4, 2, 2)),
                    detkit::dimension_error);
}

TEST_CASE("matmul is associative up to rounding") {
  const Tensor<double> a = random_matrix(6, 5, 31);
  const Tensor<double> b = random_matrix(5, 4, 32);
  const Tensor<double> c = random_matrix(4, 3, 33);
  const Tensor<double> left = detkit::matmul(detkit::matmul(a, b), c);
  const Tensor<double> right = detkit::matmul(a, detkit::matmul(b, c));
  double ref = 0.0;
  for (std::size_t i = 0; i < left.numel(); ++i)
    ref = std::max(ref, std::abs(left[i]));
  REQUIRE(max_abs_diff(left, right) <= 1e-9 * std::max(ref, 1.0));
}

TEST_CASE("matmul is bitwise reproducible") {
  const Tensor<double> a = random_matrix(9, 9, 41);
  const Tensor<double> b = random_matrix(9, 9, 42);
  const Tensor<double> c1 = detkit::matmul(a, b);
  const Tensor<double> c2 = detkit::matmul(a, b);
  for (std::size_t i = 0; i < c1.numel(); ++i) REQUIRE(c1[i] == c2[i]);
}

TEST_CASE("svd of the identity yields unit singular values") {
  const auto svd = detkit::svd_small(Tensor<double>::identity(4));
  REQUIRE(svd.s.size() == 4);
  for (double s : svd.s) REQUIRE(s == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("svd of diag(3,2,1) recovers the diagonal, descending") {
  Tensor<double> d({3, 3});
  d.at(0, 0) = 3; d.at(1, 1) = 2; d.at(2, 2) = 1;
  const auto svd = detkit::svd_small(d);
  REQUIRE(svd.s[0] == Catch::Approx(3.0).margin(1e-12));
  REQUIRE(svd.s[1] == Catch::Approx(2.0).margin(1e-12));
  REQUIRE(svd.s[2] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("svd of an orthonormal DCT has all singular values at 1") {
  const detkit::BasisMatrix b =
      detkit::basis_matrix(detkit::BasisKind::dct2, 16, 16, true);
  const auto svd = detkit::svd_small(b.rows);
  for (double s : svd.s) REQUIRE(std::abs(s - 1.0) < 1e-10);
}

TEST_CASE("svd factors are orthonormal and reconstruct the input") {
  for (std::uint64_t seed : {101u, 102u, 103u}) {
    const Tensor<double> a = random_matrix(10, 6, seed);
    const auto svd = detkit::svd_small(a);

    const Tensor<double> utu =
        detkit::matmul(detkit::transposed(svd.u), svd.u);
    const Tensor<double> vtv =
        detkit::matmul(detkit::transposed(svd.v), svd.v);
    REQUIRE(max_abs_diff(utu, Tensor<double>::identity(6)) < 1e-10);
    REQUIRE(max_abs_diff(vtv, Tensor<double>::identity(6)) < 1e-10);

    Tensor<double> us = svd.u;
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 6; ++j) us.at(i, j) *= svd.s[j];
    const Tensor<double> rec = detkit::matmul(us, detkit::transposed(svd.v));
    double fro = 0.0, err = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
      fro += a[i] * a[i];
      err += (rec[i] - a[i]) * (rec[i] - a[i]);
    }
    REQUIRE(std::sqrt(err) <= 1e-10 * std::sqrt(fro));
  }
}

TEST_CASE("svd handles rank deficiency with an orthonormal completion") {
  // centered identity: rank K-1 with a known null direction
  const std::size_t k = 12;
  Tensor<double> p = Tensor<double>::identity(k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) p.at(i, j) -= 1.0 / k;
  const auto svd = detkit::svd_small(p);
  REQUIRE(svd.s.back() == 0.0);
  const Tensor<double> utu = detkit::matmul(detkit::transposed(svd.u), svd.u);
  REQUIRE(max_abs_diff(utu, Tensor<double>::identity(k)) < 1e-10);
}

TEST_CASE("svd rejects non-finite input") {
  Tensor<double> a({2, 2});
  a.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(detkit::svd_small(a), detkit::numeric_error);
}

TEST_CASE("svd is bitwise reproducible") {
  const Tensor<double> a = random_matrix(8, 8, 77);
  const auto s1 = detkit::svd_small(a);
  const auto s2 = detkit::svd_small(a);
  for (std::size_t i = 0; i < s1.s.size(); ++i) REQUIRE(s1.s[i] == s2.s[i]);
  for (std::size_t i = 0; i < s1.u.numel(); ++i) REQUIRE(s1.u[i] == s2.u[i]);
  for (std::size_t i = 0; i < s1.v.numel(); ++i) REQUIRE(s1.v[i] == s2.v[i]);
}
