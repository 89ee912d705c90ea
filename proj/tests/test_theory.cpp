#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "detkit/theory.hpp"

using detkit::BasisKind;
using detkit::Tensor;

namespace {

Tensor<double> random_vector(std::size_t n, std::uint64_t seed) {
  detkit::Xoshiro256StarStar rng(seed);
  Tensor<double> x({n});
  for (std::size_t i = 0; i < n; ++i) x[i] = rng.gaussian();
  return x;
}

}  // namespace

TEST_CASE("energy ratio: full rank preserves everything (Parseval)") {
  const auto x = random_vector(64, 3);
  REQUIRE(detkit::energy_ratio_truncated(x, 64) ==
          Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("energy ratio: a constant signal lives entirely in the DC row") {
  Tensor<double> x({32});
  for (std::size_t i = 0; i < 32; ++i) x[i] = 2.5;
  REQUIRE(detkit::energy_ratio_truncated(x, 1) ==
          Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("energy ratio: truncation equals one minus tail energy") {
  const std::size_t n = 64, k = 16;
  const auto x = random_vector(n, 5);
  // oracle: full transform, then sum coefficient energy directly
  const auto b = detkit::basis_matrix(BasisKind::dct2, n, n, true);
  double head = 0.0, total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double c = 0.0;
    for (std::size_t j = 0; j < n; ++j) c += b.rows.at(r, j) * x[j];
    total += c * c;
    if (r < k) head += c * c;
  }
  REQUIRE(detkit::energy_ratio_truncated(x, k) ==
          Catch::Approx(head / total).margin(1e-12));
}

TEST_CASE("energy ratio rejects the zero vector and bad K") {
  Tensor<double> zero({8});
  REQUIRE_THROWS_AS(detkit::energy_ratio_truncated(zero, 4),
                    detkit::degenerate_error);
  const auto x = random_vector(8, 1);
  REQUIRE_THROWS_AS(detkit::energy_ratio_truncated(x, 0),
                    detkit::dimension_error);
  REQUIRE_THROWS_AS(detkit::energy_ratio_truncated(x, 9),
                    detkit::dimension_error);
}

TEST_CASE("white noise splits its energy evenly across half the rows") {
  // average over draws: expectation K/N of total for orthonormal rows
  // times the 2/N h scaling absorbed in the ratio; here simply K/N = 0.5
  double acc = 0.0;
  const int draws = 200;
  for (int d = 0; d < draws; ++d)
    acc += detkit::energy_ratio_truncated(random_vector(64, 100 + d), 32);
  REQUIRE(acc / draws == Catch::Approx(0.5).margin(0.02));
}

TEST_CASE("kaiming MC energy ratio matches 2K/N mean and 8K/N^2 variance") {
  const std::size_t n = 64, k = 16;
  const auto [mean, var] = detkit::kaiming_energy_ratio_mc(n, k, 100000, 9);
  const double want_mean = 2.0 * k / static_cast<double>(n);       // 0.5
  const double want_var = 8.0 * k / static_cast<double>(n * n);    // 1/32
  REQUIRE(mean == Catch::Approx(want_mean).margin(3.0 * std::sqrt(want_var / 100000.0)));
  REQUIRE(var == Catch::Approx(want_var).epsilon(0.2));

  // K = N doubles the energy on average: mean 2.0
  const auto [mean2, var2] = detkit::kaiming_energy_ratio_mc(n, n, 100000, 10);
  REQUIRE(mean2 == Catch::Approx(2.0).margin(3.0 * std::sqrt(var2 / 100000.0)));
  REQUIRE_THROWS_AS(detkit::kaiming_energy_ratio_mc(n, k, 10, 1),
                    detkit::spec_error);
}

TEST_CASE("condition numbers: orthonormal rows give exactly one") {
  const auto b = detkit::basis_matrix(BasisKind::dct2, 64, 64, true);
  REQUIRE(detkit::condition_number(b.rows) == Catch::Approx(1.0).margin(1e-8));

  Tensor<double> d({2, 2});
  d.at(0, 0) = 10.0;
  d.at(1, 1) = 1.0;
  REQUIRE(detkit::condition_number(d) == Catch::Approx(10.0).margin(1e-10));

  Tensor<double> singular({2, 2});
  singular.at(0, 0) = 1.0;  // rank one
  REQUIRE(std::isinf(detkit::condition_number(singular)));
}

TEST_CASE("band-limited signals are captured almost completely") {
  REQUIRE(detkit::bandlimited_capture(0.8, 100) > 0.99);
  REQUIRE(detkit::bandlimited_capture(1.0, 64) ==
          Catch::Approx(1.0).margin(1e-12));
  REQUIRE_THROWS_AS(detkit::bandlimited_capture(0.0, 64), detkit::spec_error);
}

TEST_CASE("Toeplitz off-diagonal energy fraction against frozen references") {
  REQUIRE(detkit::toeplitz_diag_energy(64, 0.0) ==
          Catch::Approx(0.0).margin(1e-12));
  // values frozen from an independent double-precision computation
  REQUIRE(detkit::toeplitz_diag_energy(64, 0.5) ==
          Catch::Approx(0.007433637517507244).margin(1e-10));
  REQUIRE(detkit::toeplitz_diag_energy(64, 0.7) ==
          Catch::Approx(0.01630700476195961).margin(1e-10));
  REQUIRE(detkit::toeplitz_diag_energy(64, 0.9) ==
          Catch::Approx(0.03442331692406605).margin(1e-10));
  REQUIRE(detkit::toeplitz_diag_energy(64, 0.95) ==
          Catch::Approx(0.030097954715191364).margin(1e-10));
  // near-diagonalization: even at rho 0.9 under 5% off-diagonal energy
  REQUIRE(detkit::toeplitz_diag_energy(64, 0.9) < 0.05);
  REQUIRE_THROWS_AS(detkit::toeplitz_diag_energy(64, 1.0), detkit::spec_error);
}

TEST_CASE("mutual information: isotropic closed form (M/2) log2(1 + snr)") {
  const std::size_t m = 16, n = 64;
  const auto b = detkit::basis_matrix(BasisKind::dct2, m, n, true);
  const auto eye = Tensor<double>::identity(n);
  const double snr = std::pow(10.0, 1.0);  // 10 dB
  const double want = 0.5 * m * std::log2(1.0 + snr);
  const double got = detkit::gaussian_mutual_information(b.rows, eye, 10.0);
  REQUIRE(got == Catch::Approx(want).margin(1e-9));
  // frozen value for the same setup
  REQUIRE(got == Catch::Approx(27.675452949098386).margin(1e-9));
}

TEST_CASE("mutual information under correlated inputs favors the DCT front end") {
  const std::size_t m = 16, n = 64;
  const auto sigma = detkit::detail::toeplitz_sigma(n, 0.9);
  const auto b = detkit::basis_matrix(BasisKind::dct2, m, n, true);
  const double dct_mi = detkit::gaussian_mutual_information(b.rows, sigma, 10.0);
  REQUIRE(dct_mi == Catch::Approx(34.38175458369454).margin(1e-8));

  detkit::Xoshiro256StarStar rng(77);
  double kaiming_sum = 0.0;
  const int draws = 20;
  for (int d = 0; d < draws; ++d) {
    const auto w = detkit::detail::gaussian_matrix(
        m, n, rng, std::sqrt(2.0 / static_cast<double>(n)));
    kaiming_sum += detkit::gaussian_mutual_information(w, sigma, 10.0);
  }
  REQUIRE(dct_mi >= kaiming_sum / draws);
  REQUIRE(kaiming_sum / draws < 30.0);  // the gap is large, not marginal
}

TEST_CASE("mutual information rejects a rank-deficient projection") {
  Tensor<double> w({2, 4});
  for (std::size_t j = 0; j < 4; ++j) {
    w.at(0, j) = 1.0;
    w.at(1, j) = 1.0;  // duplicate row: W W^T singular
  }
  REQUIRE_THROWS_AS(detkit::gaussian_mutual_information(
                        w, Tensor<double>::identity(4), 10.0),
                    detkit::degenerate_error);
}

TEST_CASE("the bundled theory suite passes every check") {
  const auto reports = detkit::theory_suite();
  REQUIRE(reports.size() == 9);
  for (const auto& r : reports) {
    INFO(r.check_name);
    REQUIRE(r.pass);
  }
  // CSV: header plus one row per computed value of each check
  const std::string csv = detkit::theory_csv(reports);
  std::size_t value_rows = 0;
  for (const auto& r : reports) value_rows += r.computed.size();
  REQUIRE(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) ==
          value_rows + 1);
  for (const auto& r : reports)
    REQUIRE(csv.find(r.check_name) != std::string::npos);
  const std::string text = detkit::theory_text(reports);
  for (const auto& r : reports)
    REQUIRE(text.find(r.check_name) != std::string::npos);
}
