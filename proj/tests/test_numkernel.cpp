// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#include <cmath>

#include "doctest.h"
#include "hfldd/numkernel.hpp"
#include "test_support.hpp"

using namespace hfldd;
using hfldd::testing::random_matrix;

namespace {

DenseMatrix naive_product(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

// Random SPD matrix QᵀDQ-like: BᵀB plus a diagonal shift keeps the condition number bounded.
DenseMatrix random_spd(std::size_t n, SeededRng& rng) {
  DenseMatrix b = random_matrix(n, n, rng);
  DenseMatrix a = matmul(transpose(b), b);
  for (std::size_t i = 0; i < n; ++i) a(i, i) += 0.1;
  return a;
}

}  // namespace

TEST_CASE("matmul") {
  SUBCASE("identity") {
    DenseMatrix a{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
    CHECK(matmul(DenseMatrix::identity(3), a) == a);
  }
  SUBCASE("2x2 by 2x1") {
    CHECK(matmul(DenseMatrix{{1, 2}, {3, 4}}, DenseMatrix{{5}, {6}}) == DenseMatrix{{17}, {39}});
  }
  SUBCASE("random against triple loop") {
    SeededRng rng(7);
    auto a = random_matrix(7, 5, rng);
    auto b = random_matrix(5, 3, rng);
    auto got = matmul(a, b);
    auto want = naive_product(a, b);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got.data()[i] - want.data()[i]) <= 1e-12);
  }
  SUBCASE("shape error") {
    CHECK_THROWS_AS(matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)), ShapeError);
  }
  SUBCASE("associativity on random triples") {
    SeededRng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      auto a = random_matrix(4, 6, rng);
      auto b = random_matrix(6, 5, rng);
      auto c = random_matrix(5, 3, rng);
      auto l = matmul(matmul(a, b), c);
      auto r = matmul(a, matmul(b, c));
      for (std::size_t i = 0; i < l.size(); ++i) {
        CHECK(std::abs(l.data()[i] - r.data()[i]) <= 1e-9 * std::max(1.0, std::abs(l.data()[i])));
      }
    }
  }
}

TEST_CASE("ridge_solve") {
  DenseMatrix y{{2}, {4}};
  CHECK(ridge_solve(DenseMatrix::identity(2), y, 0.0) == DenseMatrix{{2}, {4}});
  auto half = ridge_solve(DenseMatrix::identity(2), y, 1.0);
  CHECK(half(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(half(1, 0) == doctest::Approx(2.0).epsilon(1e-15));

  SUBCASE("random SPD residual") {
    SeededRng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      auto k = random_spd(6, rng);
      auto rhs = random_matrix(6, 2, rng);
      const double lambda = 0.01 * trial;
      auto alpha = ridge_solve(k, rhs, lambda);
      auto kl = k;
      for (std::size_t i = 0; i < 6; ++i) kl(i, i) += lambda;
      auto res = matmul(kl, alpha);
      for (std::size_t i = 0; i < res.size(); ++i) CHECK(std::abs(res.data()[i] - rhs.data()[i]) <= 1e-9);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(ridge_solve(DenseMatrix(2, 3), DenseMatrix(2, 1), 0.0), ShapeError);
    CHECK_THROWS_AS(ridge_solve(DenseMatrix{{1, 2}, {2, 1}}, y, 0.0), SingularityError);
    CHECK_THROWS_AS(ridge_solve(DenseMatrix(2, 2), y, 0.0), SingularityError);
  }
  SUBCASE("cholesky reconstructs") {
    SeededRng rng(5);
    auto a = random_spd(5, rng);
    auto l = cholesky(a);
    auto back = matmul(l, transpose(l));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(back.data()[i] == doctest::Approx(a.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("rbf_kernel") {
  SeededRng rng(9);
  auto a = random_matrix(4, 3, rng);
  auto b = random_matrix(5, 3, rng);

  auto kaa = rbf_kernel(a, a, 0.7);
  for (std::size_t i = 0; i < 4; ++i) CHECK(kaa(i, i) == 1.0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(kaa(i, j) == kaa(j, i));

  CHECK(rbf_kernel(DenseMatrix{{0}}, DenseMatrix{{1}}, 1.0)(0, 0) == doctest::Approx(0.367879).epsilon(1e-6));

  auto kab = rbf_kernel(a, b, 0.3);
  REQUIRE(kab.rows() == 4);
  REQUIRE(kab.cols() == 5);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double d2 = 0.0;
      for (std::size_t f = 0; f < 3; ++f) d2 += std::pow(a(i, f) - b(j, f), 2);
      CHECK(std::abs(kab(i, j) - std::exp(-0.3 * d2)) <= 1e-12);
      CHECK(kab(i, j) > 0.0);
      CHECK(kab(i, j) <= 1.0);
    }

  CHECK_THROWS_AS(rbf_kernel(DenseMatrix(2, 3), DenseMatrix(2, 4), 1.0), ShapeError);
}

TEST_CASE("default_rbf_gamma uses mean feature variance") {
  // Two features with variances 1 and 4 (population) → mean 2.5, d = 2.
  DenseMatrix x{{-1, -2}, {1, 2}};
  CHECK(default_rbf_gamma(x) == doctest::Approx(1.0 / (2.0 * 2.0 * 2.5)));
  CHECK(default_rbf_gamma(DenseMatrix{{3, 3}}) == doctest::Approx(0.25));
}

TEST_CASE("SeededRng determinism") {
  SeededRng a(42, 7);
  SeededRng b(42, 7);
  SeededRng c(42, 8);
  bool any_diff = false;
  for (int i = 0; i < 10000; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    any_diff |= x != c.next_u64();
  }
  CHECK(any_diff);

  SeededRng r(1);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
    const auto k = r.uniform_index(7);
    CHECK(k < 7);
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}
