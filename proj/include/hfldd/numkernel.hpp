// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "hfldd/errors.hpp"

namespace hfldd {

/// Row-major dense matrix of doubles. Value type; copying copies the data.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool all_finite() const noexcept;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);

/// Rows of `a` selected by `indices`, in that order.
DenseMatrix gather_rows(const DenseMatrix& a, std::span<const std::size_t> indices);
/// Stacks `top` above `bottom`; column counts must match (an empty operand is allowed).
DenseMatrix vstack(const DenseMatrix& top, const DenseMatrix& bottom);

double frobenius_norm_sq(const DenseMatrix& a);
double max_abs(const DenseMatrix& a);

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Throws SingularityError when a pivot is not strictly positive.
DenseMatrix cholesky(const DenseMatrix& a);

/// Solves L Lᵀ x = b for every column of b given the Cholesky factor L.
DenseMatrix cholesky_solve(const DenseMatrix& lower, const DenseMatrix& b);

/// Solves (k + λI) α = y through a Cholesky factorization.
DenseMatrix ridge_solve(const DenseMatrix& k, const DenseMatrix& y, double lambda);

/// Gaussian kernel exp(-gamma·‖aᵢ − bⱼ‖²), shape a.rows × b.rows.
DenseMatrix rbf_kernel(const DenseMatrix& a, const DenseMatrix& b, double gamma);

/// Bandwidth default 1 / (2·d·v) with v the mean per-feature variance of `x`.
/// Falls back to v = 1 when the data has no spread.
double default_rbf_gamma(const DenseMatrix& x);

/// xoshiro256** generator seeded from (seed, stream) via splitmix64.
/// Every draw is produced with integer arithmetic or IEEE-exact conversions, so
/// sequences are identical on every platform.
class SeededRng {
 public:
  using result_type = std::uint64_t;

  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  result_type operator()() noexcept { return next_u64(); }

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n) noexcept;
  double normal() noexcept;

  template <typename T>
  void shuffle(std::span<T> values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[uniform_index(i)]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& values) noexcept {
    shuffle(std::span<T>(values));
  }

  /// 0, 1, …, n−1 in random order.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_[4];
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace hfldd
