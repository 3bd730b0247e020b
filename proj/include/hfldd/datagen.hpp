// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "hfldd/numkernel.hpp"

namespace hfldd {

/// Features (n × d) with label rows (n × N_c) that are one-hot or soft.
struct LabeledDataset {
  DenseMatrix features;
  DenseMatrix labels;
  std::size_t class_count = 0;

  LabeledDataset() = default;
  LabeledDataset(DenseMatrix x, DenseMatrix y, std::size_t n_classes);

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }
  bool empty() const noexcept { return features.rows() == 0; }

  /// Throws ShapeError when the row counts differ or a label row does not sum to 1.
  void validate() const;

  LabeledDataset subset(std::span<const std::size_t> indices) const;

  /// Argmax class of each label row.
  std::vector<std::size_t> hard_labels() const;
  /// Number of rows whose argmax is each class.
  std::vector<std::size_t> class_histogram() const;
  std::size_t distinct_classes() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

/// Row-wise concatenation; feature dims and class counts must agree.
LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b);

DenseMatrix one_hot(std::span<const std::size_t> classes, std::size_t class_count);

/// Class-conditional isotropic Gaussian model: one mean row per class.
struct GaussianClasses {
  DenseMatrix means;
  double sigma = 1.0;
};

/// Means at `separation` times random unit directions.
GaussianClasses make_gaussian_classes(std::size_t n_classes, std::size_t dim, double separation,
                                      SeededRng& rng);

/// Moves every class mean by `offset_sigmas`·σ along an independent random unit direction.
GaussianClasses shift_class_means(const GaussianClasses& g, double offset_sigmas, SeededRng& rng);

/// Exactly `per_class` samples of each class, grouped by class.
LabeledDataset sample_gaussian_classes(const GaussianClasses& g, std::size_t per_class,
                                       SeededRng& rng);

LabeledDataset synth_gaussian_classes(std::size_t n_classes, std::size_t per_class, std::size_t dim,
                                      double separation, SeededRng& rng);

struct PartitionSpec {
  std::size_t clients = 0;
  std::size_t classes_per_client = 0;
  std::size_t total_classes = 0;
  std::size_t samples_per_client = 0;
  std::uint64_t seed = 0;
};

/// Row indices of `d` assigned to each client under quantity-based label skew.
std::vector<std::vector<std::size_t>> partition_label_skew_indices(const LabeledDataset& d,
                                                                   const PartitionSpec& spec);

std::vector<LabeledDataset> partition_label_skew(const LabeledDataset& d,
                                                 const PartitionSpec& spec);

/// Uniform subsample of `size` rows without replacement.
LabeledDataset make_probe_dataset(const LabeledDataset& source, std::size_t size, SeededRng& rng);

/// Random split into (train, test) with round(n · test_fraction) test rows.
std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset& d,
                                                           double test_fraction, SeededRng& rng);

/// Reads an IDX image/label file pair (MNIST layout). Pixels are scaled to [0, 1].
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t class_count = 10);

/// CSV with header f0..f{d-1},label; label is the argmax class.
void write_dataset_csv(const LabeledDataset& d, std::ostream& out);

}  // namespace hfldd
