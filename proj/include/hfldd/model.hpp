// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "hfldd/datagen.hpp"
#include "hfldd/numkernel.hpp"

namespace hfldd {

/// Per-layer parameter tensors. Weight l is (in_l × out_l), bias l has out_l entries.
struct ParameterSet {
  std::vector<DenseMatrix> weights;
  std::vector<std::vector<double>> biases;

  std::size_t parameter_count() const noexcept;
  bool same_shape(const ParameterSet& other) const noexcept;
  double norm_sq() const noexcept;

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

using GradientSet = ParameterSet;

/// Fully connected ReLU network with a softmax output layer.
class MlpModel {
 public:
  MlpModel() = default;
  /// Zero-initialized model with the given layer sizes (input, hiddens…, classes).
  explicit MlpModel(std::vector<std::size_t> layer_sizes);

  /// Glorot-uniform weights, zero biases.
  static MlpModel glorot(std::vector<std::size_t> layer_sizes, SeededRng& rng);

  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  std::size_t input_dim() const noexcept { return sizes_.front(); }
  std::size_t output_dim() const noexcept { return sizes_.back(); }
  std::size_t layer_count() const noexcept { return sizes_.size() - 1; }
  std::size_t parameter_count() const noexcept { return params_.parameter_count(); }

  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  std::vector<std::size_t> sizes_;
  ParameterSet params_;
};

struct SgdConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  std::size_t steps = 1;

  void validate() const;
};

/// Proximal anchor for FedProx. Each SGD step is followed by the proximal map of
/// mu/2·‖ω − anchor‖², which matches adding mu·(ω − anchor) to the gradient to first order.
struct ProximalTerm {
  const MlpModel* anchor = nullptr;
  double mu = 0.0;
};

/// Softmax class probabilities, one row per input row.
DenseMatrix forward(const MlpModel& m, const DenseMatrix& x);

/// Mean cross-entropy of the model on (x, y) with soft or one-hot targets.
double cross_entropy(const MlpModel& m, const DenseMatrix& x, const DenseMatrix& y);

/// Gradient of the mean cross-entropy with respect to every weight and bias.
GradientSet backward(const MlpModel& m, const DenseMatrix& x, const DenseMatrix& y);

/// p ← p − eta·g for every parameter.
MlpModel sgd_step(const MlpModel& m, const GradientSet& g, double eta);

/// Mini-batch SGD for cfg.steps steps. Batches are drawn without replacement
/// from a permutation that is reshuffled whenever it is exhausted.
MlpModel local_train(const MlpModel& m, const LabeledDataset& d, const SgdConfig& cfg,
                     SeededRng& rng, std::optional<ProximalTerm> prox = std::nullopt);

/// Top-1 accuracy against the argmax of the label rows.
double accuracy(const MlpModel& m, const LabeledDataset& d);

/// Row-stochastic soft labels with entries clamped to [1e-12, 1].
DenseMatrix soft_labels(const MlpModel& m, const LabeledDataset& dg);

/// Binary layout: u64 layer count L+1, L+1 × u64 sizes, then per layer the
/// weights (row-major) followed by the biases, all little-endian.
void save_model(const MlpModel& m, std::ostream& out);
MlpModel load_model(std::istream& in);

}  // namespace hfldd
