// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "hfldd/datagen.hpp"
#include "hfldd/numkernel.hpp"

namespace hfldd {

struct KipConfig {
  std::size_t support_size = 20;
  double lambda = 1e-6;
  double learning_rate = 0.004;
  std::size_t iterations = 300;
  std::size_t target_batch = 10;
  std::uint64_t seed = 0;
  /// Full-data loss is recorded every `trace_every` iterations (0 disables the trace).
  std::size_t trace_every = 100;

  void validate() const;
};

struct DistilledSet {
  DenseMatrix features;  // |S| × d
  DenseMatrix labels;    // |S| × N_c, fixed one-hot
  double final_loss = 0.0;
  /// (iteration, full-data loss) pairs, starting with iteration 0.
  std::vector<std::pair<std::size_t, double>> loss_trace;

  std::size_t size() const noexcept { return features.rows(); }
  LabeledDataset as_dataset() const;
};

/// Kernel ridge regression loss ½‖y_t − K_ts (K_ss + λI)⁻¹ y_s‖²_F with an RBF kernel.
double kip_loss(const DenseMatrix& xs, const DenseMatrix& ys, const DenseMatrix& xt,
                const DenseMatrix& yt, double lambda, double gamma);

/// Gradient of kip_loss with respect to the support features xs.
DenseMatrix kip_gradient(const DenseMatrix& xs, const DenseMatrix& ys, const DenseMatrix& xt,
                         const DenseMatrix& yt, double lambda, double gamma);

/// Loss and gradient from one factorization.
struct KipEvaluation {
  double loss = 0.0;
  DenseMatrix gradient;
};
KipEvaluation kip_loss_and_gradient(const DenseMatrix& xs, const DenseMatrix& ys,
                                    const DenseMatrix& xt, const DenseMatrix& yt, double lambda,
                                    double gamma);

/// Class-balanced initial support indices: slots are dealt round-robin over
/// the classes present in `d`, each filled by a random unused sample of that class.
std::vector<std::size_t> initial_support_indices(const LabeledDataset& d, std::size_t support_size,
                                                 SeededRng& rng);

/// Distills `d` into cfg.support_size points by gradient descent on the support features.
DistilledSet distill(const LabeledDataset& d, const KipConfig& cfg, double gamma);

/// KRR predictions K(x, xs)(K_ss + λI)⁻¹ ys.
DenseMatrix krr_predict(const DenseMatrix& xs, const DenseMatrix& ys, const DenseMatrix& x,
                        double lambda, double gamma);

/// Top-1 accuracy of the KRR classifier fit on (xs, ys).
double krr_accuracy(const DenseMatrix& xs, const DenseMatrix& ys, const LabeledDataset& test,
                    double lambda, double gamma);

/// CSV with header f0..f{d-1},y0..y{Nc-1}; values printed with 17 significant digits.
void write_distilled_csv(const DistilledSet& s, std::ostream& out);
DistilledSet read_distilled_csv(std::istream& in);

}  // namespace hfldd
