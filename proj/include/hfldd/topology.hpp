// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hfldd/numkernel.hpp"

namespace hfldd {

using ClientId = std::size_t;
using ClientGroup = std::vector<ClientId>;

/// Pairwise KL matrix between client soft labels. Not symmetric in general.
struct SimilarityMatrix {
  DenseMatrix m;
  std::size_t size() const noexcept { return m.rows(); }
};

struct ClusterTopology {
  std::vector<ClientGroup> homogeneous;
  std::vector<ClientGroup> heterogeneous;
  std::vector<ClientId> heads;
  std::uint64_t seed = 0;

  /// Checks disjoint cover of [0, n), at most one member per homogeneous cluster
  /// in every heterogeneous cluster, and head membership. Returns a description
  /// of the first violation, or an empty string.
  std::string violation(std::size_t n_clients) const;

  /// {"homogeneous": [[ids]], "heterogeneous": [[ids]], "heads": [ids], "seed": n}
  std::string to_json() const;
  static ClusterTopology from_json(const std::string& text);
};

/// Mean over probe samples of Σ_c s_i log(s_i / s_j), natural log.
double kl_divergence(const DenseMatrix& si, const DenseMatrix& sj);

SimilarityMatrix build_similarity(const std::vector<DenseMatrix>& soft_labels);

struct KMeansResult {
  std::vector<ClientGroup> clusters;
  std::vector<std::size_t> assignment;
  /// Within-cluster sum of squares after seeding and after every Lloyd update.
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding over the rows of `m`.
/// Empty clusters take the point farthest from its centroid. Clusters are
/// returned sorted by their smallest member.
KMeansResult kmeans(const DenseMatrix& points, std::size_t k, SeededRng& rng,
                    std::size_t max_iters = 100);

std::vector<ClientGroup> kmeans_rows(const SimilarityMatrix& m, std::size_t k, SeededRng& rng,
                                     std::size_t max_iters = 100);

/// Builds heterogeneous clusters by repeatedly drawing one random client out of
/// every non-empty homogeneous cluster.
std::vector<ClientGroup> cluster_sampling(const std::vector<ClientGroup>& homogeneous,
                                          SeededRng& rng);

/// One uniformly chosen member per cluster.
std::vector<ClientId> elect_heads(const std::vector<ClientGroup>& heterogeneous, SeededRng& rng);

/// Full server-side clustering: similarity, K-Means, ClusterSampling, head election.
/// Each step draws from its own stream of `seed`.
ClusterTopology build_topology(const std::vector<DenseMatrix>& soft_labels, std::size_t k,
                               std::uint64_t seed, std::size_t kmeans_iters = 100);

}  // namespace hfldd
