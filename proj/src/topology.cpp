// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#include "hfldd/topology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"

namespace hfldd {

double kl_divergence(const DenseMatrix& si, const DenseMatrix& sj) {
  if (si.rows() != sj.rows() || si.cols() != sj.cols()) {
    throw ShapeError("kl_divergence: soft label shapes differ");
  }
  if (si.rows() == 0) throw EmptyInputError("kl_divergence: no probe samples");
  double total = 0.0;
  for (std::size_t i = 0; i < si.size(); ++i) {
    const double p = si.data()[i];
    const double q = sj.data()[i];
    if (p > 0.0) total += p * std::log(p / q);
  }
  return total / static_cast<double>(si.rows());
}

SimilarityMatrix build_similarity(const std::vector<DenseMatrix>& soft_labels) {
  const std::size_t n = soft_labels.size();
  if (n < 2) throw CapacityError("build_similarity: need at least two clients");
  SimilarityMatrix s{DenseMatrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      try {
        // Clamped inputs can leave rows a hair off unit mass; KL stays non-negative.
        s.m(i, j) = std::max(0.0, kl_divergence(soft_labels[i], soft_labels[j]));
      } catch (const ShapeError& e) {
        throw ShapeError("build_similarity: clients " + std::to_string(i) + " and " +
                         std::to_string(j) + ": " + e.what());
      }
    }
  }
  return s;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) s += (a[f] - b[f]) * (a[f] - b[f]);
  return s;
}

std::size_t nearest(std::span<const double> p, const DenseMatrix& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = sq_dist(p, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double wcss(const DenseMatrix& points, const DenseMatrix& centroids,
            const std::vector<std::size_t>& assign) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) s += sq_dist(points.row(i), centroids.row(assign[i]));
  return s;
}

DenseMatrix seed_plus_plus(const DenseMatrix& points, std::size_t k, SeededRng& rng) {
  const std::size_t n = points.rows();
  DenseMatrix centroids(k, points.cols());
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.uniform_index(n);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
      if (total > 0.0) {
        double r = rng.uniform() * total;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (chosen[i] || d2[i] == 0.0) continue;
          pick = i;
          r -= d2[i];
          if (r < 0.0) break;
        }
      } else {
        // Every remaining point coincides with a centroid: draw uniformly among unchosen ones.
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < n; ++i) {
          if (!chosen[i]) rest.push_back(i);
        }
        pick = rest[rng.uniform_index(rest.size())];
      }
    }
    chosen[pick] = true;
    std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(points.row(i), centroids.row(c)));
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const DenseMatrix& points, std::size_t k, SeededRng& rng,
                    std::size_t max_iters) {
  const std::size_t n = points.rows();
  if (k < 1) throw DomainError("kmeans: k must be >= 1");
  if (k > n) {
    throw CapacityError("kmeans: k = " + std::to_string(k) + " exceeds " + std::to_string(n) +
                        " points");
  }
  const std::size_t dim = points.cols();
  DenseMatrix centroids = seed_plus_plus(points, k, rng);

  KMeansResult res;
  res.assignment.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) res.assignment[i] = nearest(points.row(i), centroids);
  res.objective_trace.push_back(wcss(points, centroids, res.assignment));

  for (std::size_t it = 0; it < std::max<std::size_t>(max_iters, 1); ++it) {
    // Update step, then repair empty clusters.
    DenseMatrix sums(k, dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[res.assignment[i]];
      auto s = sums.row(res.assignment[i]);
      auto p = points.row(i);
      for (std::size_t f = 0; f < dim; ++f) s[f] += p[f];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t f = 0; f < dim; ++f) centroids(c, f) = sums(c, f) / static_cast<double>(counts[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[res.assignment[i]] < 2) continue;
        const double d = sq_dist(points.row(i), centroids.row(res.assignment[i]));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      const std::size_t old = res.assignment[far];
      --counts[old];
      counts[c] = 1;
      res.assignment[far] = c;
      std::copy(points.row(far).begin(), points.row(far).end(), centroids.row(c).begin());
      std::fill(centroids.row(old).begin(), centroids.row(old).end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (res.assignment[i] != old) continue;
        auto p = points.row(i);
        for (std::size_t f = 0; f < dim; ++f) centroids(old, f) += p[f] / static_cast<double>(counts[old]);
      }
    }
    res.objective_trace.push_back(wcss(points, centroids, res.assignment));
    ++res.iterations;

    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      // Keep the current cluster on ties so the objective cannot oscillate.
      std::size_t best = nearest(points.row(i), centroids);
      if (best != res.assignment[i] &&
          sq_dist(points.row(i), centroids.row(best)) <
              sq_dist(points.row(i), centroids.row(res.assignment[i]))) {
        res.assignment[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }

  res.clusters.assign(k, {});
  for (std::size_t i = 0; i < n; ++i) res.clusters[res.assignment[i]].push_back(i);
  res.clusters.erase(std::remove_if(res.clusters.begin(), res.clusters.end(),
                                    [](const ClientGroup& g) { return g.empty(); }),
                     res.clusters.end());
  std::sort(res.clusters.begin(), res.clusters.end());
  return res;
}

std::vector<ClientGroup> kmeans_rows(const SimilarityMatrix& m, std::size_t k, SeededRng& rng,
                                     std::size_t max_iters) {
  if (k < 2) throw DomainError("kmeans_rows: k must be >= 2");
  return kmeans(m.m, k, rng, max_iters).clusters;
}

std::vector<ClientGroup> cluster_sampling(const std::vector<ClientGroup>& homogeneous,
                                          SeededRng& rng) {
  std::vector<ClientGroup> pools = homogeneous;
  std::vector<ClientGroup> out;
  auto any_left = [&] {
    return std::any_of(pools.begin(), pools.end(), [](const ClientGroup& g) { return !g.empty(); });
  };
  while (any_left()) {
    ClientGroup cluster;
    for (auto& pool : pools) {
      if (pool.empty()) continue;
      const std::size_t i = rng.uniform_index(pool.size());
      cluster.push_back(pool[i]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
    }
    out.push_back(std::move(cluster));
  }
  return out;
}

std::vector<ClientId> elect_heads(const std::vector<ClientGroup>& heterogeneous, SeededRng& rng) {
  std::vector<ClientId> heads;
  heads.reserve(heterogeneous.size());
  for (std::size_t h = 0; h < heterogeneous.size(); ++h) {
    if (heterogeneous[h].empty()) {
      throw EmptyInputError("elect_heads: heterogeneous cluster " + std::to_string(h) + " is empty");
    }
    heads.push_back(heterogeneous[h][rng.uniform_index(heterogeneous[h].size())]);
  }
  return heads;
}

ClusterTopology build_topology(const std::vector<DenseMatrix>& soft_labels, std::size_t k,
                               std::uint64_t seed, std::size_t kmeans_iters) {
  const SimilarityMatrix sim = build_similarity(soft_labels);
  SeededRng kmeans_rng(seed, 0x4b4d);
  SeededRng sampling_rng(seed, 0x4353);
  SeededRng head_rng(seed, 0x4844);
  ClusterTopology t;
  t.seed = seed;
  t.homogeneous = kmeans_rows(sim, k, kmeans_rng, kmeans_iters);
  t.heterogeneous = cluster_sampling(t.homogeneous, sampling_rng);
  t.heads = elect_heads(t.heterogeneous, head_rng);
  return t;
}

std::string ClusterTopology::violation(std::size_t n_clients) const {
  std::vector<int> seen(n_clients, 0);
  for (std::size_t h = 0; h < heterogeneous.size(); ++h) {
    for (auto id : heterogeneous[h]) {
      if (id >= n_clients) return "client id " + std::to_string(id) + " out of range";
      if (seen[id]++) return "client " + std::to_string(id) + " appears twice";
    }
  }
  for (std::size_t i = 0; i < n_clients; ++i) {
    if (!seen[i]) return "client " + std::to_string(i) + " not covered";
  }
  std::vector<std::size_t> homo_of(n_clients, homogeneous.size());
  for (std::size_t k = 0; k < homogeneous.size(); ++k) {
    for (auto id : homogeneous[k]) {
      if (id < n_clients) homo_of[id] = k;
    }
  }
  for (std::size_t h = 0; h < heterogeneous.size(); ++h) {
    std::set<std::size_t> groups;
    for (auto id : heterogeneous[h]) {
      if (!groups.insert(homo_of[id]).second) {
        return "heterogeneous cluster " + std::to_string(h) +
               " holds two members of one homogeneous cluster";
      }
    }
  }
  if (heads.size() != heterogeneous.size()) return "head count differs from cluster count";
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const auto& g = heterogeneous[h];
    if (std::find(g.begin(), g.end(), heads[h]) == g.end()) {
      return "head of cluster " + std::to_string(h) + " is not a member";
    }
  }
  return {};
}

std::string ClusterTopology::to_json() const {
  nlohmann::ordered_json j;
  j["homogeneous"] = homogeneous;
  j["heterogeneous"] = heterogeneous;
  j["heads"] = heads;
  j["seed"] = seed;
  return j.dump(2);
}

ClusterTopology ClusterTopology::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ClusterTopology t;
  t.homogeneous = j.at("homogeneous").get<std::vector<ClientGroup>>();
  t.heterogeneous = j.at("heterogeneous").get<std::vector<ClientGroup>>();
  t.heads = j.at("heads").get<std::vector<ClientId>>();
  t.seed = j.at("seed").get<std::uint64_t>();
  return t;
}

}  // namespace hfldd
