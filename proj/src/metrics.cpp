// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#include "hfldd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hfldd/errors.hpp"
#include "json.hpp"

namespace hfldd {

std::string_view to_string(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::kHfldd: return "hfldd";
    case Algorithm::kFedAvg: return "fedavg";
    case Algorithm::kFedProx: return "fedprox";
    case Algorithm::kFedSeq: return "fedseq-lite";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "hfldd") return Algorithm::kHfldd;
  if (name == "fedavg") return Algorithm::kFedAvg;
  if (name == "fedprox") return Algorithm::kFedProx;
  if (name == "fedseq" || name == "fedseq-lite") return Algorithm::kFedSeq;
  throw DomainError("unknown algorithm '" + std::string(name) + "'");
}

namespace {

// 2T − 1 model transfers per participant; nothing is sent when T = 0.
std::uint64_t server_transfers(std::uint64_t rounds) { return rounds == 0 ? 0 : 2 * rounds - 1; }

}  // namespace

Bits cost_fedavg(const CostModel& c) {
  return c.clients * server_transfers(c.rounds) * c.model_size * c.bits_per_param;
}

Bits cost_hfldd(const CostModel& c) {
  const Bits soft = c.clients * c.probe_size * c.classes * c.bits_per_param;
  const Bits distilled =
      std::accumulate(c.distilled_sizes.begin(), c.distilled_sizes.end(), Bits{0}) *
      c.bits_per_sample;
  const Bits model = c.heads * c.model_size * server_transfers(c.rounds) * c.bits_per_param;
  return soft + distilled + model;
}

Bits cost_fedseq(const CostModel& c) {
  return c.fedseq_clusters * c.model_size * c.bits_per_param *
         (server_transfers(c.rounds) + c.rounds * c.fedseq_cluster_size);
}

Bits closed_form_cost(const CostModel& c, Algorithm a) {
  switch (a) {
    case Algorithm::kHfldd: return cost_hfldd(c);
    case Algorithm::kFedAvg:
    case Algorithm::kFedProx: return cost_fedavg(c);
    case Algorithm::kFedSeq: return cost_fedseq(c);
  }
  throw DomainError("closed_form_cost: unknown algorithm");
}

void ConvergenceParams::validate() const {
  if (!(strong_convexity > 0.0)) throw DomainError("convergence: mu must be positive");
  if (!(smoothness >= strong_convexity)) throw DomainError("convergence: need L >= mu");
  if (local_steps < 1) throw DomainError("convergence: E2 must be >= 1");
  if (sigma.size() != weights.size()) {
    throw DomainError("convergence: sigma and weights must have one entry per cluster head");
  }
  if (!weights.empty()) {
    const double s = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(s - 1.0) > 1e-12) throw DomainError("convergence: weights must sum to 1");
  }
  for (double w : weights) {
    if (w < 0.0) throw DomainError("convergence: negative weight");
  }
  if (grad_bound < 0.0 || gamma_cluster < 0.0 || gamma_distill < 0.0 || init_gap < 0.0) {
    throw DomainError("convergence: G, Gamma and the initial gap must be non-negative");
  }
}

double convergence_tau(const ConvergenceParams& p) {
  p.validate();
  return std::max(8.0 * p.smoothness / p.strong_convexity, static_cast<double>(p.local_steps)) - 1.0;
}

double convergence_q(const ConvergenceParams& p) {
  p.validate();
  double noise = 0.0;
  for (std::size_t h = 0; h < p.sigma.size(); ++h) {
    noise += p.weights[h] * p.weights[h] * p.sigma[h] * p.sigma[h];
  }
  const double drift = static_cast<double>(p.local_steps - 1);
  return noise + 6.0 * p.smoothness * (p.gamma_cluster + p.gamma_distill) +
         8.0 * drift * drift * p.grad_bound * p.grad_bound;
}

double convergence_bound(const ConvergenceParams& p, double t) {
  if (t < 0.0) throw DomainError("convergence_bound: round index must be non-negative");
  const double tau = convergence_tau(p);
  const double q = convergence_q(p);
  const double mu = p.strong_convexity;
  return p.smoothness / (t + tau) * (2.0 * q / (mu * mu) + (tau + 1.0) / 2.0 * p.init_gap);
}

ComplexityEstimates complexity_estimates(const CostModel& c, const ComplexityInputs& x) {
  const auto n = static_cast<double>(c.clients);
  const auto dg = static_cast<double>(c.probe_size);
  const auto w = static_cast<double>(c.model_size);
  std::uint64_t largest = 0;
  for (auto s : c.distilled_sizes) largest = std::max(largest, s);
  const auto s = static_cast<double>(largest);

  ComplexityEstimates e;
  e.server_similarity = n * n * dg * static_cast<double>(c.classes);
  e.server_kmeans = x.kmeans_iters * static_cast<double>(c.kmeans_k) * n * n;
  e.server_aggregation = static_cast<double>(c.rounds) * static_cast<double>(c.heads) * w;
  e.member_pretrain = x.pretrain_steps * x.pretrain_batch * w + dg * w;
  e.member_distill = x.kip_iters * s * s * s;
  e.head_training = static_cast<double>(c.rounds) * x.local_steps * x.train_batch * w;
  return e;
}

std::string_view to_string(PayloadKind k) noexcept {
  switch (k) {
    case PayloadKind::kModel: return "model";
    case PayloadKind::kSoftLabels: return "soft_labels";
    case PayloadKind::kDistilledData: return "distilled_data";
  }
  return "unknown";
}

void TransmissionLedger::record(const TransmissionEvent& e) {
  if (e.bits == 0) throw DomainError("ledger: events must carry a positive bit count");
  events_.push_back(e);
  total_ += e.bits;
}

Bits TransmissionLedger::bits_of(PayloadKind kind) const noexcept {
  Bits s = 0;
  for (const auto& e : events_) {
    if (e.kind == kind) s += e.bits;
  }
  return s;
}

Bits TransmissionLedger::bits_through_round(std::size_t round) const noexcept {
  Bits s = 0;
  for (const auto& e : events_) {
    if (e.round <= round) s += e.bits;
  }
  return s;
}

AuditReport ledger_audit(const TransmissionLedger& ledger, const CostModel& c, Algorithm a) {
  AuditReport r;
  r.algorithm = a;
  r.closed_form_bits = closed_form_cost(c, a);
  r.ledger_bits = ledger.total_bits();
  for (auto k : {PayloadKind::kModel, PayloadKind::kSoftLabels, PayloadKind::kDistilledData}) {
    r.by_kind[std::string(to_string(k))] = ledger.bits_of(k);
  }
  r.discrepancy_bits =
      static_cast<std::int64_t>(r.ledger_bits) - static_cast<std::int64_t>(r.closed_form_bits);
  r.relative_discrepancy =
      r.closed_form_bits == 0
          ? (r.ledger_bits == 0 ? 0.0 : 1.0)
          : static_cast<double>(r.discrepancy_bits) / static_cast<double>(r.closed_form_bits);
  return r;
}

AuditReport ledger_audit(const TransmissionLedger& ledger, const CostModel& c,
                         std::string_view algorithm) {
  return ledger_audit(ledger, c, parse_algorithm(algorithm));
}

std::string AuditReport::to_json() const {
  nlohmann::ordered_json j;
  j["algorithm"] = std::string(to_string(algorithm));
  j["closed_form_bits"] = closed_form_bits;
  j["ledger_bits"] = ledger_bits;
  j["by_kind"] = by_kind;
  j["megabytes_decimal"] = megabytes_decimal();
  j["discrepancy_bits"] = discrepancy_bits;
  return j.dump(2);
}

}  // namespace hfldd
