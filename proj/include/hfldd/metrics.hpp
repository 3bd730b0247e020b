// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hfldd {

enum class Algorithm { kHfldd, kFedAvg, kFedProx, kFedSeq };

std::string_view to_string(Algorithm a) noexcept;
/// Accepts "hfldd", "fedavg", "fedprox", "fedseq" (or "fedseq-lite"); throws DomainError otherwise.
Algorithm parse_algorithm(std::string_view name);

using Bits = std::uint64_t;

/// Inputs of the closed-form communication costs.
struct CostModel {
  std::uint64_t clients = 0;        // N
  std::uint64_t heads = 0;          // H
  std::uint64_t kmeans_k = 0;       // K
  std::uint64_t rounds = 0;         // T
  std::uint64_t fedseq_clusters = 0;      // O
  std::uint64_t fedseq_cluster_size = 0;  // J
  std::uint64_t model_size = 0;     // |ω|
  std::uint64_t probe_size = 0;     // |D_g|
  std::uint64_t classes = 0;        // N_c
  std::uint64_t bits_per_param = 32;    // B₁
  std::uint64_t bits_per_sample = 0;    // B₂
  /// |D̃ᵢ| for every non-head member.
  std::vector<std::uint64_t> distilled_sizes;
};

/// N·(2T−1)·|ω|·B₁
Bits cost_fedavg(const CostModel& c);
/// N·|D_g|·N_c·B₁ + Σ|D̃ᵢ|·B₂ + H·|ω|·(2T−1)·B₁
Bits cost_hfldd(const CostModel& c);
/// O·|ω|·B₁·((2T−1) + T·J)
Bits cost_fedseq(const CostModel& c);
/// Closed form matching the algorithm; FedProx costs the same as FedAvg.
Bits closed_form_cost(const CostModel& c, Algorithm a);

struct ConvergenceParams {
  double smoothness = 1.0;         // L
  double strong_convexity = 1.0;   // μ
  std::vector<double> sigma;       // σ_h, one per cluster head
  double grad_bound = 0.0;         // G
  double gamma_cluster = 0.0;
  double gamma_distill = 0.0;
  std::size_t local_steps = 1;     // E₂
  std::vector<double> weights;     // w_h, summing to 1
  double init_gap = 0.0;           // ‖ω⁰ − ω*‖²

  /// Throws DomainError when μ ≤ 0, L < μ, E₂ = 0, weights do not sum to 1, or sizes differ.
  void validate() const;
};

/// τ = max{8L/μ, E₂} − 1
double convergence_tau(const ConvergenceParams& p);
/// Q = Σ w_h²σ_h² + 6L(Γ_cluster + Γ_distill) + 8(E₂−1)²G²
double convergence_q(const ConvergenceParams& p);
/// (L/(t+τ))·(2Q/μ² + ((τ+1)/2)·‖ω⁰−ω*‖²)
double convergence_bound(const ConvergenceParams& p, double t);

struct ComplexityInputs {
  double kmeans_iters = 0;    // I
  double pretrain_steps = 0;  // E₁
  double pretrain_batch = 0;  // b₁
  double local_steps = 0;     // E₂
  double train_batch = 0;     // b₂
  double kip_iters = 0;       // R
};

/// Leading-order operation counts.
struct ComplexityEstimates {
  double server_similarity = 0;   // N²·|D_g|·N_c
  double server_kmeans = 0;       // I·K·N²
  double server_aggregation = 0;  // T·H·|ω|
  double member_pretrain = 0;     // E₁·b₁·|ω| + |D_g|·|ω|
  double member_distill = 0;      // R·max|D̃ᵢ|³
  double head_training = 0;       // T·E₂·b₂·|ω|
};

ComplexityEstimates complexity_estimates(const CostModel& c, const ComplexityInputs& extra);

enum class PayloadKind { kModel, kSoftLabels, kDistilledData };
std::string_view to_string(PayloadKind k) noexcept;

/// Endpoint id of the server in ledger events; clients use their index.
inline constexpr std::int64_t kServer = -1;

struct TransmissionEvent {
  std::size_t round = 0;  // 0 for pre-training stages
  std::int64_t sender = kServer;
  std::int64_t receiver = kServer;
  PayloadKind kind = PayloadKind::kModel;
  Bits bits = 0;
};

/// Append-only log of simulated transfers.
class TransmissionLedger {
 public:
  void record(const TransmissionEvent& e);
  void record(std::size_t round, std::int64_t sender, std::int64_t receiver, PayloadKind kind,
              Bits bits) {
    record(TransmissionEvent{round, sender, receiver, kind, bits});
  }

  const std::vector<TransmissionEvent>& events() const noexcept { return events_; }
  Bits total_bits() const noexcept { return total_; }
  Bits bits_of(PayloadKind kind) const noexcept;
  /// Bits of events whose round is ≤ `round`.
  Bits bits_through_round(std::size_t round) const noexcept;

 private:
  std::vector<TransmissionEvent> events_;
  Bits total_ = 0;
};

struct AuditReport {
  Algorithm algorithm = Algorithm::kFedAvg;
  Bits closed_form_bits = 0;
  Bits ledger_bits = 0;
  std::map<std::string, Bits> by_kind;
  /// ledger − closed form.
  std::int64_t discrepancy_bits = 0;
  double relative_discrepancy = 0.0;

  double megabytes_decimal() const noexcept { return static_cast<double>(ledger_bits) / 8e6; }
  /// {algorithm, closed_form_bits, ledger_bits, by_kind, megabytes_decimal, discrepancy_bits}
  std::string to_json() const;
};

AuditReport ledger_audit(const TransmissionLedger& ledger, const CostModel& c, Algorithm a);
AuditReport ledger_audit(const TransmissionLedger& ledger, const CostModel& c,
                         std::string_view algorithm);

}  // namespace hfldd
