// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hfldd/datagen.hpp"
#include "hfldd/distill.hpp"
#include "hfldd/metrics.hpp"
#include "hfldd/model.hpp"
#include "hfldd/topology.hpp"

namespace hfldd {

/// What E₂ counts: mini-batch steps, or passes over the participant's local data.
enum class LocalUnit { kSteps, kEpochs };

struct RunConfig {
  std::size_t rounds = 50;          // T
  std::size_t local_steps = 2;      // E₂
  LocalUnit local_unit = LocalUnit::kSteps;
  std::size_t pretrain_steps = 10;  // E₁
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  Algorithm algorithm = Algorithm::kHfldd;
  double prox_mu = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t kmeans_iters = 100;
  Bits bits_per_param = 32;
  /// Bits per distilled sample; 0 selects d × 64.
  Bits bits_per_sample = 0;

  void validate() const;
};

/// Local SGD steps one participant with `n` samples takes per round.
std::size_t local_step_count(const RunConfig& cfg, std::size_t n);

enum class ClientRole { kMember, kHead };

struct ClientState {
  ClientId id = 0;
  LabeledDataset data;
  std::optional<DistilledSet> distilled;
  ClientRole role = ClientRole::kMember;
};

/// Wraps per-client datasets as ClientStates with ids 0..n−1.
std::vector<ClientState> make_clients(std::vector<LabeledDataset> datasets);

struct RoundMetrics {
  std::size_t round = 0;
  double accuracy = 0.0;
  double loss = 0.0;
  Bits cumulative_bits = 0;

  friend bool operator==(const RoundMetrics&, const RoundMetrics&) = default;
};

struct RunResult {
  std::vector<RoundMetrics> metrics;
  TransmissionLedger ledger;
  MlpModel final_model;
  CostModel cost_model;
  std::optional<ClusterTopology> topology;
  /// Hybrid datasets of the cluster heads (HFLDD only), in cluster order.
  std::vector<LabeledDataset> head_datasets;
  /// Distilled set sizes keyed by member id (HFLDD only).
  std::vector<std::pair<ClientId, std::size_t>> distilled_sizes;
};

/// Random-stream purposes. Every (seed, purpose, client) triple owns one stream.
enum class StreamPurpose : std::uint64_t {
  kInit = 1,
  kPretrain = 2,
  kTrain = 3,
  kDistill = 4,
  kFedSeqGroups = 5,
  kTopology = 6,
};
std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t index = 0) noexcept;
SeededRng make_stream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index = 0);

/// The shared starting model ω⁰ for a given seed and architecture.
MlpModel initial_model(const RunConfig& cfg, std::size_t input_dim, std::size_t classes);

/// Parameter-wise weighted average; weights are normalized to sum to 1.
MlpModel aggregate(std::span<const MlpModel> models, std::span<const double> weights);

/// Head raw data followed by every member's distilled set.
LabeledDataset assemble_head_dataset(const ClientState& head,
                                     std::span<const DistilledSet> member_distilled);

/// One participant of server-coordinated training.
struct Participant {
  ClientId id = 0;
  const LabeledDataset* data = nullptr;
};

/// T rounds of broadcast, E₂ local steps (or epochs) per participant and aggregation weighted by
/// dataset size. Round 1 starts from `init` without a download (the initial model is
/// shared as a seed); every later round downloads, every round uploads. FedProx adds
/// the proximal term when cfg.prox_mu > 0.
RunResult train_federated(std::span<const Participant> participants, const MlpModel& init,
                          const LabeledDataset& test, const RunConfig& cfg,
                          TransmissionLedger ledger = {});

/// Stage 1: E₁ pretraining steps from ω⁰ and soft labels on the probe set, per client.
std::vector<DenseMatrix> collect_soft_labels(std::span<const ClientState> clients,
                                             const LabeledDataset& probe, const MlpModel& init,
                                             const RunConfig& cfg);

RunResult run_hfldd(std::span<const ClientState> clients, const LabeledDataset& probe,
                    const LabeledDataset& test, const RunConfig& cfg, const KipConfig& kip,
                    std::size_t k);

RunResult run_fedavg(std::span<const ClientState> clients, const LabeledDataset& test,
                     const RunConfig& cfg);

/// FedAvg with the proximal term prox_mu·(ω − ω_global) added to every local gradient.
RunResult run_fedprox(std::span<const ClientState> clients, const LabeledDataset& test,
                      const RunConfig& cfg);

/// Simplified FedSeq: O random groups of J clients; each round the model travels a ring
/// through its group (E₂ steps per client) and the O results are averaged.
RunResult run_fedseq_lite(std::span<const ClientState> clients, const LabeledDataset& test,
                          const RunConfig& cfg, std::size_t groups, std::size_t group_size);

}  // namespace hfldd
