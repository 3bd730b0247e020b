// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#include "hfldd/fltrain.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace hfldd {

void RunConfig::validate() const {
  if (rounds < 1) throw DomainError("RunConfig: rounds must be >= 1");
  if (local_steps < 1) throw DomainError("RunConfig: local steps must be >= 1");
  if (!(learning_rate > 0.0)) throw DomainError("RunConfig: learning rate must be positive");
  if (batch_size < 1) throw DomainError("RunConfig: batch size must be >= 1");
  if (prox_mu < 0.0) throw DomainError("RunConfig: prox mu must be non-negative");
  if (bits_per_param < 1) throw DomainError("RunConfig: bits per parameter must be >= 1");
  for (auto h : hidden) {
    if (h == 0) throw DomainError("RunConfig: hidden layer sizes must be positive");
  }
}

std::vector<ClientState> make_clients(std::vector<LabeledDataset> datasets) {
  std::vector<ClientState> out;
  out.reserve(datasets.size());
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    out.push_back(ClientState{i, std::move(datasets[i]), std::nullopt, ClientRole::kMember});
  }
  return out;
}

std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t index) noexcept {
  return (static_cast<std::uint64_t>(purpose) << 40) | index;
}

SeededRng make_stream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index) {
  return SeededRng(seed, stream_id(purpose, index));
}

std::size_t local_step_count(const RunConfig& cfg, std::size_t n) {
  if (cfg.local_unit == LocalUnit::kSteps) return cfg.local_steps;
  return cfg.local_steps * ((n + cfg.batch_size - 1) / cfg.batch_size);
}

MlpModel initial_model(const RunConfig& cfg, std::size_t input_dim, std::size_t classes) {
  std::vector<std::size_t> sizes{input_dim};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(classes);
  SeededRng rng = make_stream(cfg.seed, StreamPurpose::kInit);
  return MlpModel::glorot(std::move(sizes), rng);
}

MlpModel aggregate(std::span<const MlpModel> models, std::span<const double> weights) {
  if (models.empty()) throw EmptyInputError("aggregate: no models");
  if (models.size() != weights.size()) throw ShapeError("aggregate: one weight per model required");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("aggregate: weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("aggregate: weights sum to zero");
  for (const auto& m : models) {
    if (m.layer_sizes() != models[0].layer_sizes()) {
      throw ShapeError("aggregate: architecture mismatch");
    }
  }
  // ω = ω₀ + Σ wᵢ (ωᵢ − ω₀): identical inputs reproduce ω₀ bit-for-bit.
  MlpModel out = models[0];
  auto& p = out.params();
  const auto& base = models[0].params();
  for (std::size_t i = 1; i < models.size(); ++i) {
    const double w = weights[i] / total;
    if (w == 0.0) continue;
    const auto& q = models[i].params();
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      auto& dst = p.weights[l].data();
      const auto& src = q.weights[l].data();
      const auto& b0 = base.weights[l].data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += w * (src[j] - b0[j]);
      for (std::size_t j = 0; j < p.biases[l].size(); ++j) {
        p.biases[l][j] += w * (q.biases[l][j] - base.biases[l][j]);
      }
    }
  }
  return out;
}

LabeledDataset assemble_head_dataset(const ClientState& head,
                                     std::span<const DistilledSet> member_distilled) {
  LabeledDataset out = head.data;
  for (std::size_t m = 0; m < member_distilled.size(); ++m) {
    const auto& s = member_distilled[m];
    if (s.features.cols() != out.dim() || s.labels.cols() != out.class_count) {
      throw ShapeError("assemble_head_dataset: distilled set of member " + std::to_string(m) +
                       " has d=" + std::to_string(s.features.cols()) + ", classes=" +
                       std::to_string(s.labels.cols()) + "; head has d=" +
                       std::to_string(out.dim()) + ", classes=" + std::to_string(out.class_count));
    }
    out = concat(out, s.as_dataset());
  }
  return out;
}

namespace {

Bits model_bits(const MlpModel& m, const RunConfig& cfg) {
  return static_cast<Bits>(m.parameter_count()) * cfg.bits_per_param;
}

SgdConfig local_sgd(const RunConfig& cfg, std::size_t steps) {
  return SgdConfig{cfg.learning_rate, cfg.batch_size, steps};
}

double weighted_loss(const MlpModel& m, std::span<const Participant> parts,
                     std::span<const double> weights) {
  double total = 0.0;
  double wsum = 0.0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    total += weights[i] * cross_entropy(m, parts[i].data->features, parts[i].data->labels);
    wsum += weights[i];
  }
  return total / wsum;
}

void check_clients(std::span<const ClientState> clients) {
  if (clients.empty()) throw EmptyInputError("no clients");
  for (std::size_t i = 0; i < clients.size(); ++i) {
    if (clients[i].id != i) throw DomainError("client ids must be 0..N-1 in order");
    if (clients[i].data.empty()) {
      throw EmptyInputError("client " + std::to_string(i) + " has no data");
    }
  }
}

std::vector<Participant> participants_of(std::span<const ClientState> clients) {
  std::vector<Participant> parts;
  for (const auto& c : clients) parts.push_back({c.id, &c.data});
  return parts;
}

void fill_common_cost(CostModel& c, const RunConfig& cfg, const MlpModel& m, std::size_t n) {
  c.clients = n;
  c.rounds = cfg.rounds;
  c.model_size = m.parameter_count();
  c.classes = m.output_dim();
  c.bits_per_param = cfg.bits_per_param;
}

template <typename F>
auto in_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

RunResult train_federated(std::span<const Participant> participants, const MlpModel& init,
                          const LabeledDataset& test, const RunConfig& cfg,
                          TransmissionLedger ledger) {
  cfg.validate();
  if (participants.empty()) throw EmptyInputError("train_federated: no participants");
  std::vector<SeededRng> rngs;
  std::vector<double> weights;
  for (const auto& p : participants) {
    if (p.data == nullptr || p.data->empty()) {
      throw EmptyInputError("train_federated: participant " + std::to_string(p.id) + " has no data");
    }
    rngs.push_back(make_stream(cfg.seed, StreamPurpose::kTrain, p.id));
    weights.push_back(static_cast<double>(p.data->size()));
  }

  RunResult r;
  r.ledger = std::move(ledger);
  const Bits bits = model_bits(init, cfg);
  MlpModel global = init;
  std::vector<MlpModel> locals(participants.size());
  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    for (std::size_t i = 0; i < participants.size(); ++i) {
      const auto id = static_cast<std::int64_t>(participants[i].id);
      if (t > 1) r.ledger.record(t, kServer, id, PayloadKind::kModel, bits);
      std::optional<ProximalTerm> prox;
      if (cfg.prox_mu > 0.0) prox = ProximalTerm{&global, cfg.prox_mu};
      const auto& data = *participants[i].data;
      locals[i] = local_train(global, data, local_sgd(cfg, local_step_count(cfg, data.size())),
                              rngs[i], prox);
      r.ledger.record(t, id, kServer, PayloadKind::kModel, bits);
    }
    global = aggregate(locals, weights);
    r.metrics.push_back(RoundMetrics{t, accuracy(global, test),
                                     weighted_loss(global, participants, weights),
                                     r.ledger.total_bits()});
  }
  r.final_model = std::move(global);
  return r;
}

std::vector<DenseMatrix> collect_soft_labels(std::span<const ClientState> clients,
                                             const LabeledDataset& probe, const MlpModel& init,
                                             const RunConfig& cfg) {
  std::vector<DenseMatrix> out;
  out.reserve(clients.size());
  const SgdConfig sgd = local_sgd(cfg, cfg.pretrain_steps);
  for (const auto& c : clients) {
    SeededRng rng = make_stream(cfg.seed, StreamPurpose::kPretrain, c.id);
    const MlpModel local = local_train(init, c.data, sgd, rng);
    out.push_back(soft_labels(local, probe));
  }
  return out;
}

RunResult run_hfldd(std::span<const ClientState> clients, const LabeledDataset& probe,
                    const LabeledDataset& test, const RunConfig& cfg, const KipConfig& kip,
                    std::size_t k) {
  cfg.validate();
  check_clients(clients);
  if (clients.size() < 2) throw CapacityError("run_hfldd: need at least two clients");
  const std::size_t n = clients.size();
  const std::size_t dim = clients[0].data.dim();
  const std::size_t classes = clients[0].data.class_count;
  if (probe.dim() != dim || test.dim() != dim) {
    throw ShapeError("run_hfldd: probe/test feature dimension differs from client data");
  }
  const MlpModel init = initial_model(cfg, dim, classes);
  const Bits b2 = cfg.bits_per_sample ? cfg.bits_per_sample : static_cast<Bits>(dim) * 64;

  TransmissionLedger ledger;

  // Stage 1: label knowledge collection.
  const auto soft = in_stage("label-knowledge-collection", [&] {
    auto s = collect_soft_labels(clients, probe, init, cfg);
    const Bits soft_bits = static_cast<Bits>(probe.size()) * classes * cfg.bits_per_param;
    for (const auto& c : clients) {
      ledger.record(0, static_cast<std::int64_t>(c.id), kServer, PayloadKind::kSoftLabels, soft_bits);
    }
    return s;
  });

  // Stage 2: heterogeneous client clustering.
  const ClusterTopology topo = in_stage("clustering", [&] {
    return build_topology(soft, k, make_stream(cfg.seed, StreamPurpose::kTopology).next_u64(),
                          cfg.kmeans_iters);
  });

  // Stage 3: IID dataset generation at the heads.
  RunResult r;
  in_stage("dataset-generation", [&] {
    for (std::size_t h = 0; h < topo.heterogeneous.size(); ++h) {
      const ClientId head = topo.heads[h];
      std::vector<DistilledSet> received;
      for (ClientId member : topo.heterogeneous[h]) {
        if (member == head) continue;
        const auto& data = clients[member].data;
        KipConfig member_kip = kip;
        member_kip.seed = make_stream(cfg.seed ^ kip.seed, StreamPurpose::kDistill, member).next_u64();
        DistilledSet s = distill(data, member_kip, default_rbf_gamma(data.features));
        ledger.record(0, static_cast<std::int64_t>(member), static_cast<std::int64_t>(head),
                      PayloadKind::kDistilledData, static_cast<Bits>(s.size()) * b2);
        r.distilled_sizes.emplace_back(member, s.size());
        received.push_back(std::move(s));
      }
      r.head_datasets.push_back(assemble_head_dataset(clients[head], received));
    }
    return 0;
  });

  // Stage 4: model training between the server and the heads.
  std::vector<Participant> heads;
  for (std::size_t h = 0; h < topo.heads.size(); ++h) {
    heads.push_back({topo.heads[h], &r.head_datasets[h]});
  }
  RunResult trained = in_stage("model-training", [&] {
    return train_federated(heads, init, test, cfg, std::move(ledger));
  });

  r.metrics = std::move(trained.metrics);
  r.ledger = std::move(trained.ledger);
  r.final_model = std::move(trained.final_model);
  fill_common_cost(r.cost_model, cfg, init, n);
  r.cost_model.heads = topo.heads.size();
  r.cost_model.kmeans_k = k;
  r.cost_model.probe_size = probe.size();
  r.cost_model.bits_per_sample = b2;
  for (const auto& [id, size] : r.distilled_sizes) r.cost_model.distilled_sizes.push_back(size);
  r.topology = topo;
  return r;
}

RunResult run_fedavg(std::span<const ClientState> clients, const LabeledDataset& test,
                     const RunConfig& cfg) {
  cfg.validate();
  check_clients(clients);
  const MlpModel init = initial_model(cfg, clients[0].data.dim(), clients[0].data.class_count);
  RunConfig plain = cfg;
  plain.prox_mu = 0.0;
  const auto parts = participants_of(clients);
  RunResult r = in_stage("model-training", [&] { return train_federated(parts, init, test, plain); });
  fill_common_cost(r.cost_model, cfg, init, clients.size());
  return r;
}

RunResult run_fedprox(std::span<const ClientState> clients, const LabeledDataset& test,
                      const RunConfig& cfg) {
  cfg.validate();
  check_clients(clients);
  const MlpModel init = initial_model(cfg, clients[0].data.dim(), clients[0].data.class_count);
  const auto parts = participants_of(clients);
  RunResult r = in_stage("model-training", [&] { return train_federated(parts, init, test, cfg); });
  fill_common_cost(r.cost_model, cfg, init, clients.size());
  return r;
}

RunResult run_fedseq_lite(std::span<const ClientState> clients, const LabeledDataset& test,
                          const RunConfig& cfg, std::size_t groups, std::size_t group_size) {
  cfg.validate();
  check_clients(clients);
  const std::size_t n = clients.size();
  if (groups == 0 || group_size == 0 || groups * group_size != n) {
    throw CapacityError("run_fedseq_lite: " + std::to_string(groups) + " groups of " +
                        std::to_string(group_size) + " do not cover " + std::to_string(n) +
                        " clients");
  }
  const MlpModel init = initial_model(cfg, clients[0].data.dim(), clients[0].data.class_count);

  // Groups are drawn once; the ring order inside a group is the draw order.
  SeededRng group_rng = make_stream(cfg.seed, StreamPurpose::kFedSeqGroups);
  const auto perm = group_rng.permutation(n);
  std::vector<ClientGroup> rings(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    rings[g].assign(perm.begin() + static_cast<std::ptrdiff_t>(g * group_size),
                    perm.begin() + static_cast<std::ptrdiff_t>((g + 1) * group_size));
  }
  std::sort(rings.begin(), rings.end(), [](const ClientGroup& a, const ClientGroup& b) {
    return *std::min_element(a.begin(), a.end()) < *std::min_element(b.begin(), b.end());
  });

  std::vector<SeededRng> rngs;
  for (const auto& c : clients) rngs.push_back(make_stream(cfg.seed, StreamPurpose::kTrain, c.id));
  std::vector<double> ring_weights;
  for (const auto& ring : rings) {
    double w = 0.0;
    for (auto id : ring) w += static_cast<double>(clients[id].data.size());
    ring_weights.push_back(w);
  }
  const auto parts = participants_of(clients);
  std::vector<double> client_weights;
  for (const auto& c : clients) client_weights.push_back(static_cast<double>(c.data.size()));

  RunResult r;
  const Bits bits = model_bits(init, cfg);
  MlpModel global = init;
  std::vector<MlpModel> locals(groups);
  in_stage("model-training", [&] {
    for (std::size_t t = 1; t <= cfg.rounds; ++t) {
      for (std::size_t g = 0; g < groups; ++g) {
        const auto& ring = rings[g];
        const auto entry = static_cast<std::int64_t>(ring.front());
        if (t > 1) r.ledger.record(t, kServer, entry, PayloadKind::kModel, bits);
        MlpModel m = global;
        for (std::size_t j = 0; j < ring.size(); ++j) {
          const auto& data = clients[ring[j]].data;
          m = local_train(m, data, local_sgd(cfg, local_step_count(cfg, data.size())), rngs[ring[j]]);
          // Hand the model to the next client; the last pass closes the ring at the entry.
          r.ledger.record(t, static_cast<std::int64_t>(ring[j]),
                          static_cast<std::int64_t>(ring[(j + 1) % ring.size()]),
                          PayloadKind::kModel, bits);
        }
        r.ledger.record(t, entry, kServer, PayloadKind::kModel, bits);
        locals[g] = std::move(m);
      }
      global = aggregate(locals, ring_weights);
      r.metrics.push_back(RoundMetrics{t, accuracy(global, test),
                                       weighted_loss(global, parts, client_weights),
                                       r.ledger.total_bits()});
    }
    return 0;
  });
  r.final_model = std::move(global);
  fill_common_cost(r.cost_model, cfg, init, n);
  r.cost_model.fedseq_clusters = groups;
  r.cost_model.fedseq_cluster_size = group_size;
  return r;
}

}  // namespace hfldd
