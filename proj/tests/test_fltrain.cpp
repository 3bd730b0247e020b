// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "hfldd/errors.hpp"
#include "hfldd/fltrain.hpp"

using namespace hfldd;

namespace {

struct Bench {
  std::vector<ClientState> clients;
  LabeledDataset probe;
  LabeledDataset test;
};

Bench make_bench(std::size_t n_clients, std::size_t c, std::uint64_t seed,
                 std::size_t per_client = 40) {
  constexpr std::size_t kClasses = 4;
  SeededRng rng(seed, 77);
  auto pool = synth_gaussian_classes(kClasses, n_clients * per_client / kClasses + 60, 6, 4.0, rng);
  auto [train, test] = train_test_split(pool, 0.2, rng);
  Bench b;
  b.probe = make_probe_dataset(train, 40, rng);
  b.test = std::move(test);
  b.clients = make_clients(
      partition_label_skew(train, PartitionSpec{n_clients, c, kClasses, per_client, seed}));
  return b;
}

RunConfig small_config(std::uint64_t seed = 3) {
  RunConfig cfg;
  cfg.rounds = 4;
  cfg.local_steps = 2;
  cfg.pretrain_steps = 5;
  cfg.batch_size = 8;
  cfg.hidden = {10};
  cfg.seed = seed;
  cfg.kmeans_iters = 30;
  return cfg;
}

KipConfig small_kip() {
  KipConfig k;
  k.support_size = 4;
  k.iterations = 10;
  k.target_batch = 8;
  k.lambda = 1e-3;
  return k;
}

std::vector<double> flatten(const MlpModel& m) {
  std::vector<double> out;
  for (std::size_t l = 0; l < m.params().weights.size(); ++l) {
    const auto& w = m.params().weights[l].data();
    out.insert(out.end(), w.begin(), w.end());
    out.insert(out.end(), m.params().biases[l].begin(), m.params().biases[l].end());
  }
  return out;
}

double distance(const MlpModel& a, const MlpModel& b) {
  auto x = flatten(a);
  auto y = flatten(b);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

MlpModel scalar_model(double w) {
  MlpModel m({1, 1});
  m.params().weights[0](0, 0) = w;
  return m;
}

}  // namespace

TEST_CASE("aggregate") {
  SeededRng rng(1);
  const auto a = MlpModel::glorot({3, 4, 2}, rng);
  const auto b = MlpModel::glorot({3, 4, 2}, rng);
  const auto c = MlpModel::glorot({3, 4, 2}, rng);

  SUBCASE("identical models reproduce the model exactly") {
    std::vector<MlpModel> ms{a, a, a};
    std::vector<double> ws{0.1, 2.0, 7.5};
    CHECK(flatten(aggregate(ms, ws)) == flatten(a));
    std::vector<MlpModel> one{a};
    std::vector<double> w1{1.0};
    CHECK(flatten(aggregate(one, w1)) == flatten(a));
  }
  SUBCASE("hand arithmetic") {
    std::vector<MlpModel> ms{scalar_model(1.0), scalar_model(3.0)};
    std::vector<double> ws{0.25, 0.75};
    CHECK(aggregate(ms, ws).params().weights[0](0, 0) == 2.5);
    std::vector<double> unnormalized{1.0, 3.0};
    CHECK(aggregate(ms, unnormalized).params().weights[0](0, 0) == 2.5);
  }
  SUBCASE("joint permutation") {
    std::vector<MlpModel> ms{a, b, c};
    std::vector<double> ws{0.2, 0.3, 0.5};
    std::vector<MlpModel> ps{c, a, b};
    std::vector<double> pw{0.5, 0.2, 0.3};
    auto x = flatten(aggregate(ms, ws));
    auto y = flatten(aggregate(ps, pw));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(x[i] - y[i]) <= 1e-15);
  }
  SUBCASE("errors") {
    std::vector<MlpModel> mixed{a, MlpModel({3, 5, 2})};
    std::vector<double> ws{1.0, 1.0};
    CHECK_THROWS_AS(aggregate(mixed, ws), ShapeError);
    std::vector<MlpModel> two{a, b};
    std::vector<double> zero{0.0, 0.0};
    CHECK_THROWS_AS(aggregate(two, zero), DomainError);
    CHECK_THROWS_AS(aggregate({}, {}), EmptyInputError);
  }
}

TEST_CASE("assemble_head_dataset") {
  SeededRng rng(2);
  ClientState head{0, synth_gaussian_classes(3, 10, 4, 3.0, rng), std::nullopt, ClientRole::kHead};
  CHECK(assemble_head_dataset(head, {}) == head.data);

  auto member_set = [&](std::size_t rows) {
    auto d = synth_gaussian_classes(3, rows, 4, 3.0, rng);
    auto idx = std::vector<std::size_t>(rows);
    std::iota(idx.begin(), idx.end(), 0);
    auto s = d.subset(idx);
    return DistilledSet{s.features, s.labels, 0.0, {}};
  };
  std::vector<DistilledSet> members{member_set(20), member_set(20)};
  auto hybrid = assemble_head_dataset(head, members);
  CHECK(hybrid.size() == 70);
  CHECK(hybrid.features(30, 0) == members[0].features(0, 0));

  members.push_back(DistilledSet{DenseMatrix(2, 5), DenseMatrix(2, 3), 0.0, {}});
  try {
    assemble_head_dataset(head, members);
    FAIL("expected shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("member 2") != std::string::npos);
  }
}

TEST_CASE("hybrid dataset of single-class clients covers every class") {
  auto b = make_bench(4, 1, 5);
  std::vector<std::size_t> first_of_class(4, b.clients.size());
  for (const auto& c : b.clients) {
    const auto cls = c.data.hard_labels()[0];
    if (first_of_class[cls] == b.clients.size()) first_of_class[cls] = c.id;
  }
  REQUIRE(std::count(first_of_class.begin(), first_of_class.end(), b.clients.size()) == 0);
  std::vector<DistilledSet> received;
  for (std::size_t cls = 1; cls < 4; ++cls) {
    const auto& d = b.clients[first_of_class[cls]].data;
    received.push_back(distill(d, small_kip(), default_rbf_gamma(d.features)));
  }
  auto hybrid = assemble_head_dataset(b.clients[first_of_class[0]], received);
  for (auto count : hybrid.class_histogram()) CHECK(count > 0);
}

TEST_CASE("ledger totals equal the closed forms") {
  auto b = make_bench(8, 2, 11);
  const auto cfg = small_config();

  auto avg = run_fedavg(b.clients, b.test, cfg);
  CHECK(avg.ledger.total_bits() == cost_fedavg(avg.cost_model));
  CHECK(ledger_audit(avg.ledger, avg.cost_model, Algorithm::kFedAvg).discrepancy_bits == 0);

  auto prox_cfg = cfg;
  prox_cfg.prox_mu = 0.1;
  auto prox = run_fedprox(b.clients, b.test, prox_cfg);
  CHECK(ledger_audit(prox.ledger, prox.cost_model, Algorithm::kFedProx).discrepancy_bits == 0);

  auto seq = run_fedseq_lite(b.clients, b.test, cfg, 2, 4);
  CHECK(seq.ledger.total_bits() == cost_fedseq(seq.cost_model));
  const Bits per_round = seq.metrics[1].cumulative_bits - seq.metrics[0].cumulative_bits;
  CHECK(per_round == 2 * seq.cost_model.model_size * 32 * (2 + 4));
  CHECK(seq.metrics[0].cumulative_bits == 2 * seq.cost_model.model_size * 32 * (1 + 4));

  auto h = run_hfldd(b.clients, b.probe, b.test, cfg, small_kip(), 2);
  CHECK(h.ledger.total_bits() == cost_hfldd(h.cost_model));
  CHECK(ledger_audit(h.ledger, h.cost_model, Algorithm::kHfldd).discrepancy_bits == 0);
  CHECK(h.cost_model.distilled_sizes.size() == b.clients.size() - h.topology->heads.size());

  SUBCASE("omitting one member from the cost model") {
    auto c = h.cost_model;
    const auto dropped = c.distilled_sizes.back();
    c.distilled_sizes.pop_back();
    auto report = ledger_audit(h.ledger, c, Algorithm::kHfldd);
    CHECK(report.discrepancy_bits == static_cast<std::int64_t>(dropped * c.bits_per_sample));
  }
  SUBCASE("cumulative bits strictly increase") {
    for (const auto* r : {&avg, &prox, &seq, &h}) {
      for (std::size_t i = 1; i < r->metrics.size(); ++i) {
        CHECK(r->metrics[i].cumulative_bits > r->metrics[i - 1].cumulative_bits);
      }
    }
  }
}

TEST_CASE("fixed seeds give bit-identical runs") {
  auto b = make_bench(6, 2, 12);
  const auto cfg = small_config(9);
  CHECK(run_fedavg(b.clients, b.test, cfg).metrics == run_fedavg(b.clients, b.test, cfg).metrics);
  auto p = cfg;
  p.prox_mu = 0.5;
  CHECK(run_fedprox(b.clients, b.test, p).metrics == run_fedprox(b.clients, b.test, p).metrics);
  CHECK(run_fedseq_lite(b.clients, b.test, cfg, 3, 2).metrics ==
        run_fedseq_lite(b.clients, b.test, cfg, 3, 2).metrics);
  auto h1 = run_hfldd(b.clients, b.probe, b.test, cfg, small_kip(), 2);
  auto h2 = run_hfldd(b.clients, b.probe, b.test, cfg, small_kip(), 2);
  CHECK(h1.metrics == h2.metrics);
  CHECK(flatten(h1.final_model) == flatten(h2.final_model));
  CHECK(h1.topology->to_json() == h2.topology->to_json());
}

TEST_CASE("FedProx reductions") {
  auto b = make_bench(6, 2, 13);
  auto cfg = small_config();
  auto avg = run_fedavg(b.clients, b.test, cfg);
  auto prox0 = run_fedprox(b.clients, b.test, cfg);
  CHECK(avg.metrics == prox0.metrics);
  CHECK(flatten(avg.final_model) == flatten(prox0.final_model));

  cfg.rounds = 1;
  cfg.prox_mu = 1e6;
  auto pinned = run_fedprox(b.clients, b.test, cfg);
  CHECK(distance(pinned.final_model, initial_model(cfg, 6, 4)) <= 1e-3);
}

TEST_CASE("FedSeq-lite reductions and errors") {
  auto b = make_bench(6, 2, 14);
  const auto cfg = small_config();
  auto seq = run_fedseq_lite(b.clients, b.test, cfg, 6, 1);
  auto avg = run_fedavg(b.clients, b.test, cfg);
  CHECK(flatten(seq.final_model) == flatten(avg.final_model));
  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    CHECK(seq.metrics[t].accuracy == avg.metrics[t].accuracy);
    CHECK(seq.metrics[t].loss == avg.metrics[t].loss);
  }
  CHECK_THROWS_AS(run_fedseq_lite(b.clients, b.test, cfg, 4, 2), CapacityError);
}

TEST_CASE("FedAvg with one client is local training") {
  auto b = make_bench(1, 4, 15, 80);
  const auto cfg = small_config();
  auto r = run_fedavg(b.clients, b.test, cfg);
  MlpModel m = initial_model(cfg, 6, 4);
  SeededRng rng = make_stream(cfg.seed, StreamPurpose::kTrain, 0);
  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    m = local_train(m, b.clients[0].data, SgdConfig{cfg.learning_rate, cfg.batch_size, cfg.local_steps}, rng);
  }
  CHECK(flatten(r.final_model) == flatten(m));
}

TEST_CASE("HFLDD degenerate topology and stage-4 reduction") {
  auto b = make_bench(5, 1, 16);
  auto cfg = small_config();

  SUBCASE("k = N gives one cluster holding every client") {
    cfg.rounds = 1;
    auto h = run_hfldd(b.clients, b.probe, b.test, cfg, small_kip(), 5);
    REQUIRE(h.topology->heads.size() == 1);
    CHECK(h.topology->heterogeneous[0].size() == 5);
    const ClientId head = h.topology->heads[0];
    CHECK(h.head_datasets[0].size() == b.clients[head].data.size() + 4 * small_kip().support_size);
    SeededRng rng = make_stream(cfg.seed, StreamPurpose::kTrain, head);
    auto central = local_train(initial_model(cfg, 6, 4), h.head_datasets[0],
                               SgdConfig{cfg.learning_rate, cfg.batch_size, cfg.local_steps}, rng);
    CHECK(flatten(h.final_model) == flatten(central));
  }
  SUBCASE("stage 4 is federated averaging over the head datasets") {
    auto h = run_hfldd(b.clients, b.probe, b.test, cfg, small_kip(), 2);
    std::vector<Participant> parts;
    for (std::size_t i = 0; i < h.topology->heads.size(); ++i) {
      parts.push_back({h.topology->heads[i], &h.head_datasets[i]});
    }
    auto direct = train_federated(parts, initial_model(cfg, 6, 4), b.test, cfg);
    CHECK(flatten(direct.final_model) == flatten(h.final_model));
    for (std::size_t t = 0; t < cfg.rounds; ++t) {
      CHECK(direct.metrics[t].accuracy == h.metrics[t].accuracy);
      CHECK(direct.metrics[t].loss == h.metrics[t].loss);
    }
  }
  SUBCASE("stage errors carry the stage tag") {
    try {
      run_hfldd(b.clients, b.probe, b.test, cfg, small_kip(), 6);
      FAIL("expected stage error");
    } catch (const StageError& e) {
      CHECK(e.stage() == "clustering");
    }
    auto big = small_kip();
    big.support_size = 1000;
    try {
      run_hfldd(b.clients, b.probe, b.test, cfg, big, 2);
      FAIL("expected stage error");
    } catch (const StageError& e) {
      CHECK(e.stage() == "dataset-generation");
    }
  }
}

TEST_CASE("IID FedAvg tracks centralized training") {
  auto b = make_bench(8, 4, 17, 60);
  auto cfg = small_config();
  cfg.rounds = 30;
  auto avg = run_fedavg(b.clients, b.test, cfg);

  LabeledDataset all = b.clients[0].data;
  for (std::size_t i = 1; i < b.clients.size(); ++i) all = concat(all, b.clients[i].data);
  SeededRng rng(99);
  auto central = local_train(initial_model(cfg, 6, 4), all,
                             SgdConfig{cfg.learning_rate, cfg.batch_size * b.clients.size(),
                                       cfg.rounds * cfg.local_steps},
                             rng);
  CHECK(std::abs(avg.metrics.back().accuracy - accuracy(central, b.test)) <= 0.02);
}

TEST_CASE("head-weighted global loss is non-increasing at a small learning rate") {
  int monotone = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SeededRng rng(seed, 31);
    auto g = make_gaussian_classes(10, 20, 0.25, rng);
    g.sigma = 0.0625;
    auto pool = sample_gaussian_classes(g, 450, rng);
    auto probe = make_probe_dataset(pool, 200, rng);
    auto test = sample_gaussian_classes(g, 20, rng);
    auto clients = make_clients(partition_label_skew(pool, PartitionSpec{20, 1, 10, 200, seed}));
    RunConfig cfg;
    cfg.rounds = 10;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 4;
    cfg.local_unit = LocalUnit::kEpochs;
    cfg.seed = seed;
    KipConfig kip;
    kip.iterations = 50;
    auto r = run_hfldd(clients, probe, test, cfg, kip, 10);
    bool ok = true;
    for (std::size_t t = 1; t < r.metrics.size(); ++t) ok = ok && r.metrics[t].loss <= r.metrics[t - 1].loss;
    monotone += ok;
  }
  CHECK(monotone >= 18);
}
