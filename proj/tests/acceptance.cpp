// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.
//
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "experiment.hpp"
#include "hfldd/errors.hpp"
#include "test_support.hpp"

using namespace hfldd;
using namespace hfldd::cli;
using hfldd::testing::random_matrix;
using hfldd::testing::random_stochastic;
using hfldd::testing::rel_err;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

constexpr int kSeeds = 5;

ExperimentConfig benchmark(std::size_t classes_per_client, Algorithm a, std::uint64_t seed) {
  ExperimentConfig c;
  c.partition.classes_per_client = classes_per_client;
  c.run.algorithm = a;
  c.seed = c.run.seed = c.partition.seed = seed;
  return c;
}

struct Paired {
  std::vector<double> hfldd, fedavg;
  double mean_gap() const {
    double s = 0.0;
    for (std::size_t i = 0; i < hfldd.size(); ++i) s += hfldd[i] - fedavg[i];
    return s / static_cast<double>(hfldd.size());
  }
};

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Paired paired_runs(std::size_t c, std::vector<RunResult>* fedavg_runs = nullptr) {
  Paired p;
  for (int s = 0; s < kSeeds; ++s) {
    const auto hf = benchmark(c, Algorithm::kHfldd, static_cast<std::uint64_t>(s));
    const auto av = benchmark(c, Algorithm::kFedAvg, static_cast<std::uint64_t>(s));
    const auto data = prepare_data(hf);
    p.hfldd.push_back(run_experiment(hf, data).metrics.back().accuracy);
    auto r = run_experiment(av, data);
    p.fedavg.push_back(r.metrics.back().accuracy);
    if (fedavg_runs) fedavg_runs->push_back(std::move(r));
  }
  return p;
}

std::string per_seed(const Paired& p) {
  std::string out;
  for (std::size_t i = 0; i < p.hfldd.size(); ++i) {
    out += (i ? " " : "") + fmt("%.3f", p.hfldd[i]) + "/" + fmt("%.3f", p.fedavg[i]);
  }
  return out;
}

std::vector<RunResult> c1_fedavg_runs;

Outcome skew_benefit() {
  const auto t0 = Clock::now();
  const Paired p = paired_runs(1, &c1_fedavg_runs);
  const double wall = seconds_since(t0);
  const double gap = p.mean_gap();
  return {gap >= 0.15 && wall <= 600.0,
          "C=1 mean hfldd " + fmt("%.4f", mean(p.hfldd)) + " vs fedavg " + fmt("%.4f", mean(p.fedavg)) +
              ", gap " + fmt("%+.4f", gap) + " (need >= +0.15); per seed hfldd/fedavg " + per_seed(p) +
              "; " + fmt("%.1f", wall) + " s (limit 600 s)"};
}

Outcome iid_parity() {
  const Paired p = paired_runs(10);
  const double gap = p.mean_gap();
  return {std::abs(gap) <= 0.05, "C=10 mean hfldd " + fmt("%.4f", mean(p.hfldd)) + " vs fedavg " +
                                     fmt("%.4f", mean(p.fedavg)) + ", gap " + fmt("%+.4f", gap) +
                                     " (need |gap| <= 0.05); per seed " + per_seed(p)};
}

Outcome cost_formula() {
  CostModel paper;
  paper.clients = 100;
  paper.rounds = 17;
  paper.model_size = 44426;
  paper.bits_per_param = 32;
  const double mb = static_cast<double>(cost_fedavg(paper)) / 8e6;
  const double rel = std::abs(mb - 593.15) / 593.15;
  bool exact = !c1_fedavg_runs.empty();
  for (const auto& r : c1_fedavg_runs) exact = exact && r.ledger.total_bits() == cost_fedavg(r.cost_model);
  return {rel <= 0.05 && exact, "paper FedAvg " + fmt("%.2f", mb) + " MB vs 593.15 MB (" +
                                    fmt("%.2f", rel * 100) + "% off, limit 5%); ledger == closed form in " +
                                    std::to_string(c1_fedavg_runs.size()) + " desk-scale runs: " +
                                    (exact ? "yes" : "no")};
}

Outcome cost_dominance() {
  bool all = true;
  std::string detail;
  for (int s = 0; s < kSeeds; ++s) {
    const auto hf = benchmark(2, Algorithm::kHfldd, static_cast<std::uint64_t>(s));
    const auto av = benchmark(2, Algorithm::kFedAvg, static_cast<std::uint64_t>(s));
    const auto data = prepare_data(hf);
    const auto rh = run_experiment(hf, data);
    const auto ra = run_experiment(av, data);
    auto best = [](const RunResult& r) {
      double b = 0.0;
      for (const auto& m : r.metrics) b = std::max(b, m.accuracy);
      return b;
    };
    const double target = std::min(best(rh), best(ra));
    auto bits_to = [&](const RunResult& r) {
      for (const auto& m : r.metrics) {
        if (m.accuracy >= target) return m.cumulative_bits;
      }
      return Bits{0};
    };
    const Bits bh = bits_to(rh);
    const Bits ba = bits_to(ra);
    all = all && bh < ba;
    detail += (s ? "; " : "") + std::string("seed ") + std::to_string(s) + " target " + fmt("%.3f", target) +
              ": hfldd " + fmt("%.2f", static_cast<double>(bh) / 8e6) + " MB vs fedavg " +
              fmt("%.2f", static_cast<double>(ba) / 8e6) + " MB";
  }
  return {all, "C=2 bits to the best accuracy both reach, every seed: " + detail};
}

std::vector<double> flatten(const ParameterSet& p) {
  std::vector<double> out;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    out.insert(out.end(), p.weights[l].data().begin(), p.weights[l].data().end());
    out.insert(out.end(), p.biases[l].begin(), p.biases[l].end());
  }
  return out;
}

std::vector<double> mlp_numeric_gradient(MlpModel m, const DenseMatrix& x, const DenseMatrix& y, double h) {
  std::vector<double> g;
  auto& p = m.params();
  auto probe = [&](double& v) {
    const double orig = v;
    v = orig + h;
    const double up = cross_entropy(m, x, y);
    v = orig - h;
    const double down = cross_entropy(m, x, y);
    v = orig;
    g.push_back((up - down) / (2.0 * h));
  };
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    for (auto& v : p.weights[l].data()) probe(v);
    for (auto& v : p.biases[l]) probe(v);
  }
  return g;
}

Outcome gradients() {
  const auto t0 = Clock::now();
  SeededRng rng(2026, 5);
  double worst_mlp = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t d = 2 + rng.uniform_index(5);
    const std::size_t c = 2 + rng.uniform_index(4);
    auto m = MlpModel::glorot({d, 3 + rng.uniform_index(6), 3 + rng.uniform_index(6), c}, rng);
    for (auto& b : m.params().biases)
      for (auto& v : b) v = rng.uniform(-0.5, 0.5);
    const auto x = random_matrix(8, d, rng, -2.0, 2.0);
    const auto y = random_stochastic(8, c, rng);
    const auto a = flatten(backward(m, x, y));
    const auto n = mlp_numeric_gradient(m, x, y, 1e-5);
    for (std::size_t k = 0; k < a.size(); ++k) worst_mlp = std::max(worst_mlp, rel_err(a[k], n[k]));
  }
  double worst_kip = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t s = 2 + rng.uniform_index(5);
    const std::size_t t = 4 + rng.uniform_index(8);
    const std::size_t d = 1 + rng.uniform_index(4);
    const std::size_t c = 2 + rng.uniform_index(3);
    auto xs = random_matrix(s, d, rng);
    const auto ys = random_stochastic(s, c, rng);
    const auto xt = random_matrix(t, d, rng);
    const auto yt = random_stochastic(t, c, rng);
    const double lambda = 1e-2;
    const double gamma = rng.uniform(0.2, 1.5);
    const auto g = kip_gradient(xs, ys, xt, yt, lambda, gamma);
    const double h = 1e-5;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const double orig = xs.data()[k];
      xs.data()[k] = orig + h;
      const double up = kip_loss(xs, ys, xt, yt, lambda, gamma);
      xs.data()[k] = orig - h;
      const double down = kip_loss(xs, ys, xt, yt, lambda, gamma);
      xs.data()[k] = orig;
      worst_kip = std::max(worst_kip, rel_err(g.data()[k], (up - down) / (2.0 * h)));
    }
  }
  const double wall = seconds_since(t0);
  return {worst_mlp <= 1e-4 && worst_kip <= 1e-3 && wall <= 60.0,
          "max relative error MLP " + fmt("%.2e", worst_mlp) + " (limit 1e-4), KIP " + fmt("%.2e", worst_kip) +
              " (limit 1e-3) over 20 instances each; " + fmt("%.2f", wall) + " s"};
}

Outcome clustering_invariants() {
  SeededRng rng(606, 1);
  int invariant_failures = 0;
  int coverage_checked = 0;
  int coverage_failures = 0;
  std::string first_problem;
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint64_t seed = rng.next_u64();
    const std::size_t classes = 2 + rng.uniform_index(9);
    const std::size_t n = 3 + rng.uniform_index(22);
    const std::size_t c = 1 + rng.uniform_index(classes);
    const std::size_t per_client = 4 * c + rng.uniform_index(20);
    const std::size_t k = 2 + rng.uniform_index(n - 1);

    // Random label-skew partition and real pretrained soft labels.
    SeededRng data_rng(seed, 1);
    const auto pool = synth_gaussian_classes(classes, (n * per_client) / classes + per_client + 4, 4, 3.0, data_rng);
    const auto probe = make_probe_dataset(pool, 30, data_rng);
    const auto clients = make_clients(partition_label_skew(pool, PartitionSpec{n, c, classes, per_client, seed}));
    RunConfig cfg;
    cfg.seed = seed;
    cfg.hidden = {8};
    cfg.batch_size = 8;
    const auto soft = collect_soft_labels(clients, probe, initial_model(cfg, 4, classes), cfg);
    const auto topo = build_topology(soft, k, seed);
    std::string problem = topo.violation(n);
    std::size_t largest = 0;
    for (const auto& g : topo.homogeneous) largest = std::max(largest, g.size());
    if (problem.empty() && topo.heads.size() != largest) problem = "H differs from the largest homogeneous cluster";
    if (!problem.empty()) {
      ++invariant_failures;
      if (first_problem.empty()) first_problem = "case " + std::to_string(trial) + ": " + problem;
    }

    // C = 1 with well-separated soft labels and K = N_c: full label coverage.
    const std::size_t per_class = 1 + rng.uniform_index(3);
    const std::size_t n1 = per_class * classes;
    SeededRng pool_rng(seed, 2);
    const auto pool1 = synth_gaussian_classes(classes, per_class * 10, 3, 5.0, pool_rng);
    const auto parts = partition_label_skew(pool1, PartitionSpec{n1, 1, classes, 10, seed});
    std::vector<DenseMatrix> separated;
    std::vector<std::size_t> label_of;
    for (const auto& p : parts) {
      const std::size_t label = p.hard_labels()[0];
      label_of.push_back(label);
      DenseMatrix s(20, classes);
      for (std::size_t r = 0; r < 20; ++r) {
        double sum = 0.0;
        for (std::size_t j = 0; j < classes; ++j) {
          s(r, j) = (j == label ? 0.9 : 0.1 / static_cast<double>(classes)) * (1.0 + 0.01 * pool_rng.uniform());
          sum += s(r, j);
        }
        for (std::size_t j = 0; j < classes; ++j) s(r, j) /= sum;
      }
      separated.push_back(std::move(s));
    }
    const auto topo1 = build_topology(separated, classes, seed);
    for (const auto& g : topo1.heterogeneous) {
      if (g.size() != classes) continue;
      ++coverage_checked;
      std::set<std::size_t> labels;
      for (auto id : g) labels.insert(label_of[id]);
      if (labels.size() != classes) ++coverage_failures;
    }
  }
  return {invariant_failures == 0 && coverage_failures == 0 && coverage_checked > 0,
          "200 cases: " + std::to_string(invariant_failures) + " invariant violations" +
              (first_problem.empty() ? "" : " (" + first_problem + ")") + "; C=1 coverage " +
              std::to_string(coverage_checked - coverage_failures) + "/" + std::to_string(coverage_checked) +
              " size-N_c clusters span every label"};
}

Outcome distillation_efficacy() {
  double sum_distilled = 0.0;
  double sum_coreset = 0.0;
  bool loss_ok = true;
  std::string losses;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    SeededRng rng(seed, 7);
    const auto g = make_gaussian_classes(2, 2, 1.5, rng);
    const auto train = sample_gaussian_classes(g, 100, rng);
    const auto test = sample_gaussian_classes(g, 500, rng);
    KipConfig cfg;
    cfg.support_size = 4;
    cfg.iterations = 300;
    cfg.seed = seed;
    const double gamma = default_rbf_gamma(train.features);
    const auto s = distill(train, cfg, gamma);

    // Class-balanced random coreset of the same size.
    SeededRng pick_rng(seed, 9);
    const auto labels = train.hard_labels();
    std::vector<std::size_t> pick;
    for (std::size_t c = 0; c < 2; ++c) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == c) idx.push_back(i);
      }
      pick_rng.shuffle(idx);
      pick.insert(pick.end(), idx.begin(), idx.begin() + 2);
    }
    const auto core = train.subset(pick);
    sum_distilled += krr_accuracy(s.features, s.labels, test, cfg.lambda, gamma);
    sum_coreset += krr_accuracy(core.features, core.labels, test, cfg.lambda, gamma);
    const double first = s.loss_trace.front().second;
    const double last = s.loss_trace.back().second;
    loss_ok = loss_ok && s.loss_trace.back().first == 300 && last <= first;
    losses += (seed ? " " : "") + fmt("%.2f", first) + "->" + fmt("%.2f", last);
  }
  const double md = sum_distilled / kSeeds;
  const double mc = sum_coreset / kSeeds;
  return {md > mc && loss_ok, "KRR test accuracy distilled " + fmt("%.4f", md) + " vs random coreset " +
                                  fmt("%.4f", mc) + "; loss at 0->300 per seed " + losses};
}

Outcome bound_calculator() {
  ConvergenceParams p;
  p.smoothness = 1.0;
  p.strong_convexity = 1.0;
  p.local_steps = 2;
  p.grad_bound = 1.0;
  p.sigma = {0.0};
  p.weights = {1.0};
  p.gamma_cluster = 0.1;
  p.gamma_distill = 0.0;
  p.init_gap = 1.0;
  const double b3 = convergence_bound(p, 3);
  const bool hand = std::abs(b3 - 2.12) <= 1e-12;
  bool monotone = true;
  for (double t = 0; t < 1000; t += 1) monotone = monotone && convergence_bound(p, t + 1) < convergence_bound(p, t);
  const double ratio = convergence_bound(p, 2e6) / convergence_bound(p, 1e6);
  const bool limit = std::abs(ratio - 0.5) <= 1e-3;
  return {hand && monotone && limit, "bound(3) = " + fmt("%.15f", b3) + " (expect 2.12); decreasing over t<=1000: " +
                                         (monotone ? "yes" : "no") + "; bound(2e6)/bound(1e6) = " +
                                         fmt("%.6f", ratio)};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "hfldd_acceptance_determinism";
  std::error_code ec;
  fs::remove_all(root, ec);
  fs::create_directories(root);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::ostringstream sink;
  bool ok = true;
  std::string detail;
  for (const char* algorithm : {"hfldd", "fedavg", "fedprox", "fedseq"}) {
    ExperimentConfig c = benchmark(2, parse_algorithm(algorithm), 11);
    c.run.rounds = 10;
    c.run.prox_mu = 0.01;
    const fs::path first = root / (std::string(algorithm) + "_first");
    {
      std::ofstream(root / "config.ini") << c.to_ini();
    }
    ok = ok && cmd_run({root / "config.ini", first}, sink, sink) == kExitOk;
    const fs::path a = root / (std::string(algorithm) + "_a");
    const fs::path b = root / (std::string(algorithm) + "_b");
    ok = ok && cmd_run({first / "manifest.json", a}, sink, sink) == kExitOk;
    ok = ok && cmd_run({first / "manifest.json", b}, sink, sink) == kExitOk;
    const bool same = slurp(a / "metrics.csv") == slurp(b / "metrics.csv") &&
                      slurp(a / "metrics.csv") == slurp(first / "metrics.csv") &&
                      !slurp(a / "metrics.csv").empty();
    ok = ok && same;
    detail += std::string(detail.empty() ? "" : ", ") + algorithm + (same ? " identical" : " DIFFERS");
  }
  fs::remove_all(root, ec);
  return {ok, "two replays of each manifest: " + detail};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"1 skew benefit (C=1)", skew_benefit},
      {"2 IID near-parity (C=10)", iid_parity},
      {"3 FedAvg cost formula", cost_formula},
      {"4 HFLDD cost dominance (C=2)", cost_dominance},
      {"5 gradient correctness", gradients},
      {"6 clustering invariants", clustering_invariants},
      {"7 distillation efficacy", distillation_efficacy},
      {"8 convergence bound calculator", bound_calculator},
      {"9 determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << name << ": " << o.detail << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
