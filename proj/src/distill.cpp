// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#include "hfldd/distill.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace hfldd {

void KipConfig::validate() const {
  if (support_size < 1) throw DomainError("KipConfig: support size must be >= 1");
  if (!(lambda > 0.0)) throw DomainError("KipConfig: lambda must be positive");
  if (!(learning_rate > 0.0)) throw DomainError("KipConfig: learning rate must be positive");
  if (target_batch < 1) throw DomainError("KipConfig: target batch must be >= 1");
}

LabeledDataset DistilledSet::as_dataset() const {
  return LabeledDataset(features, labels, labels.cols());
}

namespace {

void check_shapes(const DenseMatrix& xs, const DenseMatrix& ys, const DenseMatrix& xt,
                  const DenseMatrix& yt) {
  if (xs.cols() != xt.cols()) throw ShapeError("kip: support and target feature dims differ");
  if (ys.cols() != yt.cols()) throw ShapeError("kip: support and target label dims differ");
  if (xs.rows() != ys.rows() || xt.rows() != yt.rows()) {
    throw ShapeError("kip: feature and label row counts differ");
  }
  if (xs.rows() == 0) throw EmptyInputError("kip: empty support set");
}

struct KrrState {
  DenseMatrix kss;
  DenseMatrix kts;
  DenseMatrix factor;  // Cholesky factor of K_ss + λI
  DenseMatrix alpha;   // (K_ss + λI)⁻¹ y_s
  DenseMatrix residual;  // y_t − K_ts α
};

KrrState krr_state(const DenseMatrix& xs, const DenseMatrix& ys, const DenseMatrix& xt,
                   const DenseMatrix& yt, double lambda, double gamma) {
  check_shapes(xs, ys, xt, yt);
  if (!(lambda >= 0.0)) throw DomainError("kip: lambda must be non-negative");
  KrrState s;
  s.kss = rbf_kernel(xs, xs, gamma);
  s.kts = rbf_kernel(xt, xs, gamma);
  DenseMatrix a = s.kss;
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += lambda;
  s.factor = cholesky(a);
  s.alpha = cholesky_solve(s.factor, ys);
  s.residual = yt;
  const DenseMatrix pred = matmul(s.kts, s.alpha);
  for (std::size_t i = 0; i < pred.size(); ++i) s.residual.data()[i] -= pred.data()[i];
  return s;
}

}  // namespace

double kip_loss(const DenseMatrix& xs, const DenseMatrix& ys, const DenseMatrix& xt,
                const DenseMatrix& yt, double lambda, double gamma) {
  return 0.5 * frobenius_norm_sq(krr_state(xs, ys, xt, yt, lambda, gamma).residual);
}

KipEvaluation kip_loss_and_gradient(const DenseMatrix& xs, const DenseMatrix& ys,
                                    const DenseMatrix& xt, const DenseMatrix& yt, double lambda,
                                    double gamma) {
  const KrrState s = krr_state(xs, ys, xt, yt, lambda, gamma);
  const std::size_t ns = xs.rows();
  const std::size_t nt = xt.rows();
  const std::size_t d = xs.cols();

  // Sensitivities of the loss to the two kernel blocks:
  //   ∂L/∂K_ts = −R αᵀ,   ∂L/∂K_ss = A⁻¹ K_tsᵀ R αᵀ   (A = K_ss + λI).
  const DenseMatrix alpha_t = transpose(s.alpha);
  DenseMatrix g_ts = matmul(s.residual, alpha_t);
  for (auto& v : g_ts.data()) v = -v;
  const DenseMatrix back = cholesky_solve(s.factor, matmul(transpose(s.kts), s.residual));
  const DenseMatrix g_ss = matmul(back, alpha_t);

  DenseMatrix grad(ns, d);
  const double two_gamma = 2.0 * gamma;
  for (std::size_t j = 0; j < ns; ++j) {
    auto sj = xs.row(j);
    auto gj = grad.row(j);
    for (std::size_t i = 0; i < nt; ++i) {
      const double w = g_ts(i, j) * s.kts(i, j) * two_gamma;
      if (w == 0.0) continue;
      auto ti = xt.row(i);
      for (std::size_t f = 0; f < d; ++f) gj[f] += w * (ti[f] - sj[f]);
    }
    for (std::size_t b = 0; b < ns; ++b) {
      if (b == j) continue;
      const double w = (g_ss(j, b) + g_ss(b, j)) * s.kss(j, b) * two_gamma;
      if (w == 0.0) continue;
      auto sb = xs.row(b);
      for (std::size_t f = 0; f < d; ++f) gj[f] += w * (sb[f] - sj[f]);
    }
  }
  return {0.5 * frobenius_norm_sq(s.residual), std::move(grad)};
}

DenseMatrix kip_gradient(const DenseMatrix& xs, const DenseMatrix& ys, const DenseMatrix& xt,
                         const DenseMatrix& yt, double lambda, double gamma) {
  return kip_loss_and_gradient(xs, ys, xt, yt, lambda, gamma).gradient;
}

std::vector<std::size_t> initial_support_indices(const LabeledDataset& d, std::size_t support_size,
                                                 SeededRng& rng) {
  if (support_size > d.size()) {
    throw CapacityError("distill: support size " + std::to_string(support_size) +
                        " exceeds dataset size " + std::to_string(d.size()));
  }
  std::vector<std::vector<std::size_t>> pools(d.class_count);
  const auto cls = d.hard_labels();
  for (std::size_t i = 0; i < cls.size(); ++i) pools[cls[i]].push_back(i);
  for (auto& p : pools) rng.shuffle(p);

  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < pools.size(); ++c) {
    if (!pools[c].empty()) present.push_back(c);
  }
  std::vector<std::size_t> out;
  out.reserve(support_size);
  std::vector<std::size_t> used(pools.size(), 0);
  std::size_t turn = 0;
  while (out.size() < support_size) {
    // Skip classes that ran out; the size check above guarantees termination.
    const std::size_t c = present[turn % present.size()];
    ++turn;
    if (used[c] < pools[c].size()) out.push_back(pools[c][used[c]++]);
  }
  return out;
}

DistilledSet distill(const LabeledDataset& d, const KipConfig& cfg, double gamma) {
  cfg.validate();
  if (d.empty()) throw EmptyInputError("distill: empty dataset");
  SeededRng rng(cfg.seed, 0);
  const auto init = initial_support_indices(d, cfg.support_size, rng);

  DistilledSet out;
  out.features = gather_rows(d.features, init);
  {
    const auto hard = d.hard_labels();
    std::vector<std::size_t> cls;
    cls.reserve(init.size());
    for (auto i : init) cls.push_back(hard[i]);
    out.labels = one_hot(cls, d.class_count);
  }

  auto full_loss = [&] {
    return kip_loss(out.features, out.labels, d.features, d.labels, cfg.lambda, gamma);
  };
  if (cfg.trace_every > 0) out.loss_trace.emplace_back(0, full_loss());

  const std::size_t batch = std::min(cfg.target_batch, d.size());
  std::vector<std::size_t> idx(d.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    // Partial Fisher–Yates: the first `batch` slots become a uniform sample without replacement.
    for (std::size_t i = 0; i < batch; ++i) {
      std::swap(idx[i], idx[i + rng.uniform_index(idx.size() - i)]);
    }
    std::span<const std::size_t> pick(idx.data(), batch);
    const DenseMatrix xt = gather_rows(d.features, pick);
    const DenseMatrix yt = gather_rows(d.labels, pick);
    const auto eval = kip_loss_and_gradient(out.features, out.labels, xt, yt, cfg.lambda, gamma);
    for (std::size_t i = 0; i < out.features.size(); ++i) {
      out.features.data()[i] -= cfg.learning_rate * eval.gradient.data()[i];
    }
    if (cfg.trace_every > 0 && (it % cfg.trace_every == 0 || it == cfg.iterations)) {
      out.loss_trace.emplace_back(it, full_loss());
    }
  }
  out.final_loss = (cfg.trace_every > 0 && !out.loss_trace.empty()) ? out.loss_trace.back().second
                                                                      : full_loss();
  if (!out.features.all_finite()) throw DomainError("distill: support features diverged");
  return out;
}

DenseMatrix krr_predict(const DenseMatrix& xs, const DenseMatrix& ys, const DenseMatrix& x,
                        double lambda, double gamma) {
  const DenseMatrix alpha = ridge_solve(rbf_kernel(xs, xs, gamma), ys, lambda);
  return matmul(rbf_kernel(x, xs, gamma), alpha);
}

double krr_accuracy(const DenseMatrix& xs, const DenseMatrix& ys, const LabeledDataset& test,
                    double lambda, double gamma) {
  if (test.empty()) return 0.0;
  const DenseMatrix pred = krr_predict(xs, ys, test.features, lambda, gamma);
  const auto truth = test.hard_labels();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    auto r = pred.row(i);
    if (static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin()) == truth[i]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

void write_distilled_csv(const DistilledSet& s, std::ostream& out) {
  const std::size_t d = s.features.cols();
  const std::size_t nc = s.labels.cols();
  for (std::size_t f = 0; f < d; ++f) out << 'f' << f << ',';
  for (std::size_t c = 0; c < nc; ++c) out << 'y' << c << (c + 1 < nc ? "," : "\n");
  out << std::setprecision(17);
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (double v : s.features.row(i)) out << v << ',';
    for (std::size_t c = 0; c < nc; ++c) out << s.labels(i, c) << (c + 1 < nc ? "," : "\n");
  }
}

DistilledSet read_distilled_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("distilled csv: missing header", 0);
  std::size_t d = 0;
  std::size_t nc = 0;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty() && tok[0] == 'f') ++d;
      else if (!tok.empty() && tok[0] == 'y') ++nc;
      else throw FormatError("distilled csv: unexpected column '" + tok + "'", 0);
    }
  }
  std::vector<double> x;
  std::vector<double> y;
  std::size_t rows = 0;
  std::size_t offset = line.size() + 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::size_t col = 0;
    while (std::getline(ss, tok, ',')) {
      double v = 0.0;
      try {
        v = std::stod(tok);
      } catch (const std::exception&) {
        throw FormatError("distilled csv: bad number '" + tok + "'", offset);
      }
      (col < d ? x : y).push_back(v);
      ++col;
    }
    if (col != d + nc) throw FormatError("distilled csv: wrong column count", offset);
    offset += line.size() + 1;
    ++rows;
  }
  DistilledSet s;
  s.features = DenseMatrix(rows, d, std::move(x));
  s.labels = DenseMatrix(rows, nc, std::move(y));
  return s;
}

}  // namespace hfldd
