// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#include "hfldd/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

namespace hfldd {

std::size_t ParameterSet::parameter_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

bool ParameterSet::same_shape(const ParameterSet& other) const noexcept {
  if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() ||
        weights[l].cols() != other.weights[l].cols() ||
        biases[l].size() != other.biases[l].size()) {
      return false;
    }
  }
  return true;
}

double ParameterSet::norm_sq() const noexcept {
  double s = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    s += frobenius_norm_sq(weights[l]);
    for (double b : biases[l]) s += b * b;
  }
  return s;
}

MlpModel::MlpModel(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw ShapeError("MlpModel: need at least input and output sizes");
  for (auto s : sizes_) {
    if (s == 0) throw ShapeError("MlpModel: layer sizes must be positive");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    params_.weights.emplace_back(sizes_[l], sizes_[l + 1]);
    params_.biases.emplace_back(sizes_[l + 1], 0.0);
  }
}

MlpModel MlpModel::glorot(std::vector<std::size_t> layer_sizes, SeededRng& rng) {
  MlpModel m(std::move(layer_sizes));
  for (auto& w : m.params_.weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (auto& v : w.data()) v = rng.uniform(-limit, limit);
  }
  return m;
}

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0)) throw DomainError("SgdConfig: learning rate must be positive");
  if (batch_size == 0) throw DomainError("SgdConfig: batch size must be positive");
}

namespace {

void check_input(const MlpModel& m, const DenseMatrix& x) {
  if (m.layer_sizes().empty()) throw ShapeError("model has no layers");
  if (x.cols() != m.input_dim()) {
    throw ShapeError("model input dimension " + std::to_string(m.input_dim()) + ", got " +
                     std::to_string(x.cols()) + " features");
  }
}

// Affine map a·W + b.
DenseMatrix affine(const DenseMatrix& a, const DenseMatrix& w, const std::vector<double>& b) {
  DenseMatrix z = matmul(a, w);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
  }
  return z;
}

void relu_inplace(DenseMatrix& z) {
  for (auto& v : z.data()) v = v > 0.0 ? v : 0.0;
}

// Row-wise log-softmax of the logits.
DenseMatrix log_softmax(const DenseMatrix& z) {
  DenseMatrix out(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto r = z.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (double v : r) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < r.size(); ++j) out(i, j) = r[j] - lse;
  }
  return out;
}

DenseMatrix softmax(const DenseMatrix& z) {
  DenseMatrix p(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto r = z.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      p(i, j) = std::exp(r[j] - mx);
      s += p(i, j);
    }
    for (std::size_t j = 0; j < r.size(); ++j) p(i, j) /= s;
  }
  return p;
}

// Activations of every layer; the last entry holds the output logits.
std::vector<DenseMatrix> forward_trace(const MlpModel& m, const DenseMatrix& x) {
  check_input(m, x);
  const auto& p = m.params();
  std::vector<DenseMatrix> acts;
  acts.reserve(m.layer_count() + 1);
  acts.push_back(x);
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    DenseMatrix z = affine(acts.back(), p.weights[l], p.biases[l]);
    if (l + 1 < m.layer_count()) relu_inplace(z);
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace

DenseMatrix forward(const MlpModel& m, const DenseMatrix& x) {
  return softmax(forward_trace(m, x).back());
}

double cross_entropy(const MlpModel& m, const DenseMatrix& x, const DenseMatrix& y) {
  if (x.rows() != y.rows() || y.cols() != m.output_dim()) {
    throw ShapeError("cross_entropy: inputs and targets disagree in shape");
  }
  if (x.rows() == 0) return 0.0;
  const DenseMatrix logp = log_softmax(forward_trace(m, x).back());
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y.data()[i] != 0.0) loss -= y.data()[i] * logp.data()[i];
  }
  return loss / static_cast<double>(x.rows());
}

GradientSet backward(const MlpModel& m, const DenseMatrix& x, const DenseMatrix& y) {
  if (x.rows() != y.rows()) {
    throw ShapeError("backward: " + std::to_string(x.rows()) + " inputs vs " +
                     std::to_string(y.rows()) + " targets");
  }
  if (y.cols() != m.output_dim()) throw ShapeError("backward: target width != class count");
  if (x.rows() == 0) throw EmptyInputError("backward: empty batch");

  const auto acts = forward_trace(m, x);
  const auto& p = m.params();
  const std::size_t layers = m.layer_count();
  const double inv_n = 1.0 / static_cast<double>(x.rows());

  GradientSet g;
  g.weights.resize(layers);
  g.biases.resize(layers);

  DenseMatrix delta = softmax(acts.back());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta.data()[i] = (delta.data()[i] - y.data()[i]) * inv_n;
  }
  for (std::size_t l = layers; l-- > 0;) {
    g.weights[l] = matmul(transpose(acts[l]), delta);
    g.biases[l].assign(delta.cols(), 0.0);
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      auto r = delta.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) g.biases[l][j] += r[j];
    }
    if (l == 0) break;
    DenseMatrix prev = matmul(delta, transpose(p.weights[l]));
    // ReLU derivative: acts[l] holds the post-activation, positive exactly where z > 0.
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (!(acts[l].data()[i] > 0.0)) prev.data()[i] = 0.0;
    }
    delta = std::move(prev);
  }
  return g;
}

MlpModel sgd_step(const MlpModel& m, const GradientSet& g, double eta) {
  if (!m.params().same_shape(g)) throw ShapeError("sgd_step: gradient shape does not match model");
  MlpModel out = m;
  auto& p = out.params();
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    auto& w = p.weights[l].data();
    const auto& gw = g.weights[l].data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eta * gw[i];
    for (std::size_t j = 0; j < p.biases[l].size(); ++j) p.biases[l][j] -= eta * g.biases[l][j];
  }
  return out;
}

MlpModel local_train(const MlpModel& m, const LabeledDataset& d, const SgdConfig& cfg,
                     SeededRng& rng, std::optional<ProximalTerm> prox) {
  if (d.empty()) throw EmptyInputError("local_train: empty dataset");
  cfg.validate();
  if (cfg.steps == 0) return m;
  if (prox && prox->anchor && !prox->anchor->params().same_shape(m.params())) {
    throw ShapeError("local_train: proximal anchor shape differs from model");
  }

  MlpModel cur = m;
  std::vector<std::size_t> order = rng.permutation(d.size());
  std::size_t pos = 0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const std::size_t take = std::min(cfg.batch_size, d.size() - pos);
    std::span<const std::size_t> batch(order.data() + pos, take);
    pos += take;
    const DenseMatrix xb = gather_rows(d.features, batch);
    const DenseMatrix yb = gather_rows(d.labels, batch);
    const GradientSet g = backward(cur, xb, yb);
    cur = sgd_step(cur, g, cfg.learning_rate);
    if (prox && prox->anchor && prox->mu != 0.0) {
      // Proximal step: argmin_w ‖w − w'‖²/(2η) + μ/2‖w − anchor‖², stable for any μ.
      const double keep = 1.0 / (1.0 + cfg.learning_rate * prox->mu);
      const auto& a = prox->anchor->params();
      auto& w = cur.params();
      for (std::size_t l = 0; l < w.weights.size(); ++l) {
        auto& wd = w.weights[l].data();
        const auto& ad = a.weights[l].data();
        for (std::size_t i = 0; i < wd.size(); ++i) wd[i] = ad[i] + keep * (wd[i] - ad[i]);
        for (std::size_t j = 0; j < w.biases[l].size(); ++j) {
          w.biases[l][j] = a.biases[l][j] + keep * (w.biases[l][j] - a.biases[l][j]);
        }
      }
    }
    if (pos == d.size()) {
      rng.shuffle(order);
      pos = 0;
    }
  }
  return cur;
}

double accuracy(const MlpModel& m, const LabeledDataset& d) {
  if (d.empty()) return 0.0;
  const DenseMatrix logits = forward_trace(m, d.features).back();
  const auto truth = d.hard_labels();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    const auto pred = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    if (pred == truth[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(d.size());
}

DenseMatrix soft_labels(const MlpModel& m, const LabeledDataset& dg) {
  if (dg.empty()) throw EmptyInputError("soft_labels: empty probe dataset");
  DenseMatrix s = forward(m, dg.features);
  for (auto& v : s.data()) v = std::clamp(v, 1e-12, 1.0);
  return s;
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw FormatError("load_model: truncated stream", static_cast<std::size_t>(in.gcount()));
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return v;
}

}  // namespace

void save_model(const MlpModel& m, std::ostream& out) {
  put_u64(out, m.layer_sizes().size());
  for (auto s : m.layer_sizes()) put_u64(out, s);
  const auto& p = m.params();
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    for (double v : p.weights[l].data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
    for (double v : p.biases[l]) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

MlpModel load_model(std::istream& in) {
  const auto count = get_u64(in);
  if (count < 2 || count > 64) throw FormatError("load_model: implausible layer count", 0);
  std::vector<std::size_t> sizes(count);
  for (auto& s : sizes) s = get_u64(in);
  MlpModel m(sizes);
  auto& p = m.params();
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    for (auto& v : p.weights[l].data()) v = std::bit_cast<double>(get_u64(in));
    for (auto& v : p.biases[l]) v = std::bit_cast<double>(get_u64(in));
  }
  return m;
}

}  // namespace hfldd
