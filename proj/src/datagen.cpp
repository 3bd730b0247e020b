// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#include "hfldd/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>

namespace hfldd {

LabeledDataset::LabeledDataset(DenseMatrix x, DenseMatrix y, std::size_t n_classes)
    : features(std::move(x)), labels(std::move(y)), class_count(n_classes) {
  validate();
}

void LabeledDataset::validate() const {
  if (features.rows() != labels.rows()) {
    throw ShapeError("LabeledDataset: " + std::to_string(features.rows()) + " feature rows vs " +
                     std::to_string(labels.rows()) + " label rows");
  }
  if (labels.rows() > 0 && labels.cols() != class_count) {
    throw ShapeError("LabeledDataset: label width " + std::to_string(labels.cols()) +
                     " != class count " + std::to_string(class_count));
  }
  for (std::size_t i = 0; i < labels.rows(); ++i) {
    double s = 0.0;
    for (double v : labels.row(i)) s += v;
    if (std::abs(s - 1.0) > 1e-9) {
      throw ShapeError("LabeledDataset: label row " + std::to_string(i) + " sums to " +
                       std::to_string(s));
    }
  }
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.features = gather_rows(features, indices);
  out.labels = gather_rows(labels, indices);
  if (indices.empty()) {
    out.features = DenseMatrix(0, features.cols());
    out.labels = DenseMatrix(0, labels.cols());
  }
  out.class_count = class_count;
  return out;
}

std::vector<std::size_t> LabeledDataset::hard_labels() const {
  std::vector<std::size_t> out(labels.rows());
  for (std::size_t i = 0; i < labels.rows(); ++i) {
    auto r = labels.row(i);
    out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

std::vector<std::size_t> LabeledDataset::class_histogram() const {
  std::vector<std::size_t> hist(class_count, 0);
  for (std::size_t c : hard_labels()) ++hist[c];
  return hist;
}

std::size_t LabeledDataset::distinct_classes() const {
  auto hist = class_histogram();
  return static_cast<std::size_t>(std::count_if(hist.begin(), hist.end(), [](auto n) { return n > 0; }));
}

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.dim() != b.dim() || a.class_count != b.class_count) {
    throw ShapeError("concat: datasets of shape (d=" + std::to_string(a.dim()) + ", classes=" +
                     std::to_string(a.class_count) + ") and (d=" + std::to_string(b.dim()) +
                     ", classes=" + std::to_string(b.class_count) + ")");
  }
  LabeledDataset out;
  out.features = vstack(a.features, b.features);
  out.labels = vstack(a.labels, b.labels);
  out.class_count = a.class_count;
  return out;
}

DenseMatrix one_hot(std::span<const std::size_t> classes, std::size_t class_count) {
  DenseMatrix y(classes.size(), class_count);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] >= class_count) throw ShapeError("one_hot: class index out of range");
    y(i, classes[i]) = 1.0;
  }
  return y;
}

namespace {

std::vector<double> random_unit_vector(std::size_t dim, SeededRng& rng) {
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace

GaussianClasses make_gaussian_classes(std::size_t n_classes, std::size_t dim, double separation,
                                      SeededRng& rng) {
  if (n_classes == 0 || dim == 0) throw DomainError("make_gaussian_classes: counts must be >= 1");
  if (!(separation > 0.0)) throw DomainError("make_gaussian_classes: separation must be positive");
  GaussianClasses g;
  g.means = DenseMatrix(n_classes, dim);
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto dir = random_unit_vector(dim, rng);
    for (std::size_t f = 0; f < dim; ++f) g.means(c, f) = separation * dir[f];
  }
  return g;
}

GaussianClasses shift_class_means(const GaussianClasses& g, double offset_sigmas, SeededRng& rng) {
  GaussianClasses out = g;
  for (std::size_t c = 0; c < g.means.rows(); ++c) {
    auto dir = random_unit_vector(g.means.cols(), rng);
    for (std::size_t f = 0; f < g.means.cols(); ++f) {
      out.means(c, f) += offset_sigmas * g.sigma * dir[f];
    }
  }
  return out;
}

LabeledDataset sample_gaussian_classes(const GaussianClasses& g, std::size_t per_class,
                                       SeededRng& rng) {
  if (per_class == 0) throw DomainError("sample_gaussian_classes: per_class must be >= 1");
  const std::size_t n_classes = g.means.rows();
  const std::size_t dim = g.means.cols();
  DenseMatrix x(n_classes * per_class, dim);
  std::vector<std::size_t> cls(n_classes * per_class);
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s) {
      const std::size_t r = c * per_class + s;
      cls[r] = c;
      for (std::size_t f = 0; f < dim; ++f) x(r, f) = g.means(c, f) + g.sigma * rng.normal();
    }
  }
  return LabeledDataset(std::move(x), one_hot(cls, n_classes), n_classes);
}

LabeledDataset synth_gaussian_classes(std::size_t n_classes, std::size_t per_class, std::size_t dim,
                                      double separation, SeededRng& rng) {
  auto g = make_gaussian_classes(n_classes, dim, separation, rng);
  return sample_gaussian_classes(g, per_class, rng);
}

std::vector<std::vector<std::size_t>> partition_label_skew_indices(const LabeledDataset& d,
                                                                   const PartitionSpec& spec) {
  const std::size_t n = spec.clients;
  const std::size_t c = spec.classes_per_client;
  const std::size_t nc = spec.total_classes;
  if (n == 0) throw DomainError("partition: client count must be >= 1");
  if (c < 1 || c > nc) {
    throw DomainError("partition: classes per client " + std::to_string(c) +
                      " outside [1, " + std::to_string(nc) + "]");
  }
  if (nc != d.class_count) {
    throw DomainError("partition: spec has " + std::to_string(nc) + " classes, dataset has " +
                      std::to_string(d.class_count));
  }
  if (spec.samples_per_client < c) {
    throw DomainError("partition: samples per client must be at least classes per client");
  }

  // Class-sorted pools, shuffled within each class.
  SeededRng pool_rng(spec.seed, 1);
  std::vector<std::vector<std::size_t>> pools(nc);
  auto labels = d.hard_labels();
  for (std::size_t i = 0; i < labels.size(); ++i) pools[labels[i]].push_back(i);
  for (auto& p : pools) pool_rng.shuffle(p);

  SeededRng order_rng(spec.seed, 2);
  const auto client_order = order_rng.permutation(n);

  const std::size_t shards_per_class = (n * c + nc - 1) / nc;
  const std::size_t base = spec.samples_per_client / c;
  const std::size_t extra = spec.samples_per_client % c;

  std::vector<std::vector<std::size_t>> out(n);
  std::vector<std::size_t> cursor(nc, 0);
  for (std::size_t k = 0; k < n * c; ++k) {
    const std::size_t cls = k / shards_per_class;
    const std::size_t slot = k / n;  // which of the client's C shards this is
    const std::size_t client = client_order[k % n];
    const std::size_t take = base + (slot < extra ? 1 : 0);
    if (cursor[cls] + take > pools[cls].size()) {
      throw CapacityError("partition: class " + std::to_string(cls) + " has " +
                          std::to_string(pools[cls].size()) + " samples, shards need more than that");
    }
    auto first = pools[cls].begin() + static_cast<std::ptrdiff_t>(cursor[cls]);
    out[client].insert(out[client].end(), first, first + static_cast<std::ptrdiff_t>(take));
    cursor[cls] += take;
  }
  return out;
}

std::vector<LabeledDataset> partition_label_skew(const LabeledDataset& d,
                                                 const PartitionSpec& spec) {
  auto parts = partition_label_skew_indices(d, spec);
  std::vector<LabeledDataset> out;
  out.reserve(parts.size());
  for (const auto& idx : parts) out.push_back(d.subset(idx));
  return out;
}

LabeledDataset make_probe_dataset(const LabeledDataset& source, std::size_t size, SeededRng& rng) {
  if (size > source.size()) {
    throw CapacityError("make_probe_dataset: requested " + std::to_string(size) + " rows from " +
                        std::to_string(source.size()));
  }
  auto perm = rng.permutation(source.size());
  perm.resize(size);
  return source.subset(perm);
}

std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset& d,
                                                           double test_fraction, SeededRng& rng) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw DomainError("train_test_split: test fraction must lie in [0, 1)");
  }
  auto perm = rng.permutation(d.size());
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(d.size())));
  std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  // Keep class-grouped order stable for readability of exports.
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {d.subset(train), d.subset(test)};
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open " + p.string(), 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t offset,
                        const std::string& what) {
  if (offset + 4 > b.size()) throw FormatError(what + ": truncated header", b.size());
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t class_count) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  const std::string img_name = images.filename().string();
  const std::string lab_name = labels.filename().string();

  if (read_be32(img, 0, img_name) != 0x00000803u) {
    throw FormatError(img_name + ": bad magic number, expected 0x00000803", 0);
  }
  if (read_be32(lab, 0, lab_name) != 0x00000801u) {
    throw FormatError(lab_name + ": bad magic number, expected 0x00000801", 0);
  }
  const std::size_t n = read_be32(img, 4, img_name);
  const std::size_t h = read_be32(img, 8, img_name);
  const std::size_t w = read_be32(img, 12, img_name);
  const std::size_t n_labels = read_be32(lab, 4, lab_name);
  if (n != n_labels) {
    throw FormatError("IDX: " + std::to_string(n) + " images but " + std::to_string(n_labels) +
                      " labels", 4);
  }
  const std::size_t pixels = h * w;
  if (img.size() < 16 + n * pixels) {
    throw FormatError(img_name + ": truncated pixel data", img.size());
  }
  if (lab.size() < 8 + n) throw FormatError(lab_name + ": truncated label data", lab.size());

  DenseMatrix x(n, pixels);
  std::vector<std::size_t> cls(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) x(i, p) = img[16 + i * pixels + p] / 255.0;
    cls[i] = lab[8 + i];
    if (cls[i] >= class_count) {
      throw FormatError(lab_name + ": label " + std::to_string(cls[i]) + " exceeds class count",
                        8 + i);
    }
  }
  return LabeledDataset(std::move(x), one_hot(cls, class_count), class_count);
}

void write_dataset_csv(const LabeledDataset& d, std::ostream& out) {
  for (std::size_t f = 0; f < d.dim(); ++f) out << 'f' << f << ',';
  out << "label\n";
  const auto cls = d.hard_labels();
  out << std::setprecision(17);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (double v : d.features.row(i)) out << v << ',';
    out << cls[i] << '\n';
  }
}

}  // namespace hfldd
