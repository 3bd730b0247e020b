// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#include "experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hfldd/errors.hpp"
#include "json.hpp"

#ifndef HFLDD_GIT_DESCRIBE
#define HFLDD_GIT_DESCRIBE "unknown"
#endif

namespace hfldd::cli {

namespace {

using json = nlohmann::ordered_json;

// Stream ids for data preparation; training streams live in fltrain.
constexpr std::uint64_t kDataStream = 0x44415441;
constexpr std::uint64_t kSplitStream = 0x53504c54;
constexpr std::uint64_t kProbeStream = 0x50524f42;

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || v.empty()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || v.empty()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    out.push_back(to_u64(key, item));
  }
  if (out.empty()) throw ConfigError(key + ": expected a comma-separated list of sizes");
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string& name, const std::string& value,
                     const fs::path& base)>
      set;
};

Field size_field(const char* section, const char* key, std::function<std::size_t&(ExperimentConfig&)> ref) {
  return {section, key,
          [ref](const ExperimentConfig& c) { return std::to_string(ref(const_cast<ExperimentConfig&>(c))); },
          [ref](ExperimentConfig& c, const std::string& name, const std::string& v, const fs::path&) {
            ref(c) = static_cast<std::size_t>(to_u64(name, v));
          }};
}

Field u64_field(const char* section, const char* key, std::function<std::uint64_t&(ExperimentConfig&)> ref) {
  return {section, key,
          [ref](const ExperimentConfig& c) { return std::to_string(ref(const_cast<ExperimentConfig&>(c))); },
          [ref](ExperimentConfig& c, const std::string& name, const std::string& v, const fs::path&) {
            ref(c) = to_u64(name, v);
          }};
}

Field real_field(const char* section, const char* key, std::function<double&(ExperimentConfig&)> ref) {
  return {section, key,
          [ref](const ExperimentConfig& c) { return fmt_double(ref(const_cast<ExperimentConfig&>(c))); },
          [ref](ExperimentConfig& c, const std::string& name, const std::string& v, const fs::path&) {
            ref(c) = to_double(name, v);
          }};
}

Field path_field(const char* section, const char* key, std::function<fs::path&(ExperimentConfig&)> ref) {
  return {section, key,
          [ref](const ExperimentConfig& c) { return ref(const_cast<ExperimentConfig&>(c)).string(); },
          [ref](ExperimentConfig& c, const std::string&, const std::string& v, const fs::path& base) {
            fs::path p(v);
            ref(c) = (p.is_relative() && !base.empty() && !v.empty()) ? base / p : p;
          }};
}

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back({"experiment", "name", [](const ExperimentConfig& c) { return c.name; },
                 [](ExperimentConfig& c, const std::string&, const std::string& v, const fs::path&) {
                   c.name = v;
                 }});
    f.push_back({"experiment", "algorithm",
                 [](const ExperimentConfig& c) { return std::string(to_string(c.run.algorithm)); },
                 [](ExperimentConfig& c, const std::string& name, const std::string& v, const fs::path&) {
                   try {
                     c.run.algorithm = parse_algorithm(v);
                   } catch (const DomainError& e) {
                     throw ConfigError(name + ": " + e.what());
                   }
                 }});
    f.push_back(u64_field("experiment", "seed", [](ExperimentConfig& c) -> std::uint64_t& { return c.seed; }));
    f.push_back({"experiment", "output", [](const ExperimentConfig& c) { return c.output.string(); },
                 [](ExperimentConfig& c, const std::string&, const std::string& v, const fs::path&) {
                   c.output = v;
                 }});

    f.push_back({"data", "source", [](const ExperimentConfig& c) { return c.data.source; },
                 [](ExperimentConfig& c, const std::string&, const std::string& v, const fs::path&) {
                   c.data.source = v;
                 }});
    f.push_back(size_field("data", "classes", [](ExperimentConfig& c) -> std::size_t& { return c.data.classes; }));
    f.push_back(size_field("data", "dim", [](ExperimentConfig& c) -> std::size_t& { return c.data.dim; }));
    f.push_back(size_field("data", "per_class", [](ExperimentConfig& c) -> std::size_t& { return c.data.per_class; }));
    f.push_back(real_field("data", "separation", [](ExperimentConfig& c) -> double& { return c.data.separation; }));
    f.push_back(real_field("data", "sigma", [](ExperimentConfig& c) -> double& { return c.data.sigma; }));
    f.push_back(real_field("data", "test_fraction", [](ExperimentConfig& c) -> double& { return c.data.test_fraction; }));
    f.push_back(size_field("data", "probe_size", [](ExperimentConfig& c) -> std::size_t& { return c.data.probe_size; }));
    f.push_back(real_field("data", "probe_shift", [](ExperimentConfig& c) -> double& { return c.data.probe_shift; }));
    f.push_back(path_field("data", "idx_images", [](ExperimentConfig& c) -> fs::path& { return c.data.idx_images; }));
    f.push_back(path_field("data", "idx_labels", [](ExperimentConfig& c) -> fs::path& { return c.data.idx_labels; }));

    f.push_back(size_field("partition", "clients", [](ExperimentConfig& c) -> std::size_t& { return c.partition.clients; }));
    f.push_back(size_field("partition", "classes_per_client",
                           [](ExperimentConfig& c) -> std::size_t& { return c.partition.classes_per_client; }));
    f.push_back(size_field("partition", "samples_per_client",
                           [](ExperimentConfig& c) -> std::size_t& { return c.partition.samples_per_client; }));

    f.push_back(size_field("train", "rounds", [](ExperimentConfig& c) -> std::size_t& { return c.run.rounds; }));
    f.push_back(size_field("train", "local_steps", [](ExperimentConfig& c) -> std::size_t& { return c.run.local_steps; }));
    f.push_back({"train", "local_unit",
                 [](const ExperimentConfig& c) {
                   return std::string(c.run.local_unit == LocalUnit::kEpochs ? "epochs" : "steps");
                 },
                 [](ExperimentConfig& c, const std::string& name, const std::string& v, const fs::path&) {
                   if (v == "steps") {
                     c.run.local_unit = LocalUnit::kSteps;
                   } else if (v == "epochs") {
                     c.run.local_unit = LocalUnit::kEpochs;
                   } else {
                     throw ConfigError(name + ": expected 'steps' or 'epochs', got '" + v + "'");
                   }
                 }});
    f.push_back(size_field("train", "pretrain_steps", [](ExperimentConfig& c) -> std::size_t& { return c.run.pretrain_steps; }));
    f.push_back(real_field("train", "learning_rate", [](ExperimentConfig& c) -> double& { return c.run.learning_rate; }));
    f.push_back(size_field("train", "batch_size", [](ExperimentConfig& c) -> std::size_t& { return c.run.batch_size; }));
    f.push_back(real_field("train", "prox_mu", [](ExperimentConfig& c) -> double& { return c.run.prox_mu; }));
    f.push_back({"train", "hidden", [](const ExperimentConfig& c) { return join(c.run.hidden); },
                 [](ExperimentConfig& c, const std::string& name, const std::string& v, const fs::path&) {
                   c.run.hidden = to_sizes(name, v);
                 }});
    f.push_back(u64_field("train", "bits_per_param", [](ExperimentConfig& c) -> std::uint64_t& { return c.run.bits_per_param; }));
    f.push_back(u64_field("train", "bits_per_sample", [](ExperimentConfig& c) -> std::uint64_t& { return c.run.bits_per_sample; }));

    f.push_back(size_field("kip", "support_size", [](ExperimentConfig& c) -> std::size_t& { return c.kip.support_size; }));
    f.push_back(real_field("kip", "lambda", [](ExperimentConfig& c) -> double& { return c.kip.lambda; }));
    f.push_back(real_field("kip", "learning_rate", [](ExperimentConfig& c) -> double& { return c.kip.learning_rate; }));
    f.push_back(size_field("kip", "iterations", [](ExperimentConfig& c) -> std::size_t& { return c.kip.iterations; }));
    f.push_back(size_field("kip", "target_batch", [](ExperimentConfig& c) -> std::size_t& { return c.kip.target_batch; }));
    f.push_back(u64_field("kip", "seed", [](ExperimentConfig& c) -> std::uint64_t& { return c.kip.seed; }));

    f.push_back(size_field("cluster", "k", [](ExperimentConfig& c) -> std::size_t& { return c.k; }));
    f.push_back(size_field("cluster", "kmeans_iters", [](ExperimentConfig& c) -> std::size_t& { return c.run.kmeans_iters; }));

    f.push_back(size_field("fedseq", "groups", [](ExperimentConfig& c) -> std::size_t& { return c.fedseq_groups; }));
    f.push_back(size_field("fedseq", "group_size", [](ExperimentConfig& c) -> std::size_t& { return c.fedseq_group_size; }));
    return f;
  }();
  return fields;
}

void sync_derived(ExperimentConfig& c) {
  c.partition.total_classes = c.data.classes;
  c.partition.seed = c.seed;
  c.run.seed = c.seed;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  run.local_unit = LocalUnit::kEpochs;
  run.batch_size = 4;
  sync_derived(*this);
}

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& msg) { throw ConfigError(msg); };
  if (data.source != "synthetic" && data.source != "idx") {
    bad("data.source: expected 'synthetic' or 'idx', got '" + data.source + "'");
  }
  if (data.classes < 1) bad("data.classes must be >= 1");
  if (data.source == "synthetic") {
    if (data.dim < 1) bad("data.dim must be >= 1");
    if (!(data.separation > 0.0)) bad("data.separation must be positive");
    if (!(data.sigma > 0.0)) bad("data.sigma must be positive");
    if (data.per_class < 1) bad("data.per_class must be >= 1");
  } else if (data.idx_images.empty() || data.idx_labels.empty()) {
    bad("data.idx_images and data.idx_labels are required when data.source = idx");
  }
  if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0)) bad("data.test_fraction must lie in (0, 1)");
  if (data.probe_size < 1) bad("data.probe_size must be >= 1");
  if (!(data.probe_shift >= 0.0)) bad("data.probe_shift must be non-negative");
  if (partition.clients < 1) bad("partition.clients must be >= 1");
  if (partition.classes_per_client < 1) bad("partition.classes_per_client must be >= 1");
  if (partition.classes_per_client > data.classes) {
    bad("partition.classes_per_client (C = " + std::to_string(partition.classes_per_client) +
        ") exceeds data.classes (" + std::to_string(data.classes) + ")");
  }
  if (partition.samples_per_client < partition.classes_per_client) {
    bad("partition.samples_per_client must be >= classes_per_client");
  }
  try {
    run.validate();
    kip.validate();
  } catch (const DomainError& e) {
    bad(e.what());
  }
  if (run.algorithm == Algorithm::kHfldd) {
    if (partition.clients < 2) bad("hfldd needs partition.clients >= 2");
    if (k < 2 || k > partition.clients) {
      bad("cluster.k must lie in [2, partition.clients], got " + std::to_string(k));
    }
  }
  if (run.algorithm == Algorithm::kFedSeq &&
      fedseq_groups * fedseq_group_size != partition.clients) {
    bad("fedseq.groups × fedseq.group_size must equal partition.clients");
  }
}

ExperimentConfig::Table ExperimentConfig::to_table() const {
  Table t;
  for (const auto& f : schema()) t[f.section][f.key] = f.get(*this);
  return t;
}

ExperimentConfig ExperimentConfig::from_table(const Table& t, const fs::path& base_dir) {
  ExperimentConfig c;
  for (const auto& [section, keys] : t) {
    for (const auto& [key, value] : keys) {
      const auto it = std::find_if(schema().begin(), schema().end(), [&](const Field& f) {
        return section == f.section && key == f.key;
      });
      const std::string name = section + "." + key;
      if (it == schema().end()) throw ConfigError("unknown configuration key '" + name + "'");
      it->set(c, name, value, base_dir);
    }
  }
  sync_derived(c);
  return c;
}

ExperimentConfig ExperimentConfig::parse_ini(std::istream& in, const fs::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
  }
  Table t;
  for (const auto& [section, node] : tree) {
    if (node.empty()) throw ConfigError("key '" + section + "' must belong to a section");
    for (const auto& [key, leaf] : node) t[section][key] = leaf.get_value<std::string>();
  }
  return from_table(t, base_dir);
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file " + path.string());
  return parse_ini(in, path.parent_path());
}

std::string ExperimentConfig::to_ini() const {
  std::string out;
  for (const auto& [section, keys] : to_table()) {
    out += "[" + section + "]\n";
    for (const auto& [key, value] : keys) out += key + " = " + value + "\n";
    out += "\n";
  }
  return out;
}

ExperimentData prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  LabeledDataset pool;
  std::optional<GaussianClasses> classes;
  if (cfg.data.source == "synthetic") {
    SeededRng rng(cfg.seed, kDataStream);
    classes = make_gaussian_classes(cfg.data.classes, cfg.data.dim, cfg.data.separation, rng);
    classes->sigma = cfg.data.sigma;
    pool = sample_gaussian_classes(*classes, cfg.data.per_class, rng);
  } else {
    pool = load_idx(cfg.data.idx_images, cfg.data.idx_labels, cfg.data.classes);
  }
  SeededRng split_rng(cfg.seed, kSplitStream);
  auto [train, test] = train_test_split(pool, cfg.data.test_fraction, split_rng);
  SeededRng probe_rng(cfg.seed, kProbeStream);
  ExperimentData d;
  if (classes) {
    // The probe set comes from a related but shifted distribution, never from client data.
    const GaussianClasses shifted = shift_class_means(*classes, cfg.data.probe_shift, probe_rng);
    const std::size_t per_class = (cfg.data.probe_size + cfg.data.classes - 1) / cfg.data.classes;
    d.probe = make_probe_dataset(sample_gaussian_classes(shifted, per_class, probe_rng),
                                 cfg.data.probe_size, probe_rng);
  } else {
    d.probe = make_probe_dataset(train, cfg.data.probe_size, probe_rng);
  }
  d.test = std::move(test);
  d.clients = make_clients(partition_label_skew(train, cfg.partition));
  return d;
}

RunResult run_experiment(const ExperimentConfig& cfg, const ExperimentData& data) {
  switch (cfg.run.algorithm) {
    case Algorithm::kHfldd: return run_hfldd(data.clients, data.probe, data.test, cfg.run, cfg.kip, cfg.k);
    case Algorithm::kFedAvg: return run_fedavg(data.clients, data.test, cfg.run);
    case Algorithm::kFedProx: return run_fedprox(data.clients, data.test, cfg.run);
    case Algorithm::kFedSeq:
      return run_fedseq_lite(data.clients, data.test, cfg.run, cfg.fedseq_groups, cfg.fedseq_group_size);
  }
  throw DomainError("unknown algorithm");
}

RunResult run_experiment(const ExperimentConfig& cfg) { return run_experiment(cfg, prepare_data(cfg)); }

void write_metrics_csv(const std::vector<RoundMetrics>& metrics, std::ostream& out) {
  out << "round,accuracy,loss,cumulative_bits\n";
  for (const auto& m : metrics) {
    out << m.round << ',' << fmt_double(m.accuracy) << ',' << fmt_double(m.loss) << ','
        << m.cumulative_bits << '\n';
  }
}

std::vector<RoundMetrics> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "round,accuracy,loss,cumulative_bits") {
    throw ConfigError("metrics.csv: unexpected header");
  }
  std::vector<RoundMetrics> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell[4];
    for (auto& c : cell) std::getline(ss, c, ',');
    out.push_back({static_cast<std::size_t>(to_u64("round", cell[0])), to_double("accuracy", cell[1]),
                   to_double("loss", cell[2]), to_u64("cumulative_bits", cell[3])});
  }
  return out;
}

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    if (opts.source.extension() == ".json") {
      const json manifest = json::parse(read_text(opts.source));
      if (!manifest.contains("config")) throw ConfigError(opts.source.string() + ": no 'config' entry");
      cfg = ExperimentConfig::from_table(manifest.at("config").get<ExperimentConfig::Table>());
    } else {
      cfg = ExperimentConfig::load(opts.source);
    }
    if (opts.output) cfg.output = *opts.output;
    cfg.validate();
  } catch (const json::exception& e) {
    err << "config error: " << opts.source.string() << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  const fs::path dir = cfg.output;
  std::vector<fs::path> written;
  bool created_dir = false;
  try {
    const auto start = std::chrono::steady_clock::now();
    const RunResult r = run_experiment(cfg);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!fs::exists(dir)) created_dir = fs::create_directories(dir);
    auto emit = [&](const char* name, const std::string& text) {
      written.push_back(dir / name);
      write_text(dir / name, text);
    };
    std::ostringstream csv;
    write_metrics_csv(r.metrics, csv);
    emit("metrics.csv", csv.str());
    if (r.topology) emit("topology.json", r.topology->to_json() + "\n");
    const AuditReport audit = ledger_audit(r.ledger, r.cost_model, cfg.run.algorithm);
    emit("cost.json", audit.to_json() + "\n");

    json manifest;
    manifest["name"] = cfg.name;
    manifest["algorithm"] = std::string(to_string(cfg.run.algorithm));
    manifest["seed"] = cfg.seed;
    manifest["git_describe"] = HFLDD_GIT_DESCRIBE;
    manifest["config"] = cfg.to_table();
    manifest["wall_time_seconds"] = wall;
    json files = json::array({"metrics.csv", "cost.json"});
    if (r.topology) files.push_back("topology.json");
    manifest["outputs"] = files;
    emit("manifest.json", manifest.dump(2) + "\n");

    out << "run '" << cfg.name << "' (" << to_string(cfg.run.algorithm) << ", seed " << cfg.seed
        << "): final accuracy " << std::fixed << std::setprecision(4) << r.metrics.back().accuracy
        << ", traffic " << std::setprecision(3) << audit.megabytes_decimal() << " MB -> "
        << dir.string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    if (created_dir) fs::remove(dir, ec);
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

namespace {

struct LoadedRun {
  fs::path dir;
  std::string algorithm;
  std::vector<RoundMetrics> metrics;
};

LoadedRun load_run(const fs::path& dir) {
  for (const char* name : {"metrics.csv", "manifest.json"}) {
    if (!fs::exists(dir / name)) {
      throw ConfigError("run directory '" + dir.string() + "' has no " + name);
    }
  }
  LoadedRun r;
  r.dir = dir;
  try {
    r.algorithm = json::parse(read_text(dir / "manifest.json")).at("algorithm").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError("run directory '" + dir.string() + "': bad manifest.json: " + e.what());
  }
  std::ifstream in(dir / "metrics.csv");
  r.metrics = read_metrics_csv(in);
  if (r.metrics.empty()) throw ConfigError("run directory '" + dir.string() + "': empty metrics.csv");
  return r;
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

std::string fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

}  // namespace

int cmd_compare(const CompareOptions& opts, std::ostream& out, std::ostream& err) {
  std::vector<LoadedRun> runs;
  try {
    if (opts.runs.size() < 2) throw ConfigError("compare needs at least two run directories");
    for (const auto& d : opts.runs) runs.push_back(load_run(d));
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  double target = std::numeric_limits<double>::infinity();
  if (opts.target) {
    target = *opts.target;
  } else {
    for (const auto& r : runs) {
      double best = 0.0;
      for (const auto& m : r.metrics) best = std::max(best, m.accuracy);
      target = std::min(target, best);
    }
  }

  struct Row {
    std::optional<RoundMetrics> hit;
  };
  std::vector<Row> rows;
  for (const auto& r : runs) {
    Row row;
    for (const auto& m : r.metrics) {
      if (m.accuracy >= target) {
        row.hit = m;
        break;
      }
    }
    rows.push_back(row);
  }

  out << "target accuracy: " << fixed(target, 4) << '\n';
  out << pad("run", 28) << pad("algorithm", 13) << pad("final acc", 11) << pad("rounds", 14)
      << pad("traffic (MB)", 14) << "ratio\n";
  std::size_t missed = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    const auto& hit = rows[i].hit;
    std::string rounds = "not reached";
    std::string traffic = "-";
    std::string ratio = "-";
    if (hit) {
      rounds = std::to_string(hit->round);
      traffic = fixed(static_cast<double>(hit->cumulative_bits) / 8e6, 3);
      if (rows[0].hit) {
        ratio = fixed(static_cast<double>(hit->cumulative_bits) /
                          static_cast<double>(rows[0].hit->cumulative_bits), 3) + "X";
      }
    } else {
      ++missed;
    }
    out << pad(r.dir.filename().string().empty() ? r.dir.string() : r.dir.filename().string(), 28)
        << pad(r.algorithm, 13) << pad(fixed(r.metrics.back().accuracy, 4), 11) << pad(rounds, 14)
        << pad(traffic, 14) << ratio << '\n';
  }
  if (missed) out << "note: " << missed << " run(s) did not reach the target accuracy\n";

  if (opts.merged_csv) {
    std::ofstream csv(*opts.merged_csv);
    csv << "run,algorithm,round,accuracy,loss,cumulative_bits\n";
    for (const auto& r : runs) {
      for (const auto& m : r.metrics) {
        csv << r.dir.string() << ',' << r.algorithm << ',' << m.round << ',' << fmt_double(m.accuracy)
            << ',' << fmt_double(m.loss) << ',' << m.cumulative_bits << '\n';
      }
    }
    if (!csv) {
      err << "error: cannot write " << opts.merged_csv->string() << '\n';
      return kExitRuntime;
    }
  }
  return kExitOk;
}

std::string cost_json(const CostModel& c) {
  json in;
  in["clients"] = c.clients;
  in["heads"] = c.heads;
  in["kmeans_k"] = c.kmeans_k;
  in["rounds"] = c.rounds;
  in["fedseq_clusters"] = c.fedseq_clusters;
  in["fedseq_cluster_size"] = c.fedseq_cluster_size;
  in["model_size"] = c.model_size;
  in["probe_size"] = c.probe_size;
  in["classes"] = c.classes;
  in["bits_per_param"] = c.bits_per_param;
  in["bits_per_sample"] = c.bits_per_sample;
  in["distilled_sizes"] = c.distilled_sizes;
  json j;
  j["inputs"] = in;
  const Bits avg = cost_fedavg(c);
  const Bits hf = cost_hfldd(c);
  j["fedavg_bits"] = avg;
  j["hfldd_bits"] = hf;
  j["fedseq_bits"] = cost_fedseq(c);
  j["fedavg_mb"] = static_cast<double>(avg) / 8e6;
  j["hfldd_mb"] = static_cast<double>(hf) / 8e6;
  j["fedseq_mb"] = static_cast<double>(cost_fedseq(c)) / 8e6;
  j["hfldd_over_fedavg"] = avg ? static_cast<double>(hf) / static_cast<double>(avg) : 0.0;
  return j.dump(2);
}

CostModel cost_model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("cost json: ") + e.what());
  }
  const json& in = j.contains("inputs") ? j.at("inputs") : j;
  CostModel c;
  const std::pair<const char*, std::uint64_t*> fields[] = {
      {"clients", &c.clients},           {"heads", &c.heads},
      {"kmeans_k", &c.kmeans_k},         {"rounds", &c.rounds},
      {"fedseq_clusters", &c.fedseq_clusters}, {"fedseq_cluster_size", &c.fedseq_cluster_size},
      {"model_size", &c.model_size},     {"probe_size", &c.probe_size},
      {"classes", &c.classes},           {"bits_per_param", &c.bits_per_param},
      {"bits_per_sample", &c.bits_per_sample}};
  try {
    for (const auto& [key, dst] : fields) {
      if (in.contains(key)) *dst = in.at(key).get<std::uint64_t>();
    }
    if (in.contains("distilled_sizes")) {
      c.distilled_sizes = in.at("distilled_sizes").get<std::vector<std::uint64_t>>();
    }
    for (const auto& [key, value] : in.items()) {
      const bool known = key == "distilled_sizes" ||
                         std::any_of(std::begin(fields), std::end(fields),
                                     [&](const auto& f) { return key == f.first; });
      if (!known) throw ConfigError("cost json: unknown input '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("cost json: ") + e.what());
  }
  return c;
}

int cmd_cost(const CostOptions& opts, std::ostream& out, std::ostream& err) {
  CostModel c;
  try {
    if (opts.from_json) {
      c = cost_model_from_json(read_text(*opts.from_json));
    } else if (opts.model) {
      c = *opts.model;
    } else {
      throw ConfigError("cost needs parameter flags or --from-json");
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  if (opts.json) {
    out << cost_json(c) << '\n';
    return kExitOk;
  }
  const Bits hf = cost_hfldd(c);
  const std::pair<const char*, Bits> rows[] = {
      {"fedavg", cost_fedavg(c)}, {"fedseq-lite", cost_fedseq(c)}, {"hfldd", hf}};
  out << pad("algorithm", 14) << pad("bits", 18) << pad("traffic (MB)", 16) << "ratio vs hfldd\n";
  for (const auto& [name, bits] : rows) {
    out << pad(name, 14) << pad(std::to_string(bits), 18)
        << pad(fixed(static_cast<double>(bits) / 8e6, 2), 16)
        << (hf ? fixed(static_cast<double>(bits) / static_cast<double>(hf), 2) + "X" : "-") << '\n';
  }
  const Bits avg = cost_fedavg(c);
  out << "hfldd / fedavg: "
      << (avg ? fixed(static_cast<double>(hf) / static_cast<double>(avg), 4) : std::string("-")) << '\n';
  return kExitOk;
}

}  // namespace hfldd::cli
