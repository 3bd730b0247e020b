// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#include <iostream>

#include "CLI11.hpp"
#include "experiment.hpp"

using namespace hfldd;
using namespace hfldd::cli;

int main(int argc, char** argv) {
  CLI::App app{"hfldd-sim: hybrid federated learning with dataset distillation, simulated"};
  app.require_subcommand(1);

  RunOptions run;
  std::string run_output;
  auto* run_cmd = app.add_subcommand("run", "Run one experiment from a config file or a manifest.json");
  run_cmd->add_option("source", run.source, "INI configuration file or manifest.json of a previous run")
      ->required();
  run_cmd->add_option("-o,--output", run_output, "Output directory (overrides experiment.output)");

  CompareOptions cmp;
  double target = 0.0;
  std::string merged;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare completed runs: rounds and traffic to a target accuracy");
  cmp_cmd->add_option("runs", cmp.runs, "Run directories; the first is the ratio baseline")->required();
  auto* target_opt = cmp_cmd->add_option("--target", target,
                                         "Target accuracy (default: highest accuracy every run attains)");
  cmp_cmd->add_option("--merged", merged, "Write merged learning curves to this CSV");

  CostModel cm;
  std::uint64_t members = 0;
  std::uint64_t distilled_size = 0;
  std::string from_json;
  bool json_out = false;
  auto* cost_cmd = app.add_subcommand("cost", "Closed-form communication costs of FedAvg, FedSeq-lite and HFLDD");
  auto* clients_opt = cost_cmd->add_option("--clients", cm.clients, "N, number of clients");
  auto* rounds_opt = cost_cmd->add_option("--rounds", cm.rounds, "T, communication rounds");
  auto* model_opt = cost_cmd->add_option("--model-size", cm.model_size, "|w|, model parameters");
  cost_cmd->add_option("--heads", cm.heads, "H, cluster heads");
  cost_cmd->add_option("--k", cm.kmeans_k, "K, homogeneous clusters");
  cost_cmd->add_option("--probe-size", cm.probe_size, "|D_g|, probe samples");
  cost_cmd->add_option("--classes", cm.classes, "N_c, classes");
  cost_cmd->add_option("--bits-per-param", cm.bits_per_param, "B1")->capture_default_str();
  cost_cmd->add_option("--bits-per-sample", cm.bits_per_sample, "B2, bits per distilled sample");
  cost_cmd->add_option("--distilled-sizes", cm.distilled_sizes, "|D~_i| of every non-head member");
  cost_cmd->add_option("--members", members, "Non-head members, each sending --distilled-size samples");
  cost_cmd->add_option("--distilled-size", distilled_size, "Distilled samples per member");
  cost_cmd->add_option("--fedseq-clusters", cm.fedseq_clusters, "O, FedSeq groups");
  cost_cmd->add_option("--fedseq-size", cm.fedseq_cluster_size, "J, clients per FedSeq group");
  cost_cmd->add_option("--from-json", from_json, "Read inputs from JSON printed by --json");
  cost_cmd->add_flag("--json", json_out, "Print JSON instead of a table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (*run_cmd) {
    if (!run_output.empty()) run.output = run_output;
    return cmd_run(run, std::cout, std::cerr);
  }
  if (*cmp_cmd) {
    if (*target_opt) cmp.target = target;
    if (!merged.empty()) cmp.merged_csv = merged;
    return cmd_compare(cmp, std::cout, std::cerr);
  }
  CostOptions cost;
  cost.json = json_out;
  if (!from_json.empty()) {
    cost.from_json = from_json;
  } else {
    if (!*clients_opt || !*rounds_opt || !*model_opt) {
      std::cerr << "error: cost needs --clients, --rounds and --model-size (or --from-json)\n"
                << cost_cmd->help();
      return kExitConfig;
    }
    cm.distilled_sizes.insert(cm.distilled_sizes.end(), members, distilled_size);
    cost.model = cm;
  }
  return cmd_cost(cost, std::cout, std::cerr);
}
