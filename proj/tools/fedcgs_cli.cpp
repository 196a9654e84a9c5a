/*
 * Copyright 2026 The fedcgs Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end for the one-shot federated simulator.
//
//   fedcgs generate     write synthetic FCGS feature files
//   fedcgs split        partition a feature file into per-client files
//   fedcgs simulate     one-shot round: statistics -> aggregation -> head
//   fedcgs personalize  local training regularized by global prototypes

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fedcgs/fedcgs.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SyntheticOptions {
  std::uint32_t classes = 10;
  std::uint32_t dim = 32;
  std::uint32_t samples_per_class = 200;
  double mean_scale = 3.0;
  double cov_scale = 1.0;
  std::uint64_t seed = 0;
  bool xor_layout = false;

  void add_to(CLI::App* app) {
    app->add_option("--classes", classes, "Number of classes C")->check(CLI::PositiveNumber);
    app->add_option("--dim", dim, "Feature dimension d")->check(CLI::PositiveNumber);
    app->add_option("--samples-per-class", samples_per_class, "Training samples per class")
        ->check(CLI::PositiveNumber);
    app->add_option("--mean-scale", mean_scale, "Norm of each class mean")->check(CLI::PositiveNumber);
    app->add_option("--cov-scale", cov_scale, "Shared isotropic variance")->check(CLI::PositiveNumber);
    app->add_option("--data-seed", seed, "Generator seed");
    app->add_flag("--xor", xor_layout, "Two-class 2-D XOR layout instead of Gaussian classes");
  }

  /// Train and test sets from one draw: alternate rows within each class go
  /// to test, so both halves share the class means.
  std::pair<fedcgs::LabeledFeatureSet, fedcgs::LabeledFeatureSet> draw() const {
    if (xor_layout)
      return {fedcgs::generate_xor(samples_per_class, 2.0, 0.5, seed),
              fedcgs::generate_xor(samples_per_class, 2.0, 0.5, fedcgs::mix64(seed))};
    const fedcgs::SyntheticSpec spec{classes, dim, 2 * samples_per_class, mean_scale, cov_scale, seed};
    const auto all = fedcgs::generate_synthetic(spec);
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < all.size(); ++i)
      ((i % spec.samples_per_class) % 2 == 0 ? train : test).push_back(i);
    return {fedcgs::subset(all, train), fedcgs::subset(all, test)};
  }
};

void emit(const json& doc, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw fedcgs::IoError("cannot open '" + path + "' for writing");
  out << doc.dump(2) << '\n';
}

fedcgs::PartitionSpec make_partition(std::uint32_t clients, const std::string& scheme, double alpha,
                                     std::uint64_t seed) {
  fedcgs::PartitionSpec spec{.num_clients = clients, .seed = seed};
  if (scheme == "dirichlet") spec.scheme = fedcgs::DirichletScheme{alpha};
  else if (scheme == "uniform") spec.scheme = fedcgs::UniformScheme{};
  else throw fedcgs::Error("unknown partition scheme '" + scheme + "'");
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-shot federated learning from aggregated feature statistics"};
  app.require_subcommand(1);

  // generate -----------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "Write synthetic train/test feature files");
  SyntheticOptions gen_opts;
  gen_opts.add_to(gen);
  std::string gen_train;
  std::string gen_test;
  gen->add_option("--out", gen_train, "Training feature file")->required();
  gen->add_option("--test-out", gen_test, "Test feature file");

  // split --------------------------------------------------------------------
  auto* split = app.add_subcommand("split", "Partition a feature file into per-client files");
  std::string split_input;
  std::string split_test_input;
  std::string split_prefix;
  std::uint32_t split_clients = 10;
  std::string split_scheme = "dirichlet";
  double split_alpha = 0.5;
  std::uint64_t split_seed = 0;
  std::size_t personal_train = 0;
  std::size_t personal_test = 0;
  double personal_uniform = 0.2;
  std::uint32_t personal_dominant = 2;
  split->add_option("--input", split_input, "Feature file to split")->required()->check(CLI::ExistingFile);
  split->add_option("--prefix", split_prefix, "Output prefix; writes <prefix><i>.fcgs")->required();
  split->add_option("--clients", split_clients, "Number of clients M")->check(CLI::PositiveNumber);
  split->add_option("--scheme", split_scheme, "dirichlet | uniform | personal")
      ->check(CLI::IsMember({"dirichlet", "uniform", "personal"}));
  split->add_option("--alpha", split_alpha, "Dirichlet concentration")->check(CLI::PositiveNumber);
  split->add_option("--seed", split_seed, "Partition seed");
  split->add_option("--test-input", split_test_input, "Test pool for the personal scheme");
  split->add_option("--train-per-client", personal_train, "Personal scheme: train samples per client");
  split->add_option("--test-per-client", personal_test, "Personal scheme: test samples per client");
  split->add_option("--uniform-fraction", personal_uniform, "Personal scheme: share drawn from all classes")
      ->check(CLI::Range(0.0, 1.0));
  split->add_option("--dominant-classes", personal_dominant, "Personal scheme: dominant classes per client")
      ->check(CLI::PositiveNumber);

  // simulate -----------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "Run one global one-shot round and report");
  SyntheticOptions sim_opts;
  sim_opts.add_to(sim);
  std::string sim_train;
  std::string sim_test;
  std::uint32_t sim_clients = 10;
  std::string sim_scheme = "dirichlet";
  double sim_alpha = 0.5;
  std::uint64_t sim_seed = 0;
  std::string sim_secure = "off";
  std::size_t expand_dim = 0;
  std::uint64_t expand_seed = 0;
  std::string expand_activation = "relu";
  double ridge = fedcgs::kDefaultRidgeScale;
  std::string report_path;
  std::string save_global;
  std::string save_head;
  sim->add_option("--train", sim_train, "Training feature file (synthetic data if omitted)")
      ->check(CLI::ExistingFile);
  sim->add_option("--test", sim_test, "Test feature file")->check(CLI::ExistingFile);
  sim->add_option("--clients", sim_clients, "Number of clients M")->check(CLI::PositiveNumber);
  sim->add_option("--scheme", sim_scheme, "dirichlet | uniform")
      ->check(CLI::IsMember({"dirichlet", "uniform"}));
  sim->add_option("--alpha", sim_alpha, "Dirichlet concentration")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "Partition seed");
  sim->add_option("--secure-agg", sim_secure, "off | counts | full")
      ->check(CLI::IsMember({"off", "counts", "full"}));
  sim->add_option("--expand-dim", expand_dim, "Random feature expansion width (0 = off)");
  sim->add_option("--expand-seed", expand_seed, "Shared projection seed");
  sim->add_option("--expand-activation", expand_activation, "relu | tanh | none")
      ->check(CLI::IsMember({"relu", "tanh", "none"}));
  sim->add_option("--ridge", ridge, "Covariance ridge relative to trace/d")->check(CLI::NonNegativeNumber);
  sim->add_option("--report", report_path, "Write the JSON report here (default stdout)");
  sim->add_option("--save-global", save_global, "Write global statistics (JSON + .bin sidecar)");
  sim->add_option("--save-head", save_head, "Write the classifier head (JSON + .bin sidecar)");

  // personalize --------------------------------------------------------------
  auto* pers = app.add_subcommand("personalize", "Prototype-regularized local training per client");
  std::string pers_global;
  std::vector<std::string> pers_train;
  std::vector<std::string> pers_test;
  std::size_t hidden = 64;
  std::uint64_t init_seed = 0;
  fedcgs::PersonalizeConfig pcfg;
  std::string pers_report;
  pers->add_option("--global", pers_global, "Global statistics JSON")->required()->check(CLI::ExistingFile);
  pers->add_option("--train", pers_train, "Per-client training feature files")->required()
      ->check(CLI::ExistingFile);
  pers->add_option("--test", pers_test, "Per-client test feature files (same order)")
      ->check(CLI::ExistingFile);
  pers->add_option("--hidden", hidden, "Hidden width of the local extractor")->check(CLI::PositiveNumber);
  pers->add_option("--init-seed", init_seed, "Shared model initialization seed");
  pers->add_option("--lambda", pcfg.lambda, "Regularizer weight")->check(CLI::NonNegativeNumber);
  pers->add_option("--lr", pcfg.learning_rate, "Learning rate")->check(CLI::PositiveNumber);
  pers->add_option("--epochs", pcfg.epochs, "Local epochs");
  pers->add_option("--batch-size", pcfg.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  pers->add_option("--momentum", pcfg.momentum, "Momentum in [0, 1)")->check(CLI::Range(0.0, 0.999999));
  pers->add_option("--seed", pcfg.seed, "Shuffle seed");
  pers->add_option("--report", pers_report, "Write the JSON metrics here (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto [train, test] = gen_opts.draw();
      fedcgs::write_feature_file(train, gen_train);
      if (!gen_test.empty()) fedcgs::write_feature_file(test, gen_test);
      std::cerr << "wrote " << train.size() << " training rows (d=" << train.dim()
                << ", C=" << train.num_classes << ")\n";
    } else if (*split) {
      const auto data = fedcgs::read_feature_file(split_input);
      std::vector<fedcgs::LabeledFeatureSet> train_parts;
      std::vector<fedcgs::LabeledFeatureSet> test_parts;
      if (split_scheme == "personal") {
        if (split_test_input.empty()) throw fedcgs::Error("--test-input is required for --scheme personal");
        const auto test = fedcgs::read_feature_file(split_test_input);
        const fedcgs::PersonalSplitSpec spec{split_clients, personal_train, personal_test,
                                             personal_uniform, personal_dominant, split_seed};
        for (const auto& c : fedcgs::personal_split(data, test, spec)) {
          train_parts.push_back(fedcgs::subset(data, c.train));
          test_parts.push_back(fedcgs::subset(test, c.test));
        }
      } else {
        train_parts = fedcgs::partition(data, make_partition(split_clients, split_scheme, split_alpha, split_seed));
      }
      for (std::size_t i = 0; i < train_parts.size(); ++i) {
        if (train_parts[i].size() == 0) {
          std::cerr << "client " << i << " received no samples; no file written\n";
          continue;
        }
        fedcgs::write_feature_file(train_parts[i], split_prefix + std::to_string(i) + ".fcgs");
        if (i < test_parts.size() && test_parts[i].size() > 0)
          fedcgs::write_feature_file(test_parts[i], split_prefix + std::to_string(i) + ".test.fcgs");
      }
    } else if (*sim) {
      fedcgs::LabeledFeatureSet train;
      fedcgs::LabeledFeatureSet test;
      if (sim_train.empty()) {
        std::tie(train, test) = sim_opts.draw();
      } else {
        train = fedcgs::read_feature_file(sim_train);
        test = sim_test.empty() ? train : fedcgs::read_feature_file(sim_test);
      }
      fedcgs::SimulationConfig cfg;
      cfg.partition = make_partition(sim_clients, sim_scheme, sim_alpha, sim_seed);
      cfg.secure = fedcgs::parse_secure_mode(sim_secure);
      cfg.ridge_scale = ridge;
      if (expand_dim > 0)
        cfg.expansion = fedcgs::ExpansionConfig{train.dim(), expand_dim, expand_seed,
                                                fedcgs::parse_activation(expand_activation)};
      const auto result = fedcgs::simulate(train, test, cfg);
      auto doc = result.report.to_json();
      doc["config"]["train"] = sim_train.empty() ? "synthetic" : sim_train;
      doc["num_train"] = train.size();
      doc["num_test"] = test.size();
      emit(doc, report_path);
      if (!save_global.empty()) fedcgs::write_global_statistics(result.global, save_global);
      if (!save_head.empty()) fedcgs::write_head(result.head, save_head);
    } else if (*pers) {
      if (!pers_test.empty() && pers_test.size() != pers_train.size())
        throw fedcgs::Error("--test must list one file per --train file");
      const auto global = fedcgs::read_global_statistics(pers_global);
      const auto protos = fedcgs::PrototypeSet::from_global(global);
      json clients = json::array();
      for (std::size_t i = 0; i < pers_train.size(); ++i) {
        const auto train = fedcgs::read_feature_file(pers_train[i]);
        const auto model = fedcgs::init_mlp(train.dim(), hidden, global.dim(), global.num_classes(), init_seed);
        const auto result = fedcgs::local_train(model, train, protos, pcfg);
        json entry = {{"client", i},
                      {"train_file", pers_train[i]},
                      {"train_accuracy", fedcgs::accuracy(result.model, train)},
                      {"alignment_gap", fedcgs::prototype_alignment_gap(result.model, train, protos)},
                      {"loss_trace", result.loss_trace},
                      {"regularizer_trace", result.regularizer_trace}};
        if (!pers_test.empty()) {
          const auto test = fedcgs::read_feature_file(pers_test[i]);
          entry["test_file"] = pers_test[i];
          entry["test_accuracy"] = fedcgs::accuracy(result.model, test);
        }
        clients.push_back(std::move(entry));
      }
      emit({{"lambda", pcfg.lambda},
            {"learning_rate", pcfg.learning_rate},
            {"epochs", pcfg.epochs},
            {"batch_size", pcfg.batch_size},
            {"momentum", pcfg.momentum},
            {"clients", clients}},
           pers_report);
    }
  } catch (const fedcgs::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
