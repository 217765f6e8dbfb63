#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fwgd/experiment.hpp"

namespace {

fwgd::ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides) {
  fwgd::ConfigEntries entries = fwgd::read_config_file(path);
  const fwgd::ConfigEntries extra = fwgd::parse_overrides(overrides);
  entries.insert(entries.end(), extra.begin(), extra.end());
  return fwgd::build_config(entries);
}

void print_report(const char* name, const fwgd::MetricsReport& r) {
  std::printf("%-9s acc %.4f  nll %.4f  brier %.4f  ece %.4f  T %.4f  feat-sim %.4f\n", name, r.accuracy, r.nll,
              r.brier, r.ece, r.temperature, r.mean_pairwise_feature_similarity);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle ensembles trained by Wasserstein gradient descent in feature space"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Train and evaluate one configuration; extra --key=value flags override config keys");
  std::string train_config;
  train->add_option("config", train_config, "Config file")->required()->check(CLI::ExistingFile);
  train->allow_extras();

  auto* cmp = app.add_subcommand("compare", "Run configs over several seeds and print mean/std per metric as CSV");
  std::vector<std::string> cmp_configs;
  std::size_t seeds = 1;
  std::string cmp_out;
  cmp->add_option("configs", cmp_configs, "Config files")->required()->check(CLI::ExistingFile);
  cmp->add_option("--seeds", seeds, "Seeds per config")->check(CLI::PositiveNumber);
  cmp->add_option("--out", cmp_out, "Also write the CSV to this file");
  cmp->allow_extras();

  auto* sanity = app.add_subcommand("sanity-gaussian", "Sample a correlated Gaussian and report moment errors");
  std::size_t dim = 2, particles = 100, steps = 5000;
  double lr = 0.05;
  std::uint64_t seed = 0;
  sanity->add_option("--dim", dim)->check(CLI::PositiveNumber);
  sanity->add_option("--particles", particles)->check(CLI::PositiveNumber);
  sanity->add_option("--steps", steps);
  sanity->add_option("--lr", lr)->check(CLI::PositiveNumber);
  sanity->add_option("--seed", seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const fwgd::ExperimentConfig cfg = load(train_config, train->remaining());
      const fwgd::ExperimentResult r = fwgd::run_experiment(cfg);
      print_report("clean", r.clean);
      if (r.corrupted) print_report("corrupted", *r.corrupted);
      std::printf("outputs in %s\n", r.output_dir.string().c_str());
    } else if (*cmp) {
      std::vector<fwgd::ExperimentConfig> configs;
      std::vector<std::string> labels;
      for (const std::string& path : cmp_configs) {
        configs.push_back(load(path, cmp->remaining()));
        labels.push_back(std::filesystem::path(path).stem().string());
      }
      const std::string csv = fwgd::compare(configs, labels, seeds);
      std::cout << csv;
      if (!cmp_out.empty()) {
        std::ofstream out(cmp_out);
        if (!(out << csv)) throw std::runtime_error("cannot write " + cmp_out);
      }
    } else if (*sanity) {
      const fwgd::SanityResult r = fwgd::run_gaussian_sanity(dim, particles, steps, lr, seed);
      std::printf("mean error %.6f\ncovariance error %.6f\n", r.mean_error, r.covariance_error);
    }
  } catch (const fwgd::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const fwgd::TrainingDiverged& e) {
    std::fprintf(stderr, "error: training diverged at step %zu: %s\n", e.step(), e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
