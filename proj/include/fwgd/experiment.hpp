#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fwgd/data.hpp"
#include "fwgd/engine.hpp"
#include "fwgd/metrics.hpp"
#include "fwgd/parallel.hpp"

namespace fwgd {

/// Raised for malformed or inconsistent configuration; the message names the key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DatasetKind { multiview, csv };

struct ExperimentConfig {
  TrainConfig train;

  DatasetKind dataset = DatasetKind::multiview;
  MultiViewSpec multiview;
  SplitSizes sizes{2000, 500, 1000};
  /// View zeroed in the corrupted test copy; unset skips corrupted evaluation.
  std::optional<std::size_t> corrupt_view = 1;
  std::filesystem::path csv_path;
  CsvOptions csv;

  std::size_t ece_bins = 15;
  bool temperature_scaling = true;

  std::filesystem::path output_dir = "out";
  /// Write checkpoint.bin every this many epochs as well as at the end; 0 = end only.
  std::size_t checkpoint_every = 0;
  /// 0 runs the sequential engine; otherwise feature-space members are sharded
  /// over this many simulated workers.
  std::size_t workers = 0;

  void validate() const;
};

/// Key/value pairs in file order. Lines are `key = value`; `#` starts a comment.
using ConfigEntries = std::vector<std::pair<std::string, std::string>>;
ConfigEntries parse_config_text(const std::string& text);
ConfigEntries read_config_file(const std::filesystem::path& path);
/// Parses `--key=value` tokens.
ConfigEntries parse_overrides(const std::vector<std::string>& args);

/// Applies entries on top of the defaults. Later entries win. Unknown keys and
/// malformed values raise ConfigError. The prior defaults to the chosen
/// space's default unless `prior` or `prior_scale` is given.
ExperimentConfig build_config(const ConfigEntries& entries);

/// Every key with its effective value, one `key = value` per line. Parsing
/// this text back yields the same configuration.
std::string effective_config_text(const ExperimentConfig& cfg);
/// Names accepted by build_config, in the order effective_config_text uses.
std::vector<std::string> config_keys();

/// `output_dir`, placed under $FWGD_OUTPUT_ROOT when it is relative and the
/// variable is set.
std::filesystem::path resolve_output_dir(const std::filesystem::path& output_dir);

struct ExperimentResult {
  MetricsReport clean;
  std::optional<MetricsReport> corrupted;
  std::vector<EpochRecord> log;
  std::optional<CommReport> comm;
  std::size_t steps = 0;
  Ensemble ensemble;
  std::filesystem::path output_dir;
};

/// Builds the data, trains, fits the temperature on the validation split and
/// evaluates on the clean and corrupted test splits. Writes metrics.json,
/// train_log.csv, checkpoint.bin and effective_config into the output
/// directory when `write_outputs` is set.
ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_outputs = true);

/// The data set an experiment trains and evaluates on, before corruption.
Dataset make_dataset(const ExperimentConfig& cfg);

std::string metrics_json(const ExperimentConfig& cfg, const ExperimentResult& result);
std::string train_log_csv(const std::vector<EpochRecord>& log);

struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> shape;
  Vector data;
};

/// Binary layout, little-endian: magic "FWGDCKPT", u32 version, u32 count,
/// then per array: u32 name length, name bytes, u32 rank, u64 dims, f64 data.
void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);
/// Arrays `particle.<i>` (one per member) and `head.<j>` (one per head).
std::vector<NamedArray> ensemble_arrays(const Ensemble& e);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  ///< population standard deviation
};
MeanStd mean_std(const std::vector<double>& values);

/// Metric names reported by compare, e.g. clean_accuracy, corrupted_nll.
std::vector<std::string> compare_metric_names();
std::vector<double> compare_metric_values(const ExperimentResult& r);

/// Runs every config with seeds seed, seed+1, ..., seed+S−1 (outputs under
/// <output_dir>/seed_<s>) and returns a CSV with one row per config:
/// label, seeds, then mean and std of each metric.
std::string compare(const std::vector<ExperimentConfig>& configs,
                    const std::vector<std::string>& labels, std::size_t seeds);

/// Fixed target for the sampler check: mean (1, −1, 1, ...), diagonal
/// covariance (1, 0.5, 1, ...).
GaussianTarget sanity_target(std::size_t dim);

struct SanityResult {
  Vector sample_mean;
  Matrix sample_covariance;  ///< 1/n normalization
  double mean_error = 0.0;        ///< ‖mean − μ‖₂
  double covariance_error = 0.0;  ///< ‖cov − Σ‖_F
};
SanityResult run_gaussian_sanity(std::size_t dim, std::size_t particles, std::size_t steps,
                                 double lr = 0.05, std::uint64_t seed = 0);

}  // namespace fwgd
