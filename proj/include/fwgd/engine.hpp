#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fwgd/linalg.hpp"
#include "fwgd/nn.hpp"
#include "fwgd/priors_kernels.hpp"
#include "fwgd/repulsion.hpp"

namespace fwgd {

/// Where the particles live. `deep_ensembles` has no interaction terms.
enum class InferenceSpace { feature, weight, function, deep_ensembles };

std::string to_string(InferenceSpace s);
InferenceSpace parse_inference_space(std::string_view name);

enum class OptimizerKind { nesterov, sgd };

struct TrainConfig {
  InferenceSpace space = InferenceSpace::feature;
  std::size_t ensemble_size = 10;

  // Model: input → hidden... → feature_dim, all ReLU, then a linear head.
  std::vector<std::size_t> hidden_layers{64};
  std::size_t feature_dim = 64;

  PriorSpec prior{PriorFamily::half_cauchy, 1e-3};
  /// Multiplier on the prior gradient inside the update direction.
  double prior_grad_scale = 1.0;
  KernelSpec kernel;
  std::size_t projection_dim = 5;
  bool repulsion = true;
  /// Unset: on for feature and function space, off for weight space.
  std::optional<bool> project_repulsion;
  /// Deep ensembles only; feature space always shares, weight and function
  /// space never do. Unset means independent heads.
  std::optional<bool> share_classifier;

  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double base_lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<std::size_t> lr_decay_epochs;
  double lr_decay_ratio = 0.1;
  OptimizerKind optimizer = OptimizerKind::nesterov;
  std::uint64_t seed = 0;

  void validate() const;
  bool uses_projection() const;
  bool shares_classifier() const;
};

/// Default prior for a space: half-Cauchy on features, normal on weights,
/// Cauchy on logits, with the matching inverse scales.
PriorSpec default_prior(InferenceSpace space);

/// Step size for a (0-based) epoch.
double lr_at(const TrainConfig& cfg, std::size_t epoch);

struct Ensemble {
  std::vector<Particle> particles;
  /// One entry when the head is shared, otherwise one per particle.
  std::vector<Classifier> heads;

  std::size_t size() const { return particles.size(); }
  bool shared_head() const { return heads.size() == 1; }
  const Classifier& head(std::size_t i) const { return shared_head() ? heads[0] : heads[i]; }
  Classifier& head(std::size_t i) { return shared_head() ? heads[0] : heads[i]; }
  bool all_finite() const;
};

Ensemble init_ensemble(const TrainConfig& cfg, std::size_t input_dim, std::size_t num_classes);

struct OptimizerState {
  std::vector<Vector> particle_velocity;
  std::vector<Vector> head_velocity;

  static OptimizerState zeros_like(const Ensemble& e);
};

/// velocity ← m·velocity + d;  param ← param + lr·(m·velocity + d)
void nesterov_update(std::span<double> param, std::span<double> velocity,
                     std::span<const double> direction, double lr, double momentum);
/// Dispatches on the optimizer kind; plain SGD ignores momentum.
void apply_update(OptimizerKind kind, std::span<double> param, std::span<double> velocity,
                  std::span<const double> direction, double lr, double momentum);

struct Batch {
  const Matrix& x;
  std::span<const int> y;
  std::size_t size() const { return x.rows(); }
};

struct StepStats {
  double loglik = 0.0;          ///< summed over members and batch
  double repulsion_norm = 0.0;  ///< mean over members of ‖repulsion‖
  std::size_t correct = 0;      ///< member-level correct predictions
  std::size_t predictions = 0;
  std::size_t effective_k = 0;
};

/// Raw parameter direction for one member: (1/B)·vjp − λ·w.
Vector scaled_direction(std::span<const double> vjp, std::span<const double> params,
                        std::size_t batch, double weight_decay);

/// Member direction for a shared head: (1/B)·g_i − λ·θ.
Vector member_head_direction(std::span<const double> head_grad, const Classifier& head,
                             std::size_t batch, double weight_decay);
/// Mean of member directions, summed in ascending member order.
Vector mean_direction(const std::vector<Vector>& directions);

// Feature-space step, split at the points where members exchange data.

/// Independent per-member work before the first exchange.
struct FeatureLocal {
  ForwardCache cache;
  LikelihoodGrads lik;
  Vector prior;  ///< scaled ∇ log p(h_i)

  const Matrix& features() const { return cache.features(); }
};
FeatureLocal feature_local_pass(const Particle& p, const Classifier& head, const Batch& batch,
                                const TrainConfig& cfg);

/// Repulsion in feature space for every member given all members' features
/// and data gradients (row i = member i, flattened B·H).
struct FeatureRepulsion {
  ProjectionBasis basis;
  Matrix z;            ///< projected features, n×k (empty if unprojected)
  Matrix repulsion;    ///< n × B·H
  double bandwidth = 0.0;
};
FeatureRepulsion feature_repulsion(const FlatViews& features, const FlatViews& data_grads,
                                   const TrainConfig& cfg);

/// Parameter direction of one member from its local pass and repulsion row.
Vector feature_member_direction(const Particle& p, const FeatureLocal& local,
                                std::span<const double> repulsion, const TrainConfig& cfg,
                                std::size_t batch);

StepStats feature_wgd_step(Ensemble& e, const Batch& batch, const TrainConfig& cfg,
                           OptimizerState& opt, double lr);
StepStats weight_wgd_step(Ensemble& e, const Batch& batch, const TrainConfig& cfg,
                          OptimizerState& opt, double lr);
StepStats function_wgd_step(Ensemble& e, const Batch& batch, const TrainConfig& cfg,
                            OptimizerState& opt, double lr);
StepStats deep_ensembles_step(Ensemble& e, const Batch& batch, const TrainConfig& cfg,
                              OptimizerState& opt, double lr);
StepStats train_step(Ensemble& e, const Batch& batch, const TrainConfig& cfg, OptimizerState& opt,
                     double lr);

/// Mini-batch index lists for one epoch: a seeded shuffle cut into chunks of
/// `batch_size`; the last chunk may be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n_samples, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double mean_loglik = 0.0;  ///< per sample, averaged over members
  double repulsion_norm = 0.0;
  double accuracy = 0.0;  ///< member-level training accuracy over the epoch
};

/// Owns an ensemble and its optimizer state and runs epochs over a data set.
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::size_t input_dim, std::size_t num_classes);

  EpochRecord run_epoch(const Matrix& x, std::span<const int> y);
  std::vector<EpochRecord> fit(const Matrix& x, std::span<const int> y);

  const Ensemble& ensemble() const { return ensemble_; }
  Ensemble& ensemble() { return ensemble_; }
  const TrainConfig& config() const { return cfg_; }
  std::size_t epochs_done() const { return epoch_; }
  std::size_t steps_done() const { return step_; }

 private:
  TrainConfig cfg_;
  Ensemble ensemble_;
  OptimizerState opt_;
  std::size_t epoch_ = 0;
  std::size_t step_ = 0;
};

/// Gathers the rows listed in `idx`.
Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx);
std::vector<int> gather(std::span<const int> y, std::span<const std::size_t> idx);

struct GaussianTarget {
  Vector mean;
  Matrix covariance;
};

/// Plain-gradient WGD on an analytic Gaussian: driving Σ⁻¹(μ − x) and the
/// unprojected KDE repulsion. Returns the final particles as rows.
Matrix gaussian_wgd_sample(const GaussianTarget& target, const Matrix& initial, std::size_t steps,
                           double lr, const KernelSpec& kernel = {});
/// Same, starting from standard normal draws.
Matrix gaussian_wgd_sample(const GaussianTarget& target, std::size_t n, std::size_t steps,
                           double lr, std::uint64_t seed = 0, const KernelSpec& kernel = {});

}  // namespace fwgd
