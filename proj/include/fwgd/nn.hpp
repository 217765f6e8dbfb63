#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fwgd/linalg.hpp"

namespace fwgd {

/// Feature extractor h(·; w) of one ensemble member: an MLP with ReLU after
/// every layer, including the last, so features are nonnegative.
///
/// Parameters live in one flat vector, layer by layer: weights (fan_in ×
/// fan_out, row-major) followed by biases (fan_out).
class Particle {
 public:
  Particle() = default;
  /// `layer_sizes` = {input_dim, hidden..., feature_dim}; at least two entries.
  Particle(std::vector<std::size_t> layer_sizes, Vector params);

  /// He-uniform fan-in initialization with zero biases. The stream is keyed
  /// by (seed, index) so every member starts from distinct weights.
  static Particle init(std::vector<std::size_t> layer_sizes, std::uint64_t seed,
                       std::size_t index);
  static std::size_t parameter_count(std::span<const std::size_t> layer_sizes);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t feature_dim() const { return sizes_.back(); }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  std::size_t parameter_count() const { return params_.size(); }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
  }
  double weight(std::size_t layer, std::size_t in, std::size_t out) const {
    return params_[weight_offset(layer) + in * sizes_[layer + 1] + out];
  }
  double& weight(std::size_t layer, std::size_t in, std::size_t out) {
    return params_[weight_offset(layer) + in * sizes_[layer + 1] + out];
  }
  double bias(std::size_t layer, std::size_t out) const {
    return params_[bias_offset(layer) + out];
  }
  double& bias(std::size_t layer, std::size_t out) { return params_[bias_offset(layer) + out]; }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  Vector params_;
};

/// Linear head c(·; θ): logits = h·W + b with W of shape H×C. In feature
/// space inference a single instance is shared by all members.
class Classifier {
 public:
  Classifier() = default;
  Classifier(std::size_t feature_dim, std::size_t num_classes);
  Classifier(std::size_t feature_dim, std::size_t num_classes, Vector params);
  static Classifier init(std::size_t feature_dim, std::size_t num_classes, std::uint64_t seed,
                         std::size_t index);

  std::size_t feature_dim() const { return features_; }
  std::size_t num_classes() const { return classes_; }
  std::size_t parameter_count() const { return params_.size(); }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  double weight(std::size_t f, std::size_t c) const { return params_[f * classes_ + c]; }
  double& weight(std::size_t f, std::size_t c) { return params_[f * classes_ + c]; }
  double bias(std::size_t c) const { return params_[features_ * classes_ + c]; }
  double& bias(std::size_t c) { return params_[features_ * classes_ + c]; }
  Matrix weight_matrix() const;

 private:
  std::size_t features_ = 0;
  std::size_t classes_ = 0;
  Vector params_;
};

using SharedClassifier = Classifier;

struct FeatureBatch {
  std::size_t particle = 0;
  Matrix values;  ///< B×H, entries ≥ 0
};

struct LogitBatch {
  std::size_t particle = 0;
  Matrix values;  ///< B×C
};

/// Layer activations kept from a forward pass: activations[0] is the input,
/// activations.back() the features.
struct ForwardCache {
  std::vector<Matrix> activations;
  const Matrix& features() const { return activations.back(); }
};

ForwardCache forward_cached(const Particle& p, const Matrix& x);
FeatureBatch forward_features(const Particle& p, const Matrix& x, std::size_t index = 0);
LogitBatch forward_classifier(const Classifier& c, const FeatureBatch& h);
Matrix classifier_logits(const Classifier& c, const Matrix& features);

struct LikelihoodGrads {
  double loglik = 0.0;
  Matrix g_feat;   ///< ∂ loglik / ∂ features, B×H
  Vector g_theta;  ///< ∂ loglik / ∂ classifier params (classifier layout)
  Matrix g_logit;  ///< onehot(y) − softmax(logits), B×C
};

/// Log-likelihood of labels under softmax(logits) and its logit gradient.
/// Both are sums over the batch.
struct LogitGrads {
  double loglik = 0.0;
  Matrix g_logit;
};
LogitGrads logit_loglik_and_grads(const Matrix& logits, std::span<const int> labels);

struct ClassifierCotangents {
  Matrix g_feat;
  Vector g_theta;
};
/// Pulls a logit cotangent back through the linear head.
ClassifierCotangents classifier_backward(const Classifier& c, const Matrix& features,
                                         const Matrix& g_logit);

LikelihoodGrads loglik_and_grads(const Classifier& c, const FeatureBatch& h,
                                 std::span<const int> labels);
LikelihoodGrads loglik_and_grads(const Classifier& c, const Matrix& features,
                                 std::span<const int> labels);

/// Number of rows whose softmax argmax (recovered from g_logit) equals the label.
std::size_t count_correct(const Matrix& g_logit, std::span<const int> labels);

/// Vector-Jacobian product (∂ vec(h) / ∂ w)ᵀ · vec(v_feat) in particle layout.
Vector backprop_to_weights(const Particle& p, const ForwardCache& cache, const Matrix& v_feat);
Vector backprop_to_weights(const Particle& p, const Matrix& x, const Matrix& v_feat);

Matrix softmax_rows(const Matrix& logits);

/// Mean of member softmax probabilities with one shared head.
Matrix ensemble_predict(std::span<const Particle> particles, const Classifier& c, const Matrix& x);
/// Mean of member softmax probabilities with per-member heads.
Matrix ensemble_predict(std::span<const Particle> particles, std::span<const Classifier> heads,
                        const Matrix& x);

/// Logits of every member; `heads` holds one shared head or one per member.
std::vector<Matrix> member_logits(std::span<const Particle> particles,
                                  std::span<const Classifier> heads, const Matrix& x);

}  // namespace fwgd
