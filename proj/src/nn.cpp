#include "fwgd/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fwgd {

namespace {

constexpr std::uint64_t kParticleStream = 0x5045;    // "PE"
constexpr std::uint64_t kClassifierStream = 0x434c;  // "CL"

// out = relu(in · W + b), W given as a fan_in × fan_out row-major span.
Matrix dense_relu(const Matrix& in, std::span<const double> w, std::span<const double> b) {
  const std::size_t fan_in = in.cols();
  const std::size_t fan_out = b.size();
  Matrix out(in.rows(), fan_out);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    auto out_row = out.row(r);
    std::copy(b.begin(), b.end(), out_row.begin());
    auto in_row = in.row(r);
    for (std::size_t k = 0; k < fan_in; ++k) {
      const double v = in_row[k];
      if (v == 0.0) continue;
      const double* w_row = w.data() + k * fan_out;
      for (std::size_t j = 0; j < fan_out; ++j) out_row[j] += v * w_row[j];
    }
    for (double& v : out_row) v = v > 0.0 ? v : 0.0;
  }
  return out;
}

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) {
    throw std::invalid_argument("label count " + std::to_string(labels.size()) +
                                " != batch size " + std::to_string(rows));
  }
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= classes) {
      throw std::invalid_argument("label " + std::to_string(labels[b]) + " at row " +
                                  std::to_string(b) + " outside [0," + std::to_string(classes) +
                                  ")");
    }
  }
}

}  // namespace

std::size_t Particle::parameter_count(std::span<const std::size_t> sizes) {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) total += (sizes[l] + 1) * sizes[l + 1];
  return total;
}

Particle::Particle(std::vector<std::size_t> layer_sizes, Vector params)
    : sizes_(std::move(layer_sizes)), params_(std::move(params)) {
  if (sizes_.size() < 2) throw std::invalid_argument("Particle: need at least input and output size");
  if (std::any_of(sizes_.begin(), sizes_.end(), [](std::size_t s) { return s == 0; }))
    throw std::invalid_argument("Particle: layer sizes must be positive");
  if (params_.size() != parameter_count(sizes_))
    throw std::invalid_argument("Particle: parameter vector has wrong length");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(offset);
    offset += (sizes_[l] + 1) * sizes_[l + 1];
  }
}

Particle Particle::init(std::vector<std::size_t> layer_sizes, std::uint64_t seed,
                        std::size_t index) {
  Vector params(parameter_count(layer_sizes), 0.0);
  Particle p(std::move(layer_sizes), std::move(params));
  Rng rng(seed, kParticleStream, index);
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    const std::size_t fan_in = p.sizes_[l];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    const std::size_t count = fan_in * p.sizes_[l + 1];
    for (std::size_t k = 0; k < count; ++k)
      p.params_[p.weight_offset(l) + k] = rng.uniform(-bound, bound);
  }
  return p;
}

Classifier::Classifier(std::size_t feature_dim, std::size_t num_classes)
    : features_(feature_dim), classes_(num_classes), params_((feature_dim + 1) * num_classes) {}

Classifier::Classifier(std::size_t feature_dim, std::size_t num_classes, Vector params)
    : features_(feature_dim), classes_(num_classes), params_(std::move(params)) {
  if (params_.size() != (features_ + 1) * classes_)
    throw std::invalid_argument("Classifier: parameter vector has wrong length");
}

Classifier Classifier::init(std::size_t feature_dim, std::size_t num_classes, std::uint64_t seed,
                            std::size_t index) {
  Classifier c(feature_dim, num_classes);
  Rng rng(seed, kClassifierStream, index);
  const double bound = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  for (std::size_t k = 0; k < feature_dim * num_classes; ++k) c.params_[k] = rng.uniform(-bound, bound);
  return c;
}

Matrix Classifier::weight_matrix() const {
  return Matrix(features_, classes_,
                Vector(params_.begin(), params_.begin() + static_cast<long>(features_ * classes_)));
}

ForwardCache forward_cached(const Particle& p, const Matrix& x) {
  if (x.cols() != p.input_dim()) {
    throw std::invalid_argument("forward_features: input has " + std::to_string(x.cols()) +
                                " columns, network expects " + std::to_string(p.input_dim()));
  }
  ForwardCache cache;
  cache.activations.reserve(p.num_layers() + 1);
  cache.activations.push_back(x);
  const auto& sizes = p.layer_sizes();
  std::span<const double> params = p.params();
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    auto w = params.subspan(p.weight_offset(l), sizes[l] * sizes[l + 1]);
    auto b = params.subspan(p.bias_offset(l), sizes[l + 1]);
    cache.activations.push_back(dense_relu(cache.activations.back(), w, b));
  }
  return cache;
}

FeatureBatch forward_features(const Particle& p, const Matrix& x, std::size_t index) {
  return {index, std::move(forward_cached(p, x).activations.back())};
}

Matrix classifier_logits(const Classifier& c, const Matrix& features) {
  if (features.cols() != c.feature_dim()) {
    throw std::invalid_argument("classifier: feature width " + std::to_string(features.cols()) +
                                " != " + std::to_string(c.feature_dim()));
  }
  const std::size_t classes = c.num_classes();
  Matrix logits(features.rows(), classes);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto out = logits.row(r);
    for (std::size_t k = 0; k < classes; ++k) out[k] = c.bias(k);
    auto h = features.row(r);
    for (std::size_t f = 0; f < c.feature_dim(); ++f) {
      if (h[f] == 0.0) continue;
      for (std::size_t k = 0; k < classes; ++k) out[k] += h[f] * c.weight(f, k);
    }
  }
  return logits;
}

LogitBatch forward_classifier(const Classifier& c, const FeatureBatch& h) {
  return {h.particle, classifier_logits(c, h.values)};
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto out = p.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t k = 0; k < in.size(); ++k) {
      out[k] = std::exp(in[k] - m);
      z += out[k];
    }
    for (double& v : out) v /= z;
  }
  return p;
}

LogitGrads logit_loglik_and_grads(const Matrix& logits, std::span<const int> labels) {
  check_labels(labels, logits.rows(), logits.cols());
  LogitGrads out{0.0, Matrix(logits.rows(), logits.cols())};
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto g = out.g_logit.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (double v : in) z += std::exp(v - m);
    const double log_z = m + std::log(z);
    const auto y = static_cast<std::size_t>(labels[r]);
    out.loglik += in[y] - log_z;
    for (std::size_t k = 0; k < in.size(); ++k) g[k] = -std::exp(in[k] - log_z);
    g[y] += 1.0;
  }
  return out;
}

ClassifierCotangents classifier_backward(const Classifier& c, const Matrix& features,
                                         const Matrix& g_logit) {
  const std::size_t classes = c.num_classes();
  const std::size_t width = c.feature_dim();
  if (features.cols() != width || g_logit.cols() != classes || g_logit.rows() != features.rows())
    throw std::invalid_argument("classifier_backward: shape mismatch");
  ClassifierCotangents out{Matrix(features.rows(), width), Vector(c.parameter_count(), 0.0)};
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto g = g_logit.row(r);
    auto h = features.row(r);
    auto gf = out.g_feat.row(r);
    for (std::size_t f = 0; f < width; ++f) {
      double acc = 0.0;
      for (std::size_t k = 0; k < classes; ++k) acc += g[k] * c.weight(f, k);
      gf[f] = acc;
      if (h[f] == 0.0) continue;
      double* gw = out.g_theta.data() + f * classes;
      for (std::size_t k = 0; k < classes; ++k) gw[k] += h[f] * g[k];
    }
    double* gb = out.g_theta.data() + width * classes;
    for (std::size_t k = 0; k < classes; ++k) gb[k] += g[k];
  }
  return out;
}

LikelihoodGrads loglik_and_grads(const Classifier& c, const Matrix& features,
                                 std::span<const int> labels) {
  const Matrix logits = classifier_logits(c, features);
  LogitGrads lg = logit_loglik_and_grads(logits, labels);
  ClassifierCotangents ct = classifier_backward(c, features, lg.g_logit);
  return {lg.loglik, std::move(ct.g_feat), std::move(ct.g_theta), std::move(lg.g_logit)};
}

LikelihoodGrads loglik_and_grads(const Classifier& c, const FeatureBatch& h,
                                 std::span<const int> labels) {
  return loglik_and_grads(c, h.values, labels);
}

std::size_t count_correct(const Matrix& g_logit, std::span<const int> labels) {
  std::size_t correct = 0;
  for (std::size_t r = 0; r < g_logit.rows(); ++r) {
    auto g = g_logit.row(r);
    const auto y = static_cast<std::size_t>(labels[r]);
    std::size_t best = 0;
    double best_p = -1.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double p = (k == y ? 1.0 : 0.0) - g[k];
      if (p > best_p) {
        best_p = p;
        best = k;
      }
    }
    if (best == y) ++correct;
  }
  return correct;
}

Vector backprop_to_weights(const Particle& p, const ForwardCache& cache, const Matrix& v_feat) {
  const Matrix& features = cache.features();
  if (v_feat.rows() != features.rows() || v_feat.cols() != features.cols()) {
    throw std::invalid_argument("backprop_to_weights: cotangent is " +
                                std::to_string(v_feat.rows()) + "x" +
                                std::to_string(v_feat.cols()) + ", features are " +
                                std::to_string(features.rows()) + "x" +
                                std::to_string(features.cols()));
  }
  const auto& sizes = p.layer_sizes();
  Vector grad(p.parameter_count(), 0.0);
  std::span<const double> params = p.params();

  Matrix delta = v_feat;
  for (std::size_t l = p.num_layers(); l-- > 0;) {
    const Matrix& out = cache.activations[l + 1];
    const Matrix& in = cache.activations[l];
    for (std::size_t i = 0; i < delta.size(); ++i)
      if (!(out.flat()[i] > 0.0)) delta.flat()[i] = 0.0;

    const std::size_t fan_in = sizes[l];
    const std::size_t fan_out = sizes[l + 1];
    double* gw = grad.data() + p.weight_offset(l);
    double* gb = grad.data() + p.bias_offset(l);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      auto d = delta.row(r);
      auto a = in.row(r);
      for (std::size_t k = 0; k < fan_in; ++k) {
        if (a[k] == 0.0) continue;
        double* gw_row = gw + k * fan_out;
        for (std::size_t j = 0; j < fan_out; ++j) gw_row[j] += a[k] * d[j];
      }
      for (std::size_t j = 0; j < fan_out; ++j) gb[j] += d[j];
    }
    if (l == 0) break;

    auto w = params.subspan(p.weight_offset(l), fan_in * fan_out);
    Matrix prev(delta.rows(), fan_in);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      auto d = delta.row(r);
      auto o = prev.row(r);
      for (std::size_t k = 0; k < fan_in; ++k) {
        const double* w_row = w.data() + k * fan_out;
        double acc = 0.0;
        for (std::size_t j = 0; j < fan_out; ++j) acc += w_row[j] * d[j];
        o[k] = acc;
      }
    }
    delta = std::move(prev);
  }
  return grad;
}

Vector backprop_to_weights(const Particle& p, const Matrix& x, const Matrix& v_feat) {
  return backprop_to_weights(p, forward_cached(p, x), v_feat);
}

std::vector<Matrix> member_logits(std::span<const Particle> particles,
                                  std::span<const Classifier> heads, const Matrix& x) {
  if (particles.empty()) throw std::invalid_argument("ensemble is empty");
  if (heads.size() != 1 && heads.size() != particles.size())
    throw std::invalid_argument("need one shared head or one head per member");
  std::vector<Matrix> out;
  out.reserve(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const Classifier& head = heads.size() == 1 ? heads[0] : heads[i];
    out.push_back(classifier_logits(head, forward_cached(particles[i], x).features()));
  }
  return out;
}

Matrix ensemble_predict(std::span<const Particle> particles, std::span<const Classifier> heads,
                        const Matrix& x) {
  const std::vector<Matrix> logits = member_logits(particles, heads, x);
  Matrix mean(x.rows(), logits.front().cols());
  for (const Matrix& l : logits) mean = mean + softmax_rows(l);
  return (1.0 / static_cast<double>(logits.size())) * mean;
}

Matrix ensemble_predict(std::span<const Particle> particles, const Classifier& c, const Matrix& x) {
  return ensemble_predict(particles, std::span<const Classifier>(&c, 1), x);
}

}  // namespace fwgd
