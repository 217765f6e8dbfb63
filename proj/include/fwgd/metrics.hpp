#pragma once

#include <span>
#include <string>
#include <vector>

#include "fwgd/linalg.hpp"
#include "fwgd/nn.hpp"

namespace fwgd {

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double accuracy(const Matrix& probs, std::span<const int> labels);
/// −(1/N) Σ log p[b, y_b], with probabilities clipped below at 1e-12.
double nll(const Matrix& probs, std::span<const int> labels);
/// (1/N) Σ ‖p_b − onehot(y_b)‖², in [0, 2].
double brier(const Matrix& probs, std::span<const int> labels);
/// Expected calibration error over `bins` equal-width confidence bins.
/// Confidence c falls in bin min(⌊c·bins⌋, bins − 1).
double ece(const Matrix& probs, std::span<const int> labels, std::size_t bins = 15);

/// Mean of member softmax(logits / T).
Matrix tempered_probs(const std::vector<Matrix>& member_logits, double temperature);

struct TemperatureSearch {
  double lo = 0.05;
  double hi = 20.0;
  double tol = 1e-4;
};

/// Single ensemble temperature minimizing validation NLL, by golden-section
/// search. Falls back to T = 1 if the search result is not at least as good.
double temperature_scale(const std::vector<Matrix>& member_logits, std::span<const int> labels,
                         const TemperatureSearch& search = {});

/// Cosine similarity of member feature vectors for every member pair and
/// input, averaged. A zero feature vector has similarity 0 with anything.
double feature_similarity(std::span<const Particle> particles, const Matrix& x);

struct MetricsReport {
  double accuracy = 0.0;
  double nll = 0.0;
  double brier = 0.0;
  double ece = 0.0;
  double temperature = 1.0;
  double mean_pairwise_feature_similarity = 0.0;
};

/// All metrics for an ensemble on (x, labels) at a given temperature.
MetricsReport evaluate(std::span<const Particle> particles, std::span<const Classifier> heads,
                       const Matrix& x, std::span<const int> labels, double temperature,
                       std::size_t bins = 15);

}  // namespace fwgd
