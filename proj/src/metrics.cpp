#include "fwgd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fwgd {

namespace {

void check(const Matrix& probs, std::span<const int> labels) {
  if (probs.rows() != labels.size()) throw std::invalid_argument("metrics: probabilities and labels differ in length");
  if (labels.empty()) throw std::invalid_argument("metrics: empty evaluation set");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols())
      throw std::invalid_argument("metrics: label out of range");
}

std::size_t argmax(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

double accuracy(const Matrix& probs, std::span<const int> labels) {
  check(probs, labels);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < labels.size(); ++r)
    if (argmax(probs.row(r)) == static_cast<std::size_t>(labels[r])) ++correct;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double nll(const Matrix& probs, std::span<const int> labels) {
  check(probs, labels);
  double s = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r)
    s -= std::log(std::max(probs(r, static_cast<std::size_t>(labels[r])), 1e-12));
  return s / static_cast<double>(labels.size());
}

double brier(const Matrix& probs, std::span<const int> labels) {
  check(probs, labels);
  double s = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    auto p = probs.row(r);
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double target = k == static_cast<std::size_t>(labels[r]) ? 1.0 : 0.0;
      s += (p[k] - target) * (p[k] - target);
    }
  }
  return s / static_cast<double>(labels.size());
}

double ece(const Matrix& probs, std::span<const int> labels, std::size_t bins) {
  check(probs, labels);
  if (bins == 0) throw std::invalid_argument("ece: need at least one bin");
  std::vector<double> conf_sum(bins, 0.0);
  std::vector<double> hits(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    auto p = probs.row(r);
    const std::size_t pred = argmax(p);
    const double conf = p[pred];
    const auto bin = std::min(static_cast<std::size_t>(conf * static_cast<double>(bins)), bins - 1);
    conf_sum[bin] += conf;
    hits[bin] += pred == static_cast<std::size_t>(labels[r]) ? 1.0 : 0.0;
    ++count[bin];
  }
  const auto n = static_cast<double>(labels.size());
  double total = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const auto m = static_cast<double>(count[b]);
    total += (m / n) * std::abs(hits[b] / m - conf_sum[b] / m);
  }
  return total;
}

Matrix tempered_probs(const std::vector<Matrix>& member_logits, double temperature) {
  if (member_logits.empty()) throw std::invalid_argument("tempered_probs: no members");
  if (!(temperature > 0.0)) throw std::invalid_argument("tempered_probs: temperature must be positive");
  Matrix mean(member_logits.front().rows(), member_logits.front().cols());
  for (const Matrix& l : member_logits) mean = mean + softmax_rows((1.0 / temperature) * l);
  return (1.0 / static_cast<double>(member_logits.size())) * mean;
}

double temperature_scale(const std::vector<Matrix>& member_logits, std::span<const int> labels,
                         const TemperatureSearch& search) {
  if (labels.empty()) throw std::invalid_argument("temperature_scale: empty validation set");
  auto objective = [&](double t) { return nll(tempered_probs(member_logits, t), labels); };

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = search.lo;
  double b = search.hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  while (b - a > search.tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  const double best = 0.5 * (a + b);
  return objective(best) <= objective(1.0) ? best : 1.0;
}

double feature_similarity(std::span<const Particle> particles, const Matrix& x) {
  if (particles.size() < 2) return 1.0;
  if (x.rows() == 0) throw std::invalid_argument("feature_similarity: no inputs");
  std::vector<Matrix> feats;
  for (const Particle& p : particles) feats.push_back(forward_cached(p, x).features());
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    for (std::size_t j = i + 1; j < feats.size(); ++j) {
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const double ni = norm(feats[i].row(r));
        const double nj = norm(feats[j].row(r));
        if (ni > 0.0 && nj > 0.0) total += dot(feats[i].row(r), feats[j].row(r)) / (ni * nj);
      }
      ++pairs;
    }
  }
  return total / (static_cast<double>(pairs) * static_cast<double>(x.rows()));
}

MetricsReport evaluate(std::span<const Particle> particles, std::span<const Classifier> heads,
                       const Matrix& x, std::span<const int> labels, double temperature,
                       std::size_t bins) {
  const Matrix probs = tempered_probs(member_logits(particles, heads, x), temperature);
  MetricsReport r;
  r.accuracy = accuracy(probs, labels);
  r.nll = nll(probs, labels);
  r.brier = brier(probs, labels);
  r.ece = ece(probs, labels, bins);
  r.temperature = temperature;
  r.mean_pairwise_feature_similarity = feature_similarity(particles, x);
  return r;
}

}  // namespace fwgd
