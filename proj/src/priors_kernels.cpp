#include "fwgd/priors_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fwgd {

void PriorSpec::validate() const {
  if (family == PriorFamily::uniform) return;
  if (!(inverse_scale > 0.0) || !std::isfinite(inverse_scale))
    throw std::invalid_argument("prior inverse_scale must be positive for " + to_string(family));
}

std::string to_string(PriorFamily f) {
  switch (f) {
    case PriorFamily::half_normal: return "half_normal";
    case PriorFamily::half_cauchy: return "half_cauchy";
    case PriorFamily::normal: return "normal";
    case PriorFamily::cauchy: return "cauchy";
    case PriorFamily::uniform: return "uniform";
  }
  return "?";
}

PriorFamily parse_prior_family(std::string_view name) {
  if (name == "half_normal") return PriorFamily::half_normal;
  if (name == "half_cauchy") return PriorFamily::half_cauchy;
  if (name == "normal") return PriorFamily::normal;
  if (name == "cauchy") return PriorFamily::cauchy;
  if (name == "uniform") return PriorFamily::uniform;
  throw std::invalid_argument("unknown prior family '" + std::string(name) + "'");
}

Vector prior_logp_grad(const PriorSpec& spec, std::span<const double> v) {
  Vector g(v.size(), 0.0);
  if (spec.family == PriorFamily::uniform) return g;
  spec.validate();

  const bool half =
      spec.family == PriorFamily::half_normal || spec.family == PriorFamily::half_cauchy;
  if (half) {
    for (std::size_t k = 0; k < v.size(); ++k)
      if (v[k] < 0.0)
        throw std::domain_error("prior_logp_grad: entry " + std::to_string(k) +
                                " is negative, outside the half-prior support");
  }

  const double inv_var = spec.inverse_scale;
  const double var = 1.0 / inv_var;
  switch (spec.family) {
    case PriorFamily::half_normal:
    case PriorFamily::normal:
      for (std::size_t k = 0; k < v.size(); ++k) g[k] = -v[k] * inv_var;
      break;
    case PriorFamily::half_cauchy:
    case PriorFamily::cauchy:
      for (std::size_t k = 0; k < v.size(); ++k) g[k] = -2.0 * v[k] / (var + v[k] * v[k]);
      break;
    case PriorFamily::uniform:
      break;
  }
  return g;
}

void KernelSpec::validate() const {
  if (fixed_bandwidth && !(*fixed_bandwidth > 0.0))
    throw std::invalid_argument("fixed kernel bandwidth must be positive");
  if (!(floor > 0.0)) throw std::invalid_argument("kernel bandwidth floor must be positive");
}

double median_bandwidth(const Matrix& points, double floor) {
  const std::size_t n = points.rows();
  if (n < 2) return 1.0;
  std::vector<double> sq;
  sq.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      auto a = points.row(i);
      auto b = points.row(j);
      for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
      sq.push_back(s);
    }
  }
  std::sort(sq.begin(), sq.end());
  const std::size_t m = sq.size();
  const double med = m % 2 == 1 ? sq[m / 2] : 0.5 * (sq[m / 2 - 1] + sq[m / 2]);
  return std::max(med, floor);
}

double bandwidth(const KernelSpec& spec, const Matrix& points) {
  if (spec.fixed_bandwidth) return *spec.fixed_bandwidth;
  return median_bandwidth(points, spec.floor);
}

double rbf_kernel(std::span<const double> a, std::span<const double> b, double h) {
  if (a.size() != b.size()) throw std::invalid_argument("rbf_kernel: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::exp(-s / h);
}

Vector rbf_kernel_grad(std::span<const double> a, std::span<const double> b, double h) {
  const double k = rbf_kernel(a, b, h);
  Vector g(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) g[i] = -(2.0 / h) * (a[i] - b[i]) * k;
  return g;
}

}  // namespace fwgd
