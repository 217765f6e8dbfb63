#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "fwgd/linalg.hpp"

namespace fwgd {

/// Independent per-element prior. The half families are supported on x ≥ 0
/// only; normal and cauchy are their full-line counterparts, used for
/// weights and logits which can be negative.
enum class PriorFamily { half_normal, half_cauchy, normal, cauchy, uniform };

struct PriorSpec {
  PriorFamily family = PriorFamily::half_cauchy;
  double inverse_scale = 1e-3;  ///< 1/σ²

  void validate() const;
};

std::string to_string(PriorFamily f);
PriorFamily parse_prior_family(std::string_view name);

/// Elementwise ∇ log p(x), up to normalization:
///   normal / half_normal  → −x/σ²
///   cauchy / half_cauchy  → −2x/(σ² + x²)
///   uniform               → 0 (improper, no prior effect)
/// Half families reject negative entries.
Vector prior_logp_grad(const PriorSpec& spec, std::span<const double> v);

struct KernelSpec {
  /// Empty means the median heuristic; otherwise a fixed bandwidth h > 0.
  std::optional<double> fixed_bandwidth;
  double floor = 1e-12;

  void validate() const;
};

/// Median of the pairwise squared distances between the rows of `points`,
/// floored at `floor`. A single point gives 1.
double median_bandwidth(const Matrix& points, double floor = 1e-12);
double bandwidth(const KernelSpec& spec, const Matrix& points);

/// exp(−‖a − b‖² / h)
double rbf_kernel(std::span<const double> a, std::span<const double> b, double h);
/// ∇_a k(a, b) = −(2/h)(a − b)·k(a, b)
Vector rbf_kernel_grad(std::span<const double> a, std::span<const double> b, double h);

}  // namespace fwgd
