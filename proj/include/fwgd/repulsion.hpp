#pragma once

#include <span>
#include <vector>

#include "fwgd/linalg.hpp"
#include "fwgd/priors_kernels.hpp"

namespace fwgd {

/// Read-only flat views of one vector per particle.
using FlatViews = std::vector<std::span<const double>>;

/// KDE estimate of ∇ log q at row i of `points`:
///   Σ_j ∇_{z_i} k(z_i, z_j) / Σ_j k(z_i, z_j).
/// The self term contributes k = 1 to the denominator.
Vector kde_repulsion(const Matrix& points, std::size_t i, double h);
/// kde_repulsion for every row at once (row i of the result is particle i).
Matrix kde_repulsion_all(const Matrix& points, double h);

/// Dominant eigenvectors of H = Σ_i g_i g_iᵀ, i.e. the leading left singular
/// vectors of the D×n gradient stack.
struct ProjectionBasis {
  Matrix basis;  ///< D×k, orthonormal columns
  std::size_t requested_r = 0;

  std::size_t effective_k() const { return basis.cols(); }
  std::size_t dim() const { return basis.rows(); }
};

ProjectionBasis build_basis(const FlatViews& grads, std::size_t r);

/// z_j = basisᵀ·v_j for every particle; rows of the result.
Matrix project_all(const ProjectionBasis& basis, const FlatViews& vectors);
/// basis · z
Vector lift(const ProjectionBasis& basis, std::span<const double> z);

/// Repulsion for particle i evaluated inside span(basis) and mapped back to
/// the full space. Zero when the basis is empty.
Vector projected_repulsion(const ProjectionBasis& basis, const FlatViews& features, std::size_t i,
                           const KernelSpec& kernel);

/// Per-particle update direction in the inferred space. The repulsion is
/// stored with the sign of ∇ log q and subtracted in total().
struct UpdateDirection {
  Vector driving;
  Vector prior;
  Vector repulsion;

  Vector total() const;
};

UpdateDirection assemble_direction(Vector driving, Vector prior, Vector repulsion);

}  // namespace fwgd
