#include "fwgd/repulsion.hpp"

#include <cmath>
#include <stdexcept>

namespace fwgd {

Matrix kde_repulsion_all(const Matrix& points, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("kde_repulsion: bandwidth must be positive");
  const std::size_t n = points.rows();
  const std::size_t m = points.cols();
  Matrix kern(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    kern(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) kern(i, j) = kern(j, i) = rbf_kernel(points.row(i), points.row(j), h);
  }
  Matrix out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    auto zi = points.row(i);
    auto o = out.row(i);
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      denom += kern(i, j);
      if (j == i) continue;
      auto zj = points.row(j);
      const double coeff = -(2.0 / h) * kern(i, j);
      for (std::size_t k = 0; k < m; ++k) o[k] += coeff * (zi[k] - zj[k]);
    }
    for (double& v : o) v /= denom;
  }
  return out;
}

Vector kde_repulsion(const Matrix& points, std::size_t i, double h) {
  if (i >= points.rows()) throw std::out_of_range("kde_repulsion: particle index out of range");
  if (!(h > 0.0)) throw std::invalid_argument("kde_repulsion: bandwidth must be positive");
  const std::size_t m = points.cols();
  Vector num(m, 0.0);
  double denom = 0.0;
  for (std::size_t j = 0; j < points.rows(); ++j) {
    const double k = j == i ? 1.0 : rbf_kernel(points.row(i), points.row(j), h);
    denom += k;
    if (j == i) continue;
    axpy(1.0, rbf_kernel_grad(points.row(i), points.row(j), h), num);
  }
  for (double& v : num) v /= denom;
  return num;
}

ProjectionBasis build_basis(const FlatViews& grads, std::size_t r) {
  if (r == 0) throw std::invalid_argument("build_basis: projection dim must be ≥ 1");
  if (grads.empty()) throw std::invalid_argument("build_basis: no gradients");
  const std::size_t d = grads.front().size();
  const std::size_t n = grads.size();
  Matrix stack(d, n);
  for (std::size_t j = 0; j < n; ++j) {
    if (grads[j].size() != d) throw std::invalid_argument("build_basis: gradient lengths differ");
    for (std::size_t row = 0; row < d; ++row) stack(row, j) = grads[j][row];
  }
  const ThinSvd svd = thin_svd_tall(stack);
  const std::size_t k = std::min(r, svd.rank());
  ProjectionBasis out{Matrix(d, k), r};
  for (std::size_t row = 0; row < d; ++row)
    for (std::size_t c = 0; c < k; ++c) out.basis(row, c) = svd.u(row, c);
  return out;
}

Matrix project_all(const ProjectionBasis& basis, const FlatViews& vectors) {
  const std::size_t k = basis.effective_k();
  Matrix z(vectors.size(), k);
  for (std::size_t j = 0; j < vectors.size(); ++j) {
    if (vectors[j].size() != basis.dim())
      throw std::invalid_argument("project_all: vector length differs from basis dimension");
    auto out = z.row(j);
    const auto& v = vectors[j];
    for (std::size_t row = 0; row < basis.dim(); ++row) {
      const double x = v[row];
      if (x == 0.0) continue;
      auto b = basis.basis.row(row);
      for (std::size_t c = 0; c < k; ++c) out[c] += x * b[c];
    }
  }
  return z;
}

Vector lift(const ProjectionBasis& basis, std::span<const double> z) {
  return matvec(basis.basis, z);
}

Vector projected_repulsion(const ProjectionBasis& basis, const FlatViews& features, std::size_t i,
                           const KernelSpec& kernel) {
  if (i >= features.size()) throw std::out_of_range("projected_repulsion: index out of range");
  if (basis.effective_k() == 0) return Vector(features[i].size(), 0.0);
  const Matrix z = project_all(basis, features);
  const double h = bandwidth(kernel, z);
  return lift(basis, kde_repulsion(z, i, h));
}

Vector UpdateDirection::total() const {
  Vector t = driving;
  axpy(1.0, prior, t);
  axpy(-1.0, repulsion, t);
  return t;
}

UpdateDirection assemble_direction(Vector driving, Vector prior, Vector repulsion) {
  if (driving.size() != prior.size() || driving.size() != repulsion.size())
    throw std::invalid_argument("assemble_direction: parts differ in length");
  return {std::move(driving), std::move(prior), std::move(repulsion)};
}

}  // namespace fwgd
