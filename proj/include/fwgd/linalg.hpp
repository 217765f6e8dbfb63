#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace fwgd {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  /// Builds a matrix from nested rows; all rows must have equal length.
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  /// Row-major flattened view (vec of the rows, concatenated).
  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  Vector column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);

  Matrix transposed() const;
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Products. Summation runs over the inner index in ascending order.
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);
/// aᵀ·x.
Vector matvec_t(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double frobenius_norm(const Matrix& a);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

struct SymmetricEigen {
  Vector values;   ///< descending
  Matrix vectors;  ///< column i pairs with values[i]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Each eigenvector
/// is signed so that its largest-magnitude entry is positive.
SymmetricEigen symmetric_eig(const Matrix& a);

struct ThinSvd {
  Matrix u;   ///< D×k, orthonormal columns
  Vector s;   ///< k singular values, descending
  Matrix v;   ///< n×k
  std::size_t rank() const { return s.size(); }
};

/// Thin SVD of a tall D×n matrix (n small) via the n×n Gram matrix.
/// Columns whose singular value falls below the rank threshold are dropped,
/// so an all-zero input yields k = 0.
ThinSvd thin_svd_tall(const Matrix& g);

/// Relative singular-value cutoff used by thin_svd_tall for an n-column input.
double svd_rank_cutoff(std::size_t n);

/// Seedable generator with platform-independent draws. The engine is
/// mt19937_64, whose output sequence is fixed by the standard; the
/// distributions are implemented here because the std ones are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}
  /// Derives an independent stream from (seed, stream ids).
  Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fwgd
