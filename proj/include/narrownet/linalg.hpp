#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

namespace narrownet {

using Vector = std::vector<double>;

// Dense row-major matrix. Small sizes only (layer widths of a few units).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<Vector>& rows, std::size_t cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  const std::vector<double>& data() const noexcept { return data_; }

  Matrix transpose() const;
  double max_abs() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

// y = A x.
Vector matvec(const Matrix& a, std::span<const double> x);
// y = A x written into `out` (sized rows()); no allocation.
void matvec_into(const Matrix& a, std::span<const double> x, std::span<double> out);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double norm_inf(std::span<const double> v);
Vector axpy(double alpha, std::span<const double> x, std::span<const double> y);  // alpha*x + y
Vector scaled(double alpha, std::span<const double> x);

// Singular values in descending order (one-sided Jacobi).
Vector singular_values(const Matrix& a);
double op_norm(const Matrix& a);

// Operator norm estimate by power iteration on AᵀA. Independent of the
// Jacobi route; used to cross-check it.
double op_norm_power(const Matrix& a, int max_iter = 50, double rel_tol = 1e-10);

// True iff sigma_min > rel_tol * sigma_max (and A is square and nonzero).
bool is_numerically_invertible(const Matrix& a, double rel_tol = 1e-12);

// Row reduction with partial pivoting. A column gets a pivot when its
// best candidate magnitude exceeds tol * max|entry|.
struct RowEchelon {
  Matrix reduced;                     // reduced row echelon form
  std::vector<std::size_t> pivot_cols;
  std::size_t rank() const noexcept { return pivot_cols.size(); }
};
RowEchelon row_reduce(const Matrix& a, double tol = 1e-10);

std::size_t rank(const Matrix& a, double tol = 1e-10);

// LU with partial pivoting for square systems.
class LuDecomposition {
 public:
  // Returns nullopt when some pivot falls at or below tol * max|entry|.
  static std::optional<LuDecomposition> factor(const Matrix& a, double tol = 1e-10);

  Vector solve(std::span<const double> b) const;
  std::size_t size() const noexcept { return lu_.rows(); }

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
};

Matrix inverse(const Matrix& a);  // throws PreconditionError if singular

}  // namespace narrownet
