#include "narrownet/linalg.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>

#include "narrownet/error.hpp"

namespace narrownet {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw InputError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows, std::size_t cols) {
  Matrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw InputError("row length mismatch");
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw InputError("matrix product dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InputError("matrix sum dimension mismatch");
  Matrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) + b(i, j);
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) { return a + (-1.0) * b; }

Matrix operator*(double s, const Matrix& a) {
  Matrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = s * a(i, j);
  return c;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  Vector y(a.rows());
  matvec_into(a, x, y);
  return y;
}

void matvec_into(const Matrix& a, std::span<const double> x, std::span<double> out) {
  assert(x.size() == a.cols() && out.size() == a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    const auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
    out[i] = s;
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Vector axpy(double alpha, std::span<const double> x, std::span<const double> y) {
  Vector r(y.begin(), y.end());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += alpha * x[i];
  return r;
}

Vector scaled(double alpha, std::span<const double> x) {
  Vector r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = alpha * x[i];
  return r;
}

Vector singular_values(const Matrix& a) {
  // One-sided Jacobi on the columns of A (or Aᵀ when wide).
  Matrix u = a.rows() >= a.cols() ? a : a.transpose();
  const std::size_t m = u.rows();
  const std::size_t n = u.cols();
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += u(i, p) * u(i, p);
          beta += u(i, q) * u(i, q);
          gamma += u(i, p) * u(i, q);
        }
        if (gamma == 0.0) continue;
        const double scale = std::sqrt(alpha * beta);
        if (scale == 0.0) continue;
        off = std::max(off, std::abs(gamma) / scale);
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double up = u(i, p);
          const double uq = u(i, q);
          u(i, p) = c * up - s * uq;
          u(i, q) = s * up + c * uq;
        }
      }
    if (off < 1e-15) break;
  }
  Vector sv(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += u(i, j) * u(i, j);
    sv[j] = std::sqrt(s);
  }
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

double op_norm(const Matrix& a) {
  if (a.empty()) return 0.0;
  return singular_values(a).front();
}

double op_norm_power(const Matrix& a, int max_iter, double rel_tol) {
  if (a.empty()) return 0.0;
  const Matrix at = a.transpose();
  Vector x(a.cols());
  // Deterministic start with no special alignment to coordinate axes.
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 1.0 + 0.1 * static_cast<double>(i);
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const double nx = norm2(x);
    if (nx == 0.0) return 0.0;
    for (double& v : x) v /= nx;
    const Vector y = matvec(at, matvec(a, x));
    const double next = dot(x, y);
    x = y;
    if (std::abs(next - lambda) <= rel_tol * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

bool is_numerically_invertible(const Matrix& a, double rel_tol) {
  if (a.rows() != a.cols() || a.empty()) return false;
  const Vector sv = singular_values(a);
  return sv.front() > 0.0 && sv.back() > rel_tol * sv.front();
}

RowEchelon row_reduce(const Matrix& a, double tol) {
  RowEchelon out{a, {}};
  Matrix& r = out.reduced;
  const double threshold = tol * a.max_abs();
  std::size_t lead = 0;
  for (std::size_t col = 0; col < r.cols() && lead < r.rows(); ++col) {
    std::size_t best = lead;
    for (std::size_t i = lead + 1; i < r.rows(); ++i)
      if (std::abs(r(i, col)) > std::abs(r(best, col))) best = i;
    if (!(std::abs(r(best, col)) > threshold)) {
      for (std::size_t i = lead; i < r.rows(); ++i) r(i, col) = 0.0;
      continue;
    }
    if (best != lead)
      for (std::size_t j = 0; j < r.cols(); ++j) std::swap(r(best, j), r(lead, j));
    const double p = r(lead, col);
    for (std::size_t j = 0; j < r.cols(); ++j) r(lead, j) /= p;
    for (std::size_t i = 0; i < r.rows(); ++i) {
      if (i == lead) continue;
      const double f = r(i, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < r.cols(); ++j) r(i, j) -= f * r(lead, j);
    }
    out.pivot_cols.push_back(col);
    ++lead;
  }
  return out;
}

std::size_t rank(const Matrix& a, double tol) { return row_reduce(a, tol).rank(); }

std::optional<LuDecomposition> LuDecomposition::factor(const Matrix& a, double tol) {
  if (a.rows() != a.cols()) throw InputError("LU requires a square matrix");
  LuDecomposition d;
  d.lu_ = a;
  d.perm_.resize(a.rows());
  std::iota(d.perm_.begin(), d.perm_.end(), std::size_t{0});
  const double threshold = tol * a.max_abs();
  Matrix& lu = d.lu_;
  const std::size_t n = a.rows();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t best = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(best, k))) best = i;
    if (!(std::abs(lu(best, k)) > threshold)) return std::nullopt;
    if (best != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(best, j), lu(k, j));
      std::swap(d.perm_[best], d.perm_[k]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      lu(i, k) /= lu(k, k);
      const double f = lu(i, k);
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
    }
  }
  return d;
}

Vector LuDecomposition::solve(std::span<const double> b) const {
  const std::size_t n = lu_.rows();
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[perm_[i]];
    for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
    x[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= lu_(i, j) * x[j];
    x[i] = s / lu_(i, i);
  }
  return x;
}

Matrix inverse(const Matrix& a) {
  const auto lu = LuDecomposition::factor(a);
  if (!lu) throw PreconditionError("matrix is singular");
  const std::size_t n = a.rows();
  Matrix inv(n, n);
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    const Vector col = lu->solve(e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

}  // namespace narrownet
