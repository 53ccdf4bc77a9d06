#include "narrownet/geometry.hpp"

#include <cmath>
#include <string>

#include "narrownet/error.hpp"

namespace narrownet {

Polyhedron::Polyhedron(Matrix m, Vector c) : rows(std::move(m)), offsets(std::move(c)), dim(rows.cols()) {
  if (rows.rows() != offsets.size()) throw InputError("polyhedron: row count and offset length differ");
  if (dim == 0) throw InputError("polyhedron: dimension must be positive");
}

Polyhedron Polyhedron::whole_space(std::size_t dim) {
  Polyhedron p;
  p.rows = Matrix(0, dim);
  p.dim = dim;
  return p;
}

Vector Polyhedron::slack(std::span<const double> y) const {
  if (y.size() != dim) throw InputError("polyhedron: point dimension mismatch");
  Vector s = matvec(rows, y);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = offsets[i] - s[i];
  return s;
}

bool contains(const Polyhedron& poly, std::span<const double> y) {
  if (y.size() != poly.dim) throw InputError("polyhedron: point dimension mismatch");
  for (std::size_t i = 0; i < poly.num_constraints(); ++i)
    if (!(dot(poly.rows.row(i), y) < poly.offsets[i])) return false;
  return true;
}

std::vector<Vector> nullspace(const Matrix& m, double tol) {
  if (!(tol > 0.0)) throw InputError("nullspace tolerance must be positive");
  const std::size_t d = m.cols();
  const RowEchelon rref = row_reduce(m, tol);
  std::vector<bool> is_pivot(d, false);
  for (std::size_t c : rref.pivot_cols) is_pivot[c] = true;

  // One raw basis vector per free column: x_free = 1, pivots solved from RREF.
  std::vector<Vector> basis;
  for (std::size_t free = 0; free < d; ++free) {
    if (is_pivot[free]) continue;
    Vector v(d, 0.0);
    v[free] = 1.0;
    for (std::size_t r = 0; r < rref.pivot_cols.size(); ++r) v[rref.pivot_cols[r]] = -rref.reduced(r, free);
    basis.push_back(std::move(v));
  }

  // Modified Gram-Schmidt, applied twice for orthogonality at round-off level.
  for (std::size_t i = 0; i < basis.size(); ++i) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j < i; ++j) {
        const double p = dot(basis[i], basis[j]);
        for (std::size_t k = 0; k < d; ++k) basis[i][k] -= p * basis[j][k];
      }
    const double n = norm2(basis[i]);
    for (double& x : basis[i]) x /= n;
  }
  return basis;
}

Vector unbounded_direction(const Polyhedron& poly, std::span<const double> x) {
  const std::size_t n = poly.num_constraints();
  const std::size_t d = poly.dim;
  if (x.size() != d) throw InputError("unbounded_direction: point dimension mismatch");
  if (n > d)
    throw UnsupportedError("unbounded_direction: " + std::to_string(n) + " constraints exceed dimension " +
                           std::to_string(d));
  const Vector s = poly.slack(x);
  for (std::size_t i = 0; i < n; ++i)
    if (!(s[i] > 0.0)) throw PreconditionError("unbounded_direction: point is not strictly feasible");

  if (n == 0) {
    Vector v(d, 0.0);
    v[0] = 1.0;
    return v;
  }
  if (n == d) {
    if (const auto lu = LuDecomposition::factor(poly.rows)) {
      // w solves M w = c; then M(x - w) = M x - c < 0.
      const Vector w = lu->solve(poly.offsets);
      Vector v(d);
      for (std::size_t i = 0; i < d; ++i) v[i] = x[i] - w[i];
      return v;
    }
    // Singular square M has a nontrivial kernel; fall through.
  }
  auto kernel = nullspace(poly.rows);
  if (kernel.empty()) throw Error("unbounded_direction: numerical nullspace unexpectedly empty");
  return std::move(kernel.front());
}

Polyhedron omega_polyhedron(const Layer& output_layer, int cls) {
  const Matrix& w = output_layer.weights;
  const Vector& b = output_layer.bias;
  const std::size_t d_out = w.rows();
  const std::size_t d = w.cols();
  if (d_out == 1) {
    if (cls != kNegClass && cls != kPosClass) throw InputError("omega_polyhedron: scalar classes are neg/pos");
    const double sign = cls == kNegClass ? 1.0 : -1.0;
    Matrix m(1, d);
    for (std::size_t k = 0; k < d; ++k) m(0, k) = sign * w(0, k);
    return Polyhedron(std::move(m), Vector{-sign * b[0]});
  }
  if (cls < 0 || static_cast<std::size_t>(cls) >= d_out)
    throw InputError("omega_polyhedron: class index " + std::to_string(cls) + " out of range");
  const auto j = static_cast<std::size_t>(cls);
  Matrix m(d_out - 1, d);
  Vector c;
  std::size_t r = 0;
  for (std::size_t k = 0; k < d_out; ++k) {
    if (k == j) continue;
    for (std::size_t col = 0; col < d; ++col) m(r, col) = w(k, col) - w(j, col);
    c.push_back(b[j] - b[k]);
    ++r;
  }
  return Polyhedron(std::move(m), std::move(c));
}

}  // namespace narrownet
