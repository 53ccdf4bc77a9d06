#pragma once

#include <span>
#include <vector>

#include "narrownet/linalg.hpp"
#include "narrownet/network.hpp"

namespace narrownet {

// Open polyhedron {x : M x < c} (componentwise, strict). No rows means all of R^d.
struct Polyhedron {
  Matrix rows;    // n × d
  Vector offsets; // n
  std::size_t dim = 0;

  Polyhedron() = default;
  Polyhedron(Matrix m, Vector c);
  static Polyhedron whole_space(std::size_t dim);

  std::size_t num_constraints() const noexcept { return offsets.size(); }
  // c - M y; every entry positive iff y is inside.
  Vector slack(std::span<const double> y) const;
};

bool contains(const Polyhedron& poly, std::span<const double> y);

// Orthonormal basis of the numerical nullspace of M (row reduction, then
// Gram-Schmidt). Dimension is cols - numerical rank.
std::vector<Vector> nullspace(const Matrix& m, double tol = 1e-10);

// A nonzero v with M v <= 0, so x + λv stays inside for every λ >= 0.
// Requires n <= d and x strictly feasible.
Vector unbounded_direction(const Polyhedron& poly, std::span<const double> x);

// The set of last-hidden-layer values y where class `cls` wins:
//  d_out >= 2: rows w_k - w_j, offsets b_j - b_k for k != j;
//  d_out == 1: "neg" is {W y + b < 0}, "pos" is {-W y - b < 0}.
Polyhedron omega_polyhedron(const Layer& output_layer, int cls);

}  // namespace narrownet
