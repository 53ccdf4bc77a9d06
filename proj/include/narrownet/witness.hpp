#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "narrownet/invertible.hpp"
#include "narrownet/network.hpp"

namespace narrownet {

// Continuous path in input space, parametrized over t in [0, 1].
using Path = std::function<Vector(double)>;

// True when decide(path(t)) == cls at every sample. Intervals are bisected
// until consecutive samples are at most `spacing` apart; false if that needs
// more than `max_samples` evaluations.
bool path_stays_in_class(const Network& net, int cls, const Path& path, double spacing,
                         std::size_t max_samples = std::size_t{1} << 22);

// Looks for a path from p that keeps the class of p and reaches the
// boundary of `box`. Candidates, in order:
//  - rays along first-layer kernel directions (F is constant on them),
//  - for nets without hidden layers, the recession direction of the output
//    polyhedron at p,
//  - for leaky_relu nets with full-row-rank hidden weights, a recession ray
//    of the last hidden space lifted back to the input.
bool escape_witness(const Network& net, std::span<const double> p, const Box& box, double spacing);

// Joins p and q, which must share a class, by the straight segment between
// their images in the last hidden space, lifted back through each layer with
// the inverse activation and a right inverse of the weights. Requires an
// invertible activation (leaky_relu or tanh) and full-row-rank hidden weights.
bool connecting_witness(const Network& net, std::span<const double> p, std::span<const double> q, double spacing);

}  // namespace narrownet
