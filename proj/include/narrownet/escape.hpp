#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "narrownet/error.hpp"
#include "narrownet/fixture_io.hpp"
#include "narrownet/geometry.hpp"
#include "narrownet/network.hpp"

namespace narrownet {

// F restricted to one activation pattern: F(x) = matrix·x + offset for x in `validity`.
struct AffinePiece {
  Matrix matrix;
  Vector offset;
  Polyhedron validity;                  // strict pattern constraints pulled back to input space
  std::vector<std::vector<bool>> active;  // per hidden layer, per unit: preactivation > 0
};

class DegeneratePatternError : public Error {
 public:
  using Error::Error;
};

// Requires relu or leaky_relu and no hidden preactivation exactly 0 at x0.
AffinePiece affine_collapse(const Network& net, std::span<const double> x0);

// A polyline from the seed plus a terminal ray, all inside one decision
// region, with the norm diverging along the ray.
struct EscapeCertificate {
  int cls = 0;
  std::vector<Vector> vertices;  // vertices.front() is the seed, vertices.back() starts the ray
  Vector direction;              // unit terminal direction
  // True when the class is provably constant along the whole terminal ray:
  // the terminal activation pattern cannot change, or (relu) the moving
  // preactivation only moves deeper into the dead zone.
  bool analytic_terminal = false;
  double verified_radius = 0.0;
  std::size_t segment_count = 0;  // finite segments + the terminal ray

  const Vector& terminal_point() const { return vertices.back(); }
};

class IncompleteCertificateError : public Error {
 public:
  IncompleteCertificateError(const std::string& what, EscapeCertificate partial)
      : Error(what), partial_(std::move(partial)) {}
  const EscapeCertificate& partial() const noexcept { return partial_; }

 private:
  EscapeCertificate partial_;
};

class MalformedCertificateError : public Error {
 public:
  using Error::Error;
};

struct EscapeOptions {
  double r_max = 1e3;
  std::size_t max_segments = 32;
  std::size_t samples_per_segment = 64;
};

EscapeCertificate escape_certificate(const Network& net, std::span<const double> x0, const EscapeOptions& opts = {});

struct VerificationReport {
  bool constant_class = false;
  double max_radius_checked = 0.0;
  std::size_t violations = 0;
  std::size_t evaluations = 0;
};

// Evaluates decide at `samples` points per polyline segment (endpoints
// included) and along the terminal ray at geometrically spaced distances
// until the norm reaches r_max.
VerificationReport verify_certificate(const Network& net, const EscapeCertificate& cert, std::size_t samples = 64,
                                      double r_max = 1e3);

Json certificate_to_json(const Network& net, const EscapeCertificate& cert);
EscapeCertificate certificate_from_json(const Network& net, const Json& doc);
Json verification_to_json(const VerificationReport& r);

}  // namespace narrownet
