#include "narrownet/escape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace narrownet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Vertices stop this fraction of the segment short of a breakpoint (relu)
// or this far past it (leaky_relu).
constexpr double kBreakpointMargin = 1e-9;
// A breakpoint this many verification radii away is left unresolved: the
// terminal ray is then certified numerically only.
constexpr double kFarBreakpoint = 10.0;

struct Coord {
  std::size_t layer = 0;
  std::size_t unit = 0;
};

struct Breakpoint {
  double t = kInf;
  Coord where;
};

// Square, invertible hidden layers are a precondition of the construction.
std::vector<LuDecomposition> factor_hidden(const Network& net) {
  std::vector<LuDecomposition> lus;
  const std::size_t d = net.d_in();
  for (std::size_t l = 0; l < net.hidden().size(); ++l) {
    const Matrix& w = net.hidden()[l].weights;
    if (w.rows() != d || w.cols() != d)
      throw PreconditionError("escape_certificate: hidden layer " + std::to_string(l) +
                              " is not square d_in x d_in; run invertibilize_network first");
    if (!is_numerically_invertible(w))
      throw PreconditionError("escape_certificate: hidden layer " + std::to_string(l) +
                              " is not invertible; run invertibilize_network first");
    auto lu = LuDecomposition::factor(w, 1e-14);
    if (!lu) throw PreconditionError("escape_certificate: hidden layer " + std::to_string(l) + " failed LU");
    lus.push_back(std::move(*lu));
  }
  return lus;
}

// Directional derivatives of every hidden preactivation along v, for the
// activation slopes fixed at the current pattern.
std::vector<Vector> preactivation_slopes(const Network& net, const TraceRecord& trace, std::span<const double> v,
                                         std::size_t layers) {
  std::vector<Vector> slopes;
  Vector a(v.begin(), v.end());
  for (std::size_t l = 0; l < layers; ++l) {
    Vector s = matvec(net.hidden()[l].weights, a);
    const Vector& z = trace.preactivations[l];
    a.assign(s.size(), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) a[i] = s[i] * (z[i] > 0.0 ? 1.0 : net.activation().beta);
    slopes.push_back(std::move(s));
  }
  return slopes;
}

// First t > 0 at which a preactivation of layers [0, layers) changes sign
// along the slopes. `positive_only` restricts to coordinates that start > 0.
Breakpoint first_breakpoint(const TraceRecord& trace, const std::vector<Vector>& slopes, bool positive_only) {
  Breakpoint best;
  for (std::size_t l = 0; l < slopes.size(); ++l) {
    const Vector& z = trace.preactivations[l];
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double s = slopes[l][i];
      double t = kInf;
      if (z[i] > 0.0 && s < 0.0)
        t = z[i] / -s;
      else if (!positive_only && z[i] < 0.0 && s > 0.0)
        t = -z[i] / s;
      if (t < best.t) best = {t, {l, i}};
    }
  }
  return best;
}

// Affine map of the hidden stack on the current pattern: h(x) = J x + q.
void hidden_affine(const Network& net, const TraceRecord& trace, Matrix& j, Vector& q) {
  const std::size_t d = net.d_in();
  j = Matrix::identity(d);
  q.assign(d, 0.0);
  for (std::size_t l = 0; l < net.hidden().size(); ++l) {
    const Layer& layer = net.hidden()[l];
    Matrix nj = layer.weights * j;
    Vector nq = matvec(layer.weights, q);
    for (std::size_t i = 0; i < nq.size(); ++i) {
      nq[i] += layer.bias[i];
      const double slope = trace.preactivations[l][i] > 0.0 ? 1.0 : net.activation().beta;
      nq[i] *= slope;
      for (std::size_t c = 0; c < nj.cols(); ++c) nj(i, c) *= slope;
    }
    j = std::move(nj);
    q = std::move(nq);
  }
}

// recession direction for the class region pulled back through the current
// affine piece. When the direction comes from a kernel, both signs work and
// the one travelling further before a breakpoint is kept.
Vector omega_direction(const Network& net, const TraceRecord& trace, std::span<const double> x, int cls,
                       bool positive_only) {
  Matrix j;
  Vector q;
  hidden_affine(net, trace, j, q);
  const Polyhedron omega = omega_polyhedron(net.output(), cls);
  Matrix m = omega.rows * j;
  Vector c = omega.offsets;
  const Vector rq = matvec(omega.rows, q);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= rq[i];
  const Polyhedron pulled(std::move(m), std::move(c));
  Vector v = unbounded_direction(pulled, x);
  if (pulled.num_constraints() < pulled.dim) {
    const std::size_t layers = net.hidden().size();
    const Vector neg = scaled(-1.0, v);
    const double t_pos = first_breakpoint(trace, preactivation_slopes(net, trace, v, layers), positive_only).t;
    const double t_neg = first_breakpoint(trace, preactivation_slopes(net, trace, neg, layers), positive_only).t;
    if (t_neg > t_pos) v = neg;
  }
  return v;
}

void normalize(Vector& v) {
  const double n = norm2(v);
  if (!(n > 0.0) || !std::isfinite(n)) throw Error("escape_certificate: degenerate direction");
  for (double& x : v) x /= n;
}

EscapeCertificate finish(EscapeCertificate cert, Vector dir, bool analytic) {
  normalize(dir);
  cert.direction = std::move(dir);
  cert.analytic_terminal = analytic;
  cert.segment_count = cert.vertices.size();
  return cert;
}

bool beyond_reach(double t, std::span<const double> dir, std::span<const double> x, const EscapeOptions& opts) {
  return t * norm2(dir) > kFarBreakpoint * (std::max(opts.r_max, 1.0) + norm2(x));
}

// Relu construction: minimal-layer case split with pulled-back rays.
EscapeCertificate build_relu(const Network& net, std::span<const double> x0, int cls, const EscapeOptions& opts) {
  const std::vector<LuDecomposition> lus = factor_hidden(net);
  const std::size_t h = net.hidden().size();
  EscapeCertificate cert;
  cert.cls = cls;
  cert.vertices.emplace_back(x0.begin(), x0.end());
  std::optional<Coord> blocked;

  while (true) {
    if (cert.vertices.size() > opts.max_segments) {
      cert.segment_count = cert.vertices.size();
      throw IncompleteCertificateError("escape_certificate: segment cap reached", cert);
    }
    const Vector& x = cert.vertices.back();
    const TraceRecord trace = net.forward_trace(x);

    // Minimal layer holding a nonpositive preactivation (or the coordinate
    // the previous segment stopped short of).
    std::optional<std::size_t> layer;
    for (std::size_t l = 0; l < h && !layer; ++l) {
      const Vector& z = trace.preactivations[l];
      if (std::any_of(z.begin(), z.end(), [](double v) { return v <= 0.0; })) layer = l;
      if (blocked && blocked->layer == l) layer = l;
    }

    Vector dir;
    std::vector<Vector> slopes;
    if (layer) {
      const Vector& z = trace.preactivations[*layer];
      std::optional<std::size_t> k;
      for (std::size_t i = 0; i < z.size(); ++i)
        if (z[i] <= 0.0 && (!k || z[i] < z[*k])) k = i;
      if (!k) k = blocked->unit;
      // Ray z(t) = z - t e_k in layer-l preactivation space, pulled back
      // through the invertible affine layers below it.
      Vector y(net.d_in(), 0.0);
      y[*k] = -1.0;
      for (std::size_t l = *layer + 1; l-- > 0;) y = lus[l].solve(y);
      dir = std::move(y);
      slopes = preactivation_slopes(net, trace, dir, *layer);
    } else {
      dir = omega_direction(net, trace, x, cls, /*positive_only=*/true);
      slopes = preactivation_slopes(net, trace, dir, h);
    }

    const Breakpoint bp = first_breakpoint(trace, slopes, /*positive_only=*/true);
    if (bp.t == kInf) return finish(std::move(cert), std::move(dir), true);
    if (beyond_reach(bp.t, dir, x, opts)) return finish(std::move(cert), std::move(dir), false);
    cert.vertices.push_back(axpy(bp.t * (1.0 - kBreakpointMargin), dir, x));
    blocked = bp.where;
  }
}

// Leaky relu: the hidden stack H is a piecewise-affine bijection, so a ray
// y0 + t·v inside the class polyhedron of the last hidden space pulls back
// to a polyline. Each piece maps v back through its own Jacobian; vertices
// land just past each pattern boundary.
EscapeCertificate build_leaky(const Network& net, std::span<const double> x0, int cls, const EscapeOptions& opts) {
  factor_hidden(net);
  const std::size_t h = net.hidden().size();
  EscapeCertificate cert;
  cert.cls = cls;
  cert.vertices.emplace_back(x0.begin(), x0.end());
  const Vector v = unbounded_direction(omega_polyhedron(net.output(), cls), net.hidden_output(x0));
  while (true) {
    if (cert.vertices.size() > opts.max_segments) {
      cert.segment_count = cert.vertices.size();
      throw IncompleteCertificateError("escape_certificate: segment cap reached", cert);
    }
    const Vector& x = cert.vertices.back();
    const TraceRecord trace = net.forward_trace(x);
    Matrix j;
    Vector q;
    hidden_affine(net, trace, j, q);
    const auto lu = LuDecomposition::factor(j, 1e-14);
    if (!lu) throw PreconditionError("escape_certificate: hidden stack is numerically singular on this piece");
    Vector dir = lu->solve(v);
    const Breakpoint bp = first_breakpoint(trace, preactivation_slopes(net, trace, dir, h), false);
    if (bp.t == kInf) return finish(std::move(cert), std::move(dir), true);
    if (beyond_reach(bp.t, dir, x, opts)) return finish(std::move(cert), std::move(dir), false);
    Vector next = axpy(bp.t * (1.0 + kBreakpointMargin), dir, x);
    const auto d = net.decide(next);
    if (!d || *d != cls) {
      cert.segment_count = cert.vertices.size();
      throw IncompleteCertificateError("escape_certificate: class changed across a pattern boundary", cert);
    }
    cert.vertices.push_back(std::move(next));
  }
}

}  // namespace

AffinePiece affine_collapse(const Network& net, std::span<const double> x0) {
  if (!net.activation().piecewise_linear())
    throw UnsupportedError("affine_collapse: activation must be relu or leaky_relu");
  const TraceRecord trace = net.forward_trace(x0);
  const std::size_t d = net.d_in();
  const double beta = net.activation().beta;

  AffinePiece piece;
  Matrix j = Matrix::identity(d);
  Vector q(d, 0.0);
  std::vector<Vector> rows;
  Vector offsets;
  for (std::size_t l = 0; l < net.hidden().size(); ++l) {
    const Layer& layer = net.hidden()[l];
    Matrix zj = layer.weights * j;
    Vector zq = matvec(layer.weights, q);
    std::vector<bool> active(zq.size());
    for (std::size_t i = 0; i < zq.size(); ++i) {
      zq[i] += layer.bias[i];
      const double z = trace.preactivations[l][i];
      if (z == 0.0)
        throw DegeneratePatternError("affine_collapse: preactivation " + std::to_string(i) + " of hidden layer " +
                                     std::to_string(l) + " is exactly zero");
      active[i] = z > 0.0;
      // s·(row·x + zq) > 0  <=>  -s·row·x < s·zq
      const double s = active[i] ? 1.0 : -1.0;
      Vector r(d);
      for (std::size_t c = 0; c < d; ++c) r[c] = -s * zj(i, c);
      rows.push_back(std::move(r));
      offsets.push_back(s * zq[i]);
      const double slope = active[i] ? 1.0 : beta;
      zq[i] *= slope;
      for (std::size_t c = 0; c < d; ++c) zj(i, c) *= slope;
    }
    piece.active.push_back(std::move(active));
    j = std::move(zj);
    q = std::move(zq);
  }
  piece.matrix = net.output().weights * j;
  piece.offset = matvec(net.output().weights, q);
  for (std::size_t i = 0; i < piece.offset.size(); ++i) piece.offset[i] += net.output().bias[i];
  piece.validity = rows.empty() ? Polyhedron::whole_space(d) : Polyhedron(Matrix::from_rows(rows, d), offsets);
  return piece;
}

EscapeCertificate escape_certificate(const Network& net, std::span<const double> x0, const EscapeOptions& opts) {
  if (!net.activation().piecewise_linear())
    throw UnsupportedError("escape_certificate: tanh networks are not supported");
  if (net.width() > net.d_in()) throw PreconditionError("escape_certificate: network width exceeds d_in");
  if (opts.max_segments == 0 || !(opts.r_max > 0.0)) throw InputError("escape_certificate: invalid options");
  const auto cls = net.decide(x0);
  if (!cls) throw PreconditionError("escape_certificate: seed point lies on a decision boundary (tie)");

  EscapeCertificate cert = net.activation().kind == ActivationKind::relu ? build_relu(net, x0, *cls, opts)
                                                                          : build_leaky(net, x0, *cls, opts);
  const VerificationReport report = verify_certificate(net, cert, opts.samples_per_segment, opts.r_max);
  if (!report.constant_class)
    throw IncompleteCertificateError(
        "escape_certificate: constructed path failed verification (" + std::to_string(report.violations) +
            " class violations)",
        cert);
  cert.verified_radius = report.max_radius_checked;
  return cert;
}

VerificationReport verify_certificate(const Network& net, const EscapeCertificate& cert, std::size_t samples,
                                      double r_max) {
  if (cert.vertices.empty()) throw MalformedCertificateError("certificate has no vertices");
  if (cert.direction.size() != net.d_in() || norm2(cert.direction) == 0.0)
    throw MalformedCertificateError("certificate terminal direction is zero or has the wrong dimension");
  for (const auto& v : cert.vertices)
    if (v.size() != net.d_in()) throw MalformedCertificateError("certificate vertex has the wrong dimension");
  samples = std::max<std::size_t>(samples, 2);

  VerificationReport rep;
  Evaluator eval(net);
  auto check = [&](std::span<const double> p) {
    ++rep.evaluations;
    if (eval.decide(p) != cert.cls) ++rep.violations;
    rep.max_radius_checked = std::max(rep.max_radius_checked, norm2(p));
  };

  for (std::size_t s = 0; s + 1 < cert.vertices.size(); ++s) {
    const Vector& a = cert.vertices[s];
    const Vector& b = cert.vertices[s + 1];
    for (std::size_t i = 0; i < samples; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(samples - 1);
      Vector p(a.size());
      for (std::size_t k = 0; k < p.size(); ++k) p[k] = a[k] + t * (b[k] - a[k]);
      check(p);
    }
  }

  const Vector& x = cert.terminal_point();
  Vector dir = cert.direction;
  const double dn = norm2(dir);
  for (double& v : dir) v /= dn;
  check(x);
  const double lambda_max = std::max(r_max, 1.0) + norm2(x);
  const double lambda_min = 1e-3;
  const std::size_t ray_samples = std::max<std::size_t>(samples, 16);
  for (std::size_t i = 0; i < ray_samples; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(ray_samples - 1);
    const double lambda = lambda_min * std::pow(lambda_max / lambda_min, frac);
    check(axpy(lambda, dir, x));
  }
  rep.constant_class = rep.violations == 0;
  return rep;
}

Json certificate_to_json(const Network& net, const EscapeCertificate& cert) {
  return {{"class", net.class_name(cert.cls)},
          {"class_index", cert.cls},
          {"vertices", cert.vertices},
          {"direction", cert.direction},
          {"analytic_terminal", cert.analytic_terminal},
          {"verified_radius", cert.verified_radius},
          {"segment_count", cert.segment_count}};
}

EscapeCertificate certificate_from_json(const Network& net, const Json& doc) {
  if (!doc.is_object()) throw MalformedCertificateError("certificate document must be an object");
  EscapeCertificate cert;
  try {
    if (!doc.contains("class") || !doc["class"].is_string()) throw SchemaError("class", "missing or not a string");
    cert.cls = net.class_from_name(doc["class"].get<std::string>());
    if (!doc.contains("vertices") || !doc["vertices"].is_array()) throw SchemaError("vertices", "missing");
    for (std::size_t i = 0; i < doc["vertices"].size(); ++i)
      cert.vertices.push_back(vector_from_json(doc["vertices"][i], "vertices[" + std::to_string(i) + "]"));
    if (!doc.contains("direction")) throw SchemaError("direction", "missing");
    cert.direction = vector_from_json(doc["direction"], "direction");
    cert.analytic_terminal = doc.value("analytic_terminal", false);
    cert.verified_radius = doc.value("verified_radius", 0.0);
    cert.segment_count = doc.value("segment_count", cert.vertices.size());
  } catch (const InputError& e) {
    throw MalformedCertificateError(e.what());
  } catch (const SchemaError& e) {
    throw MalformedCertificateError(e.what());
  } catch (const Json::exception& e) {
    throw MalformedCertificateError(e.what());
  }
  return cert;
}

Json verification_to_json(const VerificationReport& r) {
  return {{"constant_class", r.constant_class},
          {"max_radius_checked", r.max_radius_checked},
          {"violations", r.violations},
          {"evaluations", r.evaluations}};
}

}  // namespace narrownet
