#include "narrownet/witness.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "narrownet/error.hpp"
#include "narrownet/geometry.hpp"

namespace narrownet {

namespace {

bool finite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

bool inside(const Box& box, std::span<const double> x) {
  for (std::size_t a = 0; a < box.dim(); ++a)
    if (x[a] < box.lo[a] || x[a] > box.hi[a]) return false;
  return true;
}

// Distance along v from p (inside the box) to the box boundary.
double exit_distance(const Box& box, std::span<const double> p, std::span<const double> v) {
  double s = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < box.dim(); ++a) {
    if (v[a] > 0) s = std::min(s, (box.hi[a] - p[a]) / v[a]);
    if (v[a] < 0) s = std::min(s, (box.lo[a] - p[a]) / v[a]);
  }
  return s;
}

bool ray_witness(const Network& net, int cls, std::span<const double> p, const Vector& v, const Box& box,
                 double spacing) {
  const double s = exit_distance(box, p, v);
  if (!std::isfinite(s)) return false;
  const Vector start(p.begin(), p.end());
  return path_stays_in_class(net, cls, [&](double t) { return axpy(t * s, v, start); }, spacing);
}

double inverse_activation(const Activation& act, double y) {
  switch (act.kind) {
    case ActivationKind::leaky_relu: return y > 0.0 ? y : y / act.beta;
    case ActivationKind::tanh: return std::abs(y) < 1.0 ? std::atanh(y) : std::numeric_limits<double>::quiet_NaN();
    case ActivationKind::relu: break;
  }
  throw UnsupportedError("relu is not invertible");
}

// Maps a path in the last hidden space back to the input. Layer by layer,
// x = W⁺(σ⁻¹(z) − b) + n(t), where n(t) moves linearly inside ker W between
// the kernel parts of the two endpoints.
class Lift {
 public:
  Lift(const Network& net, std::span<const double> p, std::optional<std::span<const double>> q) : net_(&net) {
    if (net.hidden().empty()) throw UnsupportedError("nothing to lift without hidden layers");
    if (net.activation().kind == ActivationKind::relu) throw UnsupportedError("relu is not invertible");
    const TraceRecord tp = net.forward_trace(p);
    std::optional<TraceRecord> tq;
    if (q) tq = net.forward_trace(*q);
    for (std::size_t l = 0; l < net.hidden().size(); ++l) {
      const Matrix& w = net.hidden()[l].weights;
      if (rank(w) < w.rows()) throw PreconditionError("hidden weights are not of full row rank");
      const Matrix wt = w.transpose();
      Stage st{wt * inverse(w * wt), {}, {}};
      auto kernel_part = [&](std::span<const double> h) { return axpy(-1.0, matvec(st.right_inverse, matvec(w, h)), h); };
      const Vector hp = l == 0 ? Vector(p.begin(), p.end()) : tp.activations[l - 1];
      st.kernel_p = kernel_part(hp);
      if (tq) st.kernel_q = kernel_part(l == 0 ? Vector(q->begin(), q->end()) : tq->activations[l - 1]);
      stages_.push_back(std::move(st));
    }
  }

  Vector operator()(Vector z, double t) const {
    for (std::size_t l = stages_.size(); l-- > 0;) {
      const Stage& st = stages_[l];
      for (std::size_t k = 0; k < z.size(); ++k)
        z[k] = inverse_activation(net_->activation(), z[k]) - net_->hidden()[l].bias[k];
      Vector x = matvec(st.right_inverse, z);
      for (std::size_t k = 0; k < x.size(); ++k)
        x[k] += st.kernel_q.empty() ? st.kernel_p[k] : (1.0 - t) * st.kernel_p[k] + t * st.kernel_q[k];
      z = std::move(x);
    }
    return z;
  }

 private:
  struct Stage {
    Matrix right_inverse;
    Vector kernel_p, kernel_q;
  };
  const Network* net_;
  std::vector<Stage> stages_;
};

}  // namespace

bool path_stays_in_class(const Network& net, int cls, const Path& path, double spacing, std::size_t max_samples) {
  if (!(spacing > 0.0)) throw InputError("path spacing must be positive");
  Evaluator ev(net);
  auto ok = [&](const Vector& x) { return finite(x) && ev.decide(x) == cls; };
  struct Piece {
    double t0, t1;
    Vector x0, x1;
  };
  Vector a = path(0.0), b = path(1.0);
  if (!ok(a) || !ok(b)) return false;
  std::vector<Piece> todo{{0.0, 1.0, std::move(a), std::move(b)}};
  std::size_t evaluations = 2;
  while (!todo.empty()) {
    Piece piece = std::move(todo.back());
    todo.pop_back();
    if (norm2(axpy(-1.0, piece.x0, piece.x1)) <= spacing) continue;
    const double tm = 0.5 * (piece.t0 + piece.t1);
    if (++evaluations > max_samples || tm <= piece.t0 || tm >= piece.t1) return false;
    Vector xm = path(tm);
    if (!ok(xm)) return false;
    todo.push_back({tm, piece.t1, xm, std::move(piece.x1)});
    todo.push_back({piece.t0, tm, std::move(piece.x0), std::move(xm)});
  }
  return true;
}

bool escape_witness(const Network& net, std::span<const double> p, const Box& box, double spacing) {
  const std::optional<int> cls = net.decide(p);
  if (!cls || !inside(box, p)) return false;

  for (const Vector& v : kernel_directions(net))
    for (double sign : {1.0, -1.0})
      if (ray_witness(net, *cls, p, scaled(sign, v), box, spacing)) return true;

  try {
    if (net.hidden().empty())
      return ray_witness(net, *cls, p, unbounded_direction(omega_polyhedron(net.output(), *cls), p), box, spacing);
    if (net.activation().kind != ActivationKind::leaky_relu) return false;

    const Lift lift(net, p, std::nullopt);
    const Vector y0 = net.hidden_output(p);
    const Vector v = unbounded_direction(omega_polyhedron(net.output(), *cls), y0);
    // Grow the ray until its lift has left the box.
    double s = 1.0;
    while (inside(box, lift(axpy(s, v, y0), 1.0))) {
      s *= 2.0;
      if (s > 1e15) return false;
    }
    return path_stays_in_class(net, *cls, [&](double t) { return lift(axpy(t * s, v, y0), t); }, spacing);
  } catch (const Error&) {
    return false;
  }
}

bool connecting_witness(const Network& net, std::span<const double> p, std::span<const double> q, double spacing) {
  const std::optional<int> cls = net.decide(p);
  if (!cls || net.decide(q) != cls) return false;
  if (net.hidden().empty()) {
    // The class region is an intersection of half-spaces.
    const Vector a(p.begin(), p.end()), b(q.begin(), q.end());
    return path_stays_in_class(net, *cls, [&](double t) { return axpy(t, axpy(-1.0, a, b), a); }, spacing);
  }
  try {
    const Lift lift(net, p, q);
    const Vector yp = net.hidden_output(p), yq = net.hidden_output(q);
    const Vector dy = axpy(-1.0, yp, yq);
    return path_stays_in_class(net, *cls, [&](double t) { return lift(axpy(t, dy, yp), t); }, spacing);
  } catch (const Error&) {
    return false;
  }
}

}  // namespace narrownet
