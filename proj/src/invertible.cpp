#include "narrownet/invertible.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>

#include "narrownet/parallel.hpp"

namespace narrownet {

namespace {

constexpr std::array<unsigned, 12> kPrimes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
constexpr int kMaxHalvings = 8;

double radical_inverse(std::size_t index, unsigned base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

double sup_error(const Network& a, const Network& b, const std::vector<Vector>& samples, std::size_t threads) {
  double worst = 0.0;
  std::mutex m;
  parallel_for(samples.size(), threads, [&](std::size_t begin, std::size_t end) {
    Evaluator ea(a), eb(b);
    double local = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto ya = ea.forward(samples[i]);
      const Vector fa(ya.begin(), ya.end());
      const auto yb = eb.forward(samples[i]);
      double s = 0.0;
      for (std::size_t k = 0; k < fa.size(); ++k) s += (fa[k] - yb[k]) * (fa[k] - yb[k]);
      local = std::max(local, std::sqrt(s));
    }
    std::lock_guard lock(m);
    worst = std::max(worst, local);
  });
  return worst;
}

}  // namespace

Box::Box(Vector l, Vector h) : lo(std::move(l)), hi(std::move(h)) {
  if (lo.size() != hi.size() || lo.empty()) throw InputError("box bounds must be non-empty and of equal length");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i]))
      throw InputError("box needs finite lo < hi on every axis");
}

Box Box::cube(std::size_t dim, double lo, double hi) { return Box(Vector(dim, lo), Vector(dim, hi)); }

std::vector<Vector> box_samples(const Box& box, std::size_t count) {
  const std::size_t d = box.dim();
  if (d > kPrimes.size()) throw UnsupportedError("box sampling supports at most 12 dimensions");
  std::vector<Vector> pts;
  pts.reserve((std::size_t{1} << d) + count);
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    Vector p(d);
    for (std::size_t i = 0; i < d; ++i) p[i] = (mask >> i) & 1U ? box.hi[i] : box.lo[i];
    pts.push_back(std::move(p));
  }
  for (std::size_t n = 1; n <= count; ++n) {
    Vector p(d);
    for (std::size_t i = 0; i < d; ++i) p[i] = box.lo[i] + radical_inverse(n, kPrimes[i]) * (box.hi[i] - box.lo[i]);
    pts.push_back(std::move(p));
  }
  return pts;
}

Json report_to_json(const PerturbationReport& r) {
  return {{"per_layer_budget", r.per_layer_budget},
          {"per_layer_op_distance", r.per_layer_op_distance},
          {"min_singular_values", r.min_singular_values},
          {"measured_sup_error", r.measured_sup_error},
          {"sample_count", r.sample_count},
          {"target_eps", r.target_eps},
          {"retries", r.retries}};
}

Matrix perturb_invertible(const Matrix& w, double delta) {
  if (!(delta > 0.0)) throw InputError("perturb_invertible: delta must be positive");
  if (w.rows() != w.cols()) throw InputError("perturb_invertible: matrix must be square");
  if (is_numerically_invertible(w)) return w;
  // W + tI is exactly singular only for the finitely many t = -λ.
  double t = delta / 2.0;
  for (int attempt = 0; attempt < 64; ++attempt, t /= 2.0) {
    Matrix candidate = w;
    for (std::size_t i = 0; i < w.rows(); ++i) candidate(i, i) += t;
    if (is_numerically_invertible(candidate)) return candidate;
  }
  throw Error("perturb_invertible: no invertible shift found");
}

Network pad_square(const Network& net) {
  const std::size_t d = net.d_in();
  if (net.width() > d)
    throw UnsupportedError("pad_square: width " + std::to_string(net.width()) + " exceeds input dimension " +
                           std::to_string(d));
  std::vector<Layer> hidden;
  std::size_t prev_real = d;  // unpadded width of the previous layer
  for (const Layer& l : net.hidden()) {
    Layer p{Matrix(d, d), Vector(d, 0.0)};
    for (std::size_t i = 0; i < l.out_dim(); ++i) {
      for (std::size_t j = 0; j < prev_real; ++j) p.weights(i, j) = l.weights(i, j);
      p.bias[i] = l.bias[i];
    }
    prev_real = l.out_dim();
    hidden.push_back(std::move(p));
  }
  const Layer& o = net.output();
  Layer out{Matrix(o.out_dim(), d), o.bias};
  for (std::size_t i = 0; i < o.out_dim(); ++i)
    for (std::size_t j = 0; j < prev_real; ++j) out.weights(i, j) = o.weights(i, j);
  return Network(net.activation(), std::move(hidden), std::move(out));
}

InvertibilizeResult invertibilize_network(const Network& net, const Box& box, double eps, std::size_t sample_budget,
                                          std::size_t threads) {
  if (!(eps > 0.0)) throw InputError("invertibilize_network: eps must be positive");
  if (box.dim() != net.d_in()) throw InputError("invertibilize_network: box dimension differs from d_in");
  const Network padded = pad_square(net);
  const auto& layers = padded.hidden();
  const std::size_t h = layers.size();
  const std::vector<Vector> samples = box_samples(box, sample_budget);

  PerturbationReport report;
  report.sample_count = samples.size();
  report.target_eps = eps;
  if (h == 0) return {padded, report};

  // R_l = 1 + largest activation norm entering layer l over the samples.
  Vector entering(h, 0.0);
  for (const Vector& x : samples) {
    entering[0] = std::max(entering[0], norm2(x));
    const TraceRecord t = padded.forward_trace(x);
    for (std::size_t l = 1; l < h; ++l) entering[l] = std::max(entering[l], norm2(t.activations[l - 1]));
  }
  // Amplification of an error injected at layer l by everything downstream.
  Vector downstream(h, 1.0);
  double acc = std::max(1.0, op_norm(padded.output().weights));
  for (std::size_t l = h; l-- > 0;) {
    downstream[l] = acc;
    acc *= std::max(1.0, padded.activation().lipschitz() * op_norm(layers[l].weights));
  }
  Vector budget(h);
  for (std::size_t l = 0; l < h; ++l)
    budget[l] = eps / (static_cast<double>(h) * downstream[l] * (1.0 + entering[l]));

  for (int attempt = 0; attempt <= kMaxHalvings; ++attempt) {
    std::vector<Layer> perturbed;
    report.per_layer_budget = budget;
    report.per_layer_op_distance.clear();
    report.min_singular_values.clear();
    for (std::size_t l = 0; l < h; ++l) {
      Matrix w = perturb_invertible(layers[l].weights, budget[l]);
      report.per_layer_op_distance.push_back(op_norm(w - layers[l].weights));
      report.min_singular_values.push_back(singular_values(w).back());
      perturbed.push_back(Layer{std::move(w), layers[l].bias});
    }
    Network candidate(padded.activation(), std::move(perturbed), padded.output());
    report.measured_sup_error = sup_error(padded, candidate, samples, threads);
    report.retries = attempt;
    if (report.measured_sup_error < eps) return {std::move(candidate), report};
    for (double& b : budget) b /= 2.0;
  }
  throw ConvergenceError("invertibilize_network: sampled sup error " + std::to_string(report.measured_sup_error) +
                             " still >= eps after budget halvings",
                         report);
}

Network shift_output_bias(const Network& net, int cls, double eps) {
  if (!(eps > 0.0)) throw InputError("shift_output_bias: eps must be positive");
  Layer out = net.output();
  if (net.scalar_output()) {
    if (cls == kPosClass)
      out.bias[0] -= eps / 2.0;
    else if (cls == kNegClass)
      out.bias[0] += eps / 2.0;
    else
      throw InputError("shift_output_bias: scalar classes are neg/pos");
  } else {
    if (cls < 0 || static_cast<std::size_t>(cls) >= net.d_out())
      throw InputError("shift_output_bias: class index out of range");
    out.bias[static_cast<std::size_t>(cls)] -= eps / 2.0;
  }
  return Network(net.activation(), net.hidden(), std::move(out));
}

}  // namespace narrownet
