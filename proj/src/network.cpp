#include "narrownet/network.hpp"

#include <algorithm>
#include <cmath>

#include "narrownet/error.hpp"
#include "narrownet/geometry.hpp"

namespace narrownet {

namespace {

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw InputError(std::string(what) + " contains a non-finite entry");
}

void check_layer(const Layer& layer, std::size_t expected_in, const std::string& name) {
  if (layer.weights.rows() == 0 || layer.weights.cols() == 0)
    throw InputError(name + ": empty weight matrix");
  if (layer.in_dim() != expected_in)
    throw InputError(name + ": expects " + std::to_string(layer.in_dim()) + " inputs, previous layer has " +
                     std::to_string(expected_in));
  if (layer.bias.size() != layer.out_dim())
    throw InputError(name + ": bias length " + std::to_string(layer.bias.size()) + " != rows " +
                     std::to_string(layer.out_dim()));
  check_finite(layer.weights.data(), name.c_str());
  check_finite(layer.bias, name.c_str());
}

// z = W a + b, accumulated in a fixed order so every evaluation path agrees bit-for-bit.
void affine_into(const Layer& layer, std::span<const double> a, std::span<double> z) {
  matvec_into(layer.weights, a, z);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += layer.bias[i];
}

}  // namespace

Activation Activation::leaky_relu(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw InputError("leaky_relu beta must lie in (0,1)");
  return {ActivationKind::leaky_relu, beta};
}

double Activation::derivative(double t) const noexcept {
  switch (kind) {
    case ActivationKind::relu: return t > 0.0 ? 1.0 : 0.0;
    case ActivationKind::leaky_relu: return t > 0.0 ? 1.0 : beta;
    case ActivationKind::tanh: {
      const double th = std::tanh(t);
      return 1.0 - th * th;
    }
  }
  return 1.0;
}

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: return "leaky_relu";
    case ActivationKind::tanh: return "tanh";
  }
  return "?";
}

ActivationKind activation_kind_from_string(const std::string& name) {
  if (name == "relu") return ActivationKind::relu;
  if (name == "leaky_relu") return ActivationKind::leaky_relu;
  if (name == "tanh") return ActivationKind::tanh;
  throw InputError("unknown activation '" + name + "'");
}

Network::Network(Activation activation, std::vector<Layer> hidden, Layer output)
    : activation_(activation), hidden_(std::move(hidden)), output_(std::move(output)) {
  if (activation_.kind == ActivationKind::leaky_relu && !(activation_.beta > 0.0 && activation_.beta < 1.0))
    throw InputError("leaky_relu beta must lie in (0,1)");
  if (activation_.kind != ActivationKind::leaky_relu) activation_.beta = 0.0;
  std::size_t prev = hidden_.empty() ? output_.in_dim() : hidden_.front().in_dim();
  for (std::size_t j = 0; j < hidden_.size(); ++j) {
    check_layer(hidden_[j], prev, "hidden[" + std::to_string(j) + "]");
    prev = hidden_[j].out_dim();
  }
  check_layer(output_, prev, "output");
}

std::size_t Network::d_in() const noexcept {
  return hidden_.empty() ? output_.in_dim() : hidden_.front().in_dim();
}

std::size_t Network::width() const noexcept {
  std::size_t w = output_.out_dim();
  for (const auto& l : hidden_) w = std::max(w, l.out_dim());
  return w;
}

std::string Network::class_name(int cls) const {
  if (scalar_output()) {
    if (cls == kNegClass) return "neg";
    if (cls == kPosClass) return "pos";
  } else if (cls >= 0 && static_cast<std::size_t>(cls) < d_out()) {
    return std::to_string(cls);
  }
  throw InputError("invalid class index " + std::to_string(cls));
}

int Network::class_from_name(const std::string& name) const {
  if (scalar_output()) {
    if (name == "neg") return kNegClass;
    if (name == "pos") return kPosClass;
    throw InputError("scalar-output networks have classes 'neg' and 'pos', got '" + name + "'");
  }
  std::size_t pos = 0;
  int idx = -1;
  try {
    idx = std::stoi(name, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != name.size() || idx < 0 || static_cast<std::size_t>(idx) >= d_out())
    throw InputError("invalid class '" + name + "'");
  return idx;
}

Vector Network::forward(std::span<const double> x) const {
  if (x.size() != d_in())
    throw InputError("input has length " + std::to_string(x.size()) + ", network expects " + std::to_string(d_in()));
  check_finite(x, "input");
  Vector a(x.begin(), x.end());
  Vector z;
  for (const auto& layer : hidden_) {
    z.assign(layer.out_dim(), 0.0);
    affine_into(layer, a, z);
    for (double& v : z) v = activation_(v);
    a.swap(z);
  }
  Vector out(d_out());
  affine_into(output_, a, out);
  return out;
}

TraceRecord Network::forward_trace(std::span<const double> x) const {
  if (x.size() != d_in())
    throw InputError("input has length " + std::to_string(x.size()) + ", network expects " + std::to_string(d_in()));
  check_finite(x, "input");
  TraceRecord t;
  Vector a(x.begin(), x.end());
  for (const auto& layer : hidden_) {
    Vector z(layer.out_dim());
    affine_into(layer, a, z);
    Vector act(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) act[i] = activation_(z[i]);
    t.preactivations.push_back(std::move(z));
    t.activations.push_back(act);
    a = std::move(act);
  }
  t.output.assign(d_out(), 0.0);
  affine_into(output_, a, t.output);
  return t;
}

Vector Network::hidden_output(std::span<const double> x) const {
  if (hidden_.empty()) return Vector(x.begin(), x.end());
  return forward_trace(x).activations.back();
}

std::optional<int> Network::decide(std::span<const double> x) const { return decide_output(forward(x)); }

std::optional<int> decide_output(std::span<const double> output) {
  if (output.size() == 1) {
    if (output[0] < 0.0) return kNegClass;
    if (output[0] > 0.0) return kPosClass;
    return std::nullopt;
  }
  std::size_t best = 0;
  bool tie = false;
  for (std::size_t k = 1; k < output.size(); ++k) {
    if (output[k] > output[best]) {
      best = k;
      tie = false;
    } else if (output[k] == output[best]) {
      tie = true;
    }
  }
  if (tie) return std::nullopt;
  return static_cast<int>(best);
}

double class_score(std::span<const double> output, int cls) {
  if (output.size() == 1) return cls == kNegClass ? -output[0] : output[0];
  return output[static_cast<std::size_t>(cls)];
}

Evaluator::Evaluator(const Network& net) : net_(&net) {
  std::size_t w = net.d_in();
  for (const auto& l : net.hidden()) w = std::max(w, l.out_dim());
  w = std::max(w, net.d_out());
  a_.resize(w);
  b_.resize(w);
}

std::span<const double> Evaluator::forward(std::span<const double> x) {
  const Activation act = net_->activation();
  std::size_t n = x.size();
  std::copy(x.begin(), x.end(), a_.begin());
  for (const auto& layer : net_->hidden()) {
    std::span<double> z(b_.data(), layer.out_dim());
    affine_into(layer, std::span<const double>(a_.data(), n), z);
    for (double& v : z) v = act(v);
    a_.swap(b_);
    n = layer.out_dim();
  }
  const Layer& out = net_->output();
  std::span<double> z(b_.data(), out.out_dim());
  affine_into(out, std::span<const double>(a_.data(), n), z);
  return z;
}

int Evaluator::decide(std::span<const double> x) {
  const auto d = decide_output(forward(x));
  return d ? *d : -1;
}

std::size_t width(const Network& net) { return net.width(); }
Vector forward(const Network& net, std::span<const double> x) { return net.forward(x); }
TraceRecord forward_trace(const Network& net, std::span<const double> x) { return net.forward_trace(x); }
std::optional<int> decide(const Network& net, std::span<const double> x) { return net.decide(x); }

std::vector<Vector> kernel_directions(const Network& net, double tol) {
  if (!(tol > 0.0)) throw InputError("kernel tolerance must be positive");
  const Matrix& first = net.hidden().empty() ? net.output().weights : net.hidden().front().weights;
  return nullspace(first, tol);
}

}  // namespace narrownet
